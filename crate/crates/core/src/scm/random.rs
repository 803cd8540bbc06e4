use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LinearScm;
use crate::error::{Error, Result};
use crate::graph::Dag;

/// How the response is picked among the generated nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseRule {
    /// Uniform over nodes with at least one parent; uniform over all nodes if none has one.
    #[default]
    WithParents,
    Uniform,
    Fixed(usize),
}

/// Parameters of the Erdős–Rényi linear-Gaussian SCM generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomScmConfig {
    /// Total number of variables, response included.
    pub num_nodes: usize,
    pub avg_degree: f64,
    /// Range of weight magnitudes.
    pub weight_range: (f64, f64),
    /// Range of the location term (intercept; noise means are zero).
    pub intercept_range: (f64, f64),
    pub variance_range: (f64, f64),
    /// Flip each weight's sign with probability 1/2.
    pub flip_signs: bool,
    pub response_rule: ResponseRule,
}

impl Default for RandomScmConfig {
    fn default() -> Self {
        RandomScmConfig {
            num_nodes: 15,
            avg_degree: 3.0,
            weight_range: (0.5, 1.0),
            intercept_range: (0.0, 1.0),
            variance_range: (0.0, 1.0),
            flip_signs: false,
            response_rule: ResponseRule::WithParents,
        }
    }
}

impl RandomScmConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.num_nodes;
        if p < 2 {
            return Err(Error::arg("a random SCM needs at least two nodes"));
        }
        if !(self.avg_degree >= 0.0 && self.avg_degree < (p - 1) as f64) {
            return Err(Error::arg(format!(
                "average degree {} must lie in [0, {})",
                self.avg_degree,
                p - 1
            )));
        }
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(self.weight_range) || self.weight_range.0 <= 0.0 {
            return Err(Error::arg(format!(
                "weight range {:?} must satisfy 0 < lo <= hi",
                self.weight_range
            )));
        }
        if !ok(self.intercept_range) {
            return Err(Error::arg(format!("invalid intercept range {:?}", self.intercept_range)));
        }
        if !ok(self.variance_range) || self.variance_range.0 < 0.0 {
            return Err(Error::arg(format!(
                "variance range {:?} must satisfy 0 <= lo <= hi",
                self.variance_range
            )));
        }
        if let ResponseRule::Fixed(r) = self.response_rule {
            crate::graph::check_index(r, p)?;
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draws a random linear SCM. Each unordered pair of nodes is joined with
/// probability `avg_degree / (p - 1)`, oriented along a random permutation.
pub fn random_scm(cfg: &RandomScmConfig, seed: u64) -> Result<LinearScm> {
    cfg.validate()?;
    let p = cfg.num_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let prob = cfg.avg_degree / (p - 1) as f64;

    let mut weights = DMatrix::zeros(p, p);
    let mut edges = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            if rng.random_bool(prob) {
                let (from, to) = (order[a], order[b]);
                let mut w = uniform(&mut rng, cfg.weight_range);
                if cfg.flip_signs && rng.random_bool(0.5) {
                    w = -w;
                }
                weights[(from, to)] = w;
                edges.push((from, to));
            }
        }
    }
    let intercepts: Vec<f64> = (0..p).map(|_| uniform(&mut rng, cfg.intercept_range)).collect();
    let variances: Vec<f64> = (0..p).map(|_| uniform(&mut rng, cfg.variance_range)).collect();

    let response = match cfg.response_rule {
        ResponseRule::Fixed(r) => r,
        ResponseRule::Uniform => rng.random_range(0..p),
        ResponseRule::WithParents => {
            let mut has_parent = vec![false; p];
            for &(_, to) in &edges {
                has_parent[to] = true;
            }
            let pool: Vec<usize> = (0..p).filter(|&i| has_parent[i]).collect();
            if pool.is_empty() {
                rng.random_range(0..p)
            } else {
                pool[rng.random_range(0..pool.len())]
            }
        }
    };
    let dag = Dag::new(p, &edges, response)?;
    LinearScm::new(dag, weights, intercepts, vec![0.0; p], variances)
}
