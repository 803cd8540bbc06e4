//! Linear-Gaussian structural causal models.
//!
//! Each variable `X_j` is assigned
//! `X_j := intercept_j + sum_i weights[i][j] * X_i + eps_j` with
//! `eps_j ~ N(noise_mean_j, noise_variance_j)`, in topological order.

mod environment;
mod gaussian;
mod random;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_index, Dag};

pub use environment::{write_csv, Environment, EnvironmentSet};
pub use gaussian::{gaussian_condition, population_ols, GaussianDist, PopulationOls};
pub use random::{random_scm, RandomScmConfig, ResponseRule};

/// Coefficients with magnitude at or below this are treated as zero when
/// reading an OLS support.
pub const SUPPORT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionKind {
    /// Replace the assignment by `N(mean, variance)`; variance 0 gives a constant.
    Do,
    /// Add an independent `N(mean, variance)` term to the assignment.
    Shift,
    /// Replace the noise term by `N(mean, variance)`.
    Noise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub target: usize,
    pub kind: InterventionKind,
    pub mean: f64,
    pub variance: f64,
}

impl Intervention {
    pub fn new(target: usize, kind: InterventionKind, mean: f64, variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(Error::arg(format!(
                "intervention needs a finite mean and a finite non-negative variance, got ({mean}, {variance})"
            )));
        }
        Ok(Intervention {
            target,
            kind,
            mean,
            variance,
        })
    }

    pub fn shift(target: usize, mean: f64, variance: f64) -> Result<Self> {
        Self::new(target, InterventionKind::Shift, mean, variance)
    }

    pub fn do_(target: usize, mean: f64, variance: f64) -> Result<Self> {
        Self::new(target, InterventionKind::Do, mean, variance)
    }

    pub fn noise(target: usize, mean: f64, variance: f64) -> Result<Self> {
        Self::new(target, InterventionKind::Noise, mean, variance)
    }

    /// The same intervention moved to another variable.
    pub fn at(&self, target: usize) -> Self {
        Intervention { target, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScmJson", into = "ScmJson")]
pub struct LinearScm {
    dag: Dag,
    weights: DMatrix<f64>,
    intercepts: DVector<f64>,
    noise_means: DVector<f64>,
    noise_variances: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScmJson {
    p: usize,
    edges: Vec<[usize; 2]>,
    response: usize,
    /// Dense row-major, `weights[i * p + j]` is the coefficient of `X_i` in `X_j`.
    weights: Vec<f64>,
    intercepts: Vec<f64>,
    noise_means: Vec<f64>,
    noise_variances: Vec<f64>,
}

impl TryFrom<ScmJson> for LinearScm {
    type Error = Error;

    fn try_from(j: ScmJson) -> Result<Self> {
        if j.weights.len() != j.p * j.p {
            return Err(Error::arg(format!(
                "weights has {} entries, expected {}",
                j.weights.len(),
                j.p * j.p
            )));
        }
        let edges: Vec<(usize, usize)> = j.edges.iter().map(|e| (e[0], e[1])).collect();
        let dag = Dag::new(j.p, &edges, j.response)?;
        let weights = DMatrix::from_row_slice(j.p, j.p, &j.weights);
        LinearScm::new(dag, weights, j.intercepts, j.noise_means, j.noise_variances)
    }
}

impl From<LinearScm> for ScmJson {
    fn from(s: LinearScm) -> Self {
        let p = s.dag.num_nodes();
        let mut weights = Vec::with_capacity(p * p);
        for i in 0..p {
            weights.extend(s.weights.row(i).iter());
        }
        ScmJson {
            p,
            edges: s.dag.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            response: s.dag.response(),
            weights,
            intercepts: s.intercepts.iter().copied().collect(),
            noise_means: s.noise_means.iter().copied().collect(),
            noise_variances: s.noise_variances.iter().copied().collect(),
        }
    }
}

impl LinearScm {
    pub fn new(
        dag: Dag,
        weights: DMatrix<f64>,
        intercepts: Vec<f64>,
        noise_means: Vec<f64>,
        noise_variances: Vec<f64>,
    ) -> Result<Self> {
        let p = dag.num_nodes();
        if weights.shape() != (p, p) {
            return Err(Error::arg(format!(
                "weights must be {p}x{p}, got {:?}",
                weights.shape()
            )));
        }
        for (name, v) in [
            ("intercepts", &intercepts),
            ("noise_means", &noise_means),
            ("noise_variances", &noise_variances),
        ] {
            if v.len() != p {
                return Err(Error::arg(format!("{name} has length {}, expected {p}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::arg(format!("{name} contains non-finite values")));
            }
        }
        if noise_variances.iter().any(|&v| v < 0.0) {
            return Err(Error::arg("noise variances must be non-negative"));
        }
        for i in 0..p {
            for j in 0..p {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(Error::arg("weights contain non-finite values"));
                }
                if (w != 0.0) != dag.has_edge(i, j) {
                    return Err(Error::arg(format!(
                        "weight ({i}, {j}) = {w} disagrees with the graph"
                    )));
                }
            }
        }
        Ok(LinearScm {
            dag,
            weights,
            intercepts: DVector::from_vec(intercepts),
            noise_means: DVector::from_vec(noise_means),
            noise_variances: DVector::from_vec(noise_variances),
        })
    }

    /// Builds the graph from the non-zero pattern of `weights`.
    pub fn from_weights(
        weights: DMatrix<f64>,
        response: usize,
        intercepts: Vec<f64>,
        noise_means: Vec<f64>,
        noise_variances: Vec<f64>,
    ) -> Result<Self> {
        let p = weights.nrows();
        let mut edges = Vec::new();
        for i in 0..p {
            for j in 0..weights.ncols() {
                if weights[(i, j)] != 0.0 {
                    edges.push((i, j));
                }
            }
        }
        let dag = Dag::new(p, &edges, response)?;
        LinearScm::new(dag, weights, intercepts, noise_means, noise_variances)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn num_nodes(&self) -> usize {
        self.dag.num_nodes()
    }

    pub fn response(&self) -> usize {
        self.dag.response()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[(from, to)]
    }

    pub fn intercepts(&self) -> &DVector<f64> {
        &self.intercepts
    }

    pub fn noise_means(&self) -> &DVector<f64> {
        &self.noise_means
    }

    pub fn noise_variances(&self) -> &DVector<f64> {
        &self.noise_variances
    }

    /// The model after intervening on `iv.target`; `self` is left untouched.
    pub fn apply_intervention(&self, iv: &Intervention) -> Result<LinearScm> {
        check_index(iv.target, self.num_nodes())?;
        if iv.target == self.response() {
            return Err(Error::arg("interventions on the response are not allowed"));
        }
        let iv = Intervention::new(iv.target, iv.kind, iv.mean, iv.variance)?;
        let mut out = self.clone();
        let j = iv.target;
        match iv.kind {
            InterventionKind::Do => {
                let edges: Vec<(usize, usize)> =
                    self.dag.edges().into_iter().filter(|&(_, to)| to != j).collect();
                out.dag = Dag::new(self.num_nodes(), &edges, self.response())?;
                out.weights.column_mut(j).fill(0.0);
                out.intercepts[j] = iv.mean;
                out.noise_means[j] = 0.0;
                out.noise_variances[j] = iv.variance;
            }
            InterventionKind::Shift => {
                out.noise_means[j] += iv.mean;
                out.noise_variances[j] += iv.variance;
            }
            InterventionKind::Noise => {
                out.noise_means[j] = iv.mean;
                out.noise_variances[j] = iv.variance;
            }
        }
        Ok(out)
    }

    /// Draws `n` i.i.d. rows; column `j` holds `X_j`. The same seed always
    /// yields the same matrix.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::SampleSize { got: 0, need: 1 });
        }
        let p = self.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = DMatrix::<f64>::zeros(n, p);
        for j in 0..p {
            let sd = self.noise_variances[j].sqrt();
            let loc = self.intercepts[j] + self.noise_means[j];
            for v in data.column_mut(j).iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = loc + sd * z;
            }
        }
        for &j in self.dag.topological_order() {
            for &i in self.dag.parents(j) {
                let w = self.weights[(i, j)];
                let (src, mut dst) = data.columns_range_pair_mut(i, j);
                dst.axpy(w, &src, 1.0);
            }
        }
        Ok(data)
    }

    /// Exact mean and covariance of the joint distribution.
    pub fn population_distribution(&self) -> GaussianDist {
        let p = self.num_nodes();
        let a = DMatrix::<f64>::identity(p, p) - self.weights.transpose();
        let lu = a.lu();
        let loc = &self.intercepts + &self.noise_means;
        let mean = lu.solve(&loc).expect("I - W^T is unit triangular up to permutation");
        let noise = DMatrix::from_diagonal(&self.noise_variances);
        let left = lu.solve(&noise).expect("I - W^T is invertible");
        let mut cov = lu
            .solve(&left.transpose())
            .expect("I - W^T is invertible");
        cov = (&cov + cov.transpose()) * 0.5;
        GaussianDist::from_parts_unchecked(mean, cov)
    }
}
