//! Self-checks run by the `check` subcommand: graph properties of stable sets
//! on random DAGs, and the null size of the statistical tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::graph::{stable_sets, NodeSet, Relation};
use crate::scm::{random_scm, EnvironmentSet, RandomScmConfig};
use crate::stats::{f_test_variance, test_invariance, welch_t_test};

pub const PROPERTIES: [&str; 5] = [
    "intervened_parents_in_every_stable_set",
    "no_stable_set_meets_descendants_of_intervened_children",
    "empty_set_stable_iff_no_ancestor_targeted",
    "ancestor_ratio_at_least_half",
    "stable_sets_closed_under_adding_ancestors",
];

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub graphs: usize,
    /// Violations per property; all zero on success.
    pub violations: BTreeMap<String, usize>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations.values().all(|&v| v == 0)
    }
}

/// Checks the stable-set properties on `graphs` random DAGs with 2 to
/// `max_nodes` nodes and random target sets.
pub fn stable_set_properties(graphs: usize, max_nodes: usize, seed: u64) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations: BTreeMap<String, usize> =
        PROPERTIES.iter().map(|p| (p.to_string(), 0)).collect();
    let mut bump = |k: usize| *violations.get_mut(PROPERTIES[k]).expect("known property") += 1;

    for _ in 0..graphs {
        let num_nodes = rng.random_range(2..=max_nodes.max(2));
        let cfg = RandomScmConfig {
            num_nodes,
            avg_degree: rng.random_range(0.0..(num_nodes - 1) as f64).min(4.0),
            ..RandomScmConfig::default()
        };
        let scm = random_scm(&cfg, rng.random())?;
        let dag = scm.dag();
        let y = dag.response();
        let targets: NodeSet = dag
            .predictors()
            .into_iter()
            .filter(|_| rng.random_bool(0.35))
            .collect();
        let coll = stable_sets(dag, &targets)?;
        let parents: NodeSet = dag.parents(y).iter().copied().collect();
        let ancestors = dag.relatives(y, Relation::Ancestors)?;

        for &i in targets.intersection(&parents) {
            if coll.sets().iter().any(|s| !s.contains(&i)) {
                bump(0);
            }
        }
        for &c in targets.iter().filter(|&&c| dag.has_edge(y, c)) {
            let de = dag.relatives(c, Relation::Descendants)?;
            if coll.sets().iter().any(|s| !s.is_disjoint(&de)) {
                bump(1);
            }
        }
        if coll.contains(&NodeSet::new()) != targets.is_disjoint(&ancestors) {
            bump(2);
        }
        for &j in &ancestors {
            if 2.0 * coll.stability_ratio(j)? < 1.0 {
                bump(3);
            }
        }
        for s in coll.sets() {
            for &j in ancestors.difference(s) {
                let mut bigger = s.clone();
                bigger.insert(j);
                if !coll.contains(&bigger) {
                    bump(4);
                }
            }
        }
    }
    Ok(PropertyReport { graphs, violations })
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub replicates: usize,
    pub level: f64,
    pub t_test_size: f64,
    pub f_test_size: f64,
    pub invariance_size: f64,
}

impl CalibrationReport {
    /// Two-sample tests within `[0.035, 0.065]`, the invariance test at most
    /// 0.08, at level 0.05.
    pub fn passed(&self) -> bool {
        let ok = |r: f64| (0.035..=0.065).contains(&r);
        ok(self.t_test_size) && ok(self.f_test_size) && self.invariance_size <= 0.08
    }
}

/// Rejection rates at level 0.05 under the null.
///
/// The two-sample tests see two N(0, 1) samples of 100. The invariance test
/// sees two halves of one observational sample of 400 from a random 8-node
/// SCM and is given the parents of the response.
pub fn calibration(replicates: usize, seed: u64) -> Result<CalibrationReport> {
    let level = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut t_rej, mut f_rej, mut inv_rej) = (0usize, 0usize, 0usize);
    let scm_cfg = RandomScmConfig {
        num_nodes: 8,
        ..RandomScmConfig::default()
    };
    for _ in 0..replicates {
        let a: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        t_rej += (welch_t_test(&a, &b)? < level) as usize;
        f_rej += (f_test_variance(&a, &b)? < level) as usize;

        let scm = random_scm(&scm_cfg, rng.random())?;
        let data = scm.sample(400, rng.random())?;
        let y = scm.response();
        let mut envs = EnvironmentSet::observational(data.rows(0, 200).into_owned(), y)?;
        envs.push(data.rows(200, 200).into_owned(), None)?;
        let parents: NodeSet = scm.dag().parents(y).iter().copied().collect();
        inv_rej += (test_invariance(&envs, &parents)?.p_value < level) as usize;
    }
    let r = replicates as f64;
    Ok(CalibrationReport {
        replicates,
        level,
        t_test_size: t_rej as f64 / r,
        f_test_size: f_rej as f64 / r,
        invariance_size: inv_rej as f64 / r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_property_run_is_clean() {
        let report = stable_set_properties(60, 7, 1).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.violations.len(), PROPERTIES.len());
    }

    #[test]
    fn calibration_is_deterministic() {
        let a = calibration(50, 3).unwrap();
        let b = calibration(50, 3).unwrap();
        assert_eq!(a.t_test_size, b.t_test_size);
        assert_eq!(a.invariance_size, b.invariance_size);
    }
}
