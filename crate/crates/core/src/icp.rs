//! Invariant causal prediction over an explicit list of candidate sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical_sort, intersection, NodeSet, MAX_ENUMERATED_PREDICTORS};
use crate::scm::EnvironmentSet;
use crate::stats::test_invariance;

/// Which sets to test.
#[derive(Clone, Debug, PartialEq)]
pub enum Candidates {
    /// Every subset of the predictors.
    All,
    Sets(Vec<NodeSet>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcpState {
    /// Canonical order: by size, then lexicographic.
    pub accepted: Vec<NodeSet>,
    /// Intersection of the accepted sets.
    pub estimate: NodeSet,
    /// Set when no candidate survived; the estimate is then empty.
    pub all_rejected: bool,
    /// Keyed by the set written as `{a,b,...}`.
    pub p_values: BTreeMap<String, f64>,
    #[serde(skip)]
    pub alpha_per_round: f64,
}

impl IcpState {
    pub fn p_value(&self, s: &NodeSet) -> Option<f64> {
        self.p_values.get(&set_key(s)).copied()
    }
}

pub fn set_key(s: &NodeSet) -> String {
    let inner: Vec<String> = s.iter().map(usize::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

/// All subsets of `predictors` in canonical order.
pub fn all_subsets(predictors: &[usize]) -> Result<Vec<NodeSet>> {
    if predictors.len() > MAX_ENUMERATED_PREDICTORS {
        return Err(Error::Capacity {
            count: predictors.len(),
            cap: MAX_ENUMERATED_PREDICTORS,
        });
    }
    let mut sets: Vec<NodeSet> = (0u32..(1u32 << predictors.len()))
        .map(|mask| {
            predictors
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect();
    canonical_sort(&mut sets);
    Ok(sets)
}

/// Tests `H_0,S` for every candidate and accepts those with p-value above
/// `alpha`. The estimate is the intersection of the accepted sets.
pub fn run_icp(envs: &EnvironmentSet, candidates: &Candidates, alpha: f64) -> Result<IcpState> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if envs.len() < 2 {
        return Err(Error::arg("ICP needs at least two environments"));
    }
    let owned;
    let sets: &[NodeSet] = match candidates {
        Candidates::All => {
            let predictors: Vec<usize> = (0..envs.num_columns())
                .filter(|&j| j != envs.response())
                .collect();
            owned = all_subsets(&predictors)?;
            &owned
        }
        Candidates::Sets(s) => s,
    };

    let mut accepted = Vec::new();
    let mut p_values = BTreeMap::new();
    for s in sets {
        let res = test_invariance(envs, s)?;
        if res.p_value > alpha {
            accepted.push(s.clone());
        }
        p_values.insert(set_key(s), res.p_value);
    }
    canonical_sort(&mut accepted);
    let all_rejected = accepted.is_empty();
    Ok(IcpState {
        estimate: intersection(&accepted),
        accepted,
        all_rejected,
        p_values,
        alpha_per_round: alpha,
    })
}
