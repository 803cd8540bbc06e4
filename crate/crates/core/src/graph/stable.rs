use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_index, Dag, NodeSet, Reachability};
use crate::error::{Error, Result};

/// Subsets of at most this many predictors are enumerated.
pub const MAX_ENUMERATED_PREDICTORS: usize = 20;

/// The predictor sets that are intervention stable under a set of targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableSetCollection {
    sets: Vec<NodeSet>,
    targets: NodeSet,
}

impl StableSetCollection {
    pub fn sets(&self) -> &[NodeSet] {
        &self.sets
    }

    pub fn into_sets(self) -> Vec<NodeSet> {
        self.sets
    }

    pub fn targets(&self) -> &NodeSet {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn contains(&self, s: &NodeSet) -> bool {
        self.sets
            .binary_search_by(|probe| canonical_cmp(probe, s))
            .is_ok()
    }

    pub fn intersection(&self) -> NodeSet {
        intersection(&self.sets)
    }

    pub fn stability_ratio(&self, node: usize) -> Result<f64> {
        stability_ratio(&self.sets, node)
    }
}

/// Size first, then lexicographic.
fn canonical_cmp(a: &NodeSet, b: &NodeSet) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Sorts into canonical order and drops duplicates.
pub fn canonical_sort(sets: &mut Vec<NodeSet>) {
    sets.sort_by(canonical_cmp);
    sets.dedup();
}

/// Intersection of all sets; empty for an empty list.
pub fn intersection(sets: &[NodeSet]) -> NodeSet {
    let Some((first, rest)) = sets.split_first() else {
        return NodeSet::new();
    };
    let mut acc = first.clone();
    for s in rest {
        acc.retain(|v| s.contains(v));
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// Fraction of `sets` that contain `node`.
pub fn stability_ratio(sets: &[NodeSet], node: usize) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::UndefinedRatio);
    }
    let hits = sets.iter().filter(|s| s.contains(&node)).count();
    Ok(hits as f64 / sets.len() as f64)
}

/// All subsets `S` of the predictors for which every intervention source is
/// d-separated from the response given `X_S`.
pub fn stable_sets(dag: &Dag, targets: &NodeSet) -> Result<StableSetCollection> {
    let predictors = dag.predictors();
    if predictors.len() > MAX_ENUMERATED_PREDICTORS {
        return Err(Error::Capacity {
            count: predictors.len(),
            cap: MAX_ENUMERATED_PREDICTORS,
        });
    }
    let mut checker = StabilityChecker::new(dag, targets)?;
    let mut sets = Vec::new();
    for mask in 0u32..(1u32 << predictors.len()) {
        let s: NodeSet = predictors
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        if checker.is_stable(&s) {
            sets.push(s);
        }
    }
    canonical_sort(&mut sets);
    Ok(StableSetCollection {
        sets,
        targets: targets.clone(),
    })
}

/// The members of `candidates` that are stable under `targets`.
///
/// Stable sets only shrink as targets are added, so the stable sets under a
/// subset of `targets` are a complete candidate list.
pub fn stable_sets_among(
    dag: &Dag,
    targets: &NodeSet,
    candidates: &[NodeSet],
) -> Result<StableSetCollection> {
    let response = dag.response();
    for s in candidates {
        for &v in s {
            check_index(v, dag.num_nodes())?;
        }
        if s.contains(&response) {
            return Err(Error::arg("candidate set contains the response"));
        }
    }
    let mut checker = StabilityChecker::new(dag, targets)?;
    let mut sets: Vec<NodeSet> = candidates
        .iter()
        .filter(|s| checker.is_stable(s))
        .cloned()
        .collect();
    canonical_sort(&mut sets);
    Ok(StableSetCollection {
        sets,
        targets: targets.clone(),
    })
}

/// The DAG augmented with one source node per intervention target.
struct StabilityChecker {
    adj: super::Adjacency,
    response: usize,
    first_source: usize,
    given: Vec<bool>,
    reach: Reachability,
}

impl StabilityChecker {
    fn new(dag: &Dag, targets: &NodeSet) -> Result<Self> {
        let n = dag.num_nodes();
        for &t in targets {
            check_index(t, n)?;
            if t == dag.response() {
                return Err(Error::arg("interventions on the response are not allowed"));
            }
        }
        let mut adj = dag.adjacency().clone();
        for &t in targets {
            let source = adj.len();
            adj.parents.push(Vec::new());
            adj.children.push(Vec::new());
            adj.add_edge(source, t);
        }
        let total = adj.len();
        Ok(StabilityChecker {
            adj,
            response: dag.response(),
            first_source: n,
            given: vec![false; total],
            reach: Reachability::new(total),
        })
    }

    fn is_stable(&mut self, s: &NodeSet) -> bool {
        if self.first_source == self.adj.len() {
            return true;
        }
        for &v in s {
            self.given[v] = true;
        }
        let reached = self.reach.run(&self.adj, &[self.response], &self.given);
        let stable = !reached[self.first_source..].iter().any(|&r| r);
        for &v in s {
            self.given[v] = false;
        }
        stable
    }
}
