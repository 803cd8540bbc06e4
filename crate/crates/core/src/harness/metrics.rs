use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::NodeSet;
use crate::policy::AicpTrace;

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counting as a perfect match.
pub fn jaccard(a: &NodeSet, b: &NodeSet) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JaccardPoint {
    pub policy: String,
    pub t: usize,
    pub mean_jaccard: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub runs: usize,
    /// Fraction of runs whose estimate left the true parents at some round.
    pub fwer: f64,
    /// Mean first round with estimate equal to the parents; runs that never
    /// get there count as the censoring value.
    pub mean_recovery: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub t_max: usize,
    pub censor: usize,
    pub jaccard: Vec<JaccardPoint>,
    pub policies: Vec<PolicySummary>,
}

impl MetricsSummary {
    pub fn policy(&self, name: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == name)
    }

    pub fn mean_jaccard(&self, name: &str, t: usize) -> Option<f64> {
        self.jaccard
            .iter()
            .find(|j| j.policy == name && j.t == t)
            .map(|j| j.mean_jaccard)
    }
}

/// Estimates at rounds `1..=t_max`; a run that stopped early keeps its last
/// estimate.
fn estimates_by_round(trace: &AicpTrace, t_max: usize) -> Vec<NodeSet> {
    let mut out = Vec::with_capacity(t_max);
    let mut current = NodeSet::new();
    let mut rounds = trace.rounds.iter().peekable();
    for t in 1..=t_max {
        while let Some(r) = rounds.next_if(|r| r.t <= t) {
            current = r.estimate.clone();
        }
        out.push(current.clone());
    }
    out
}

/// Jaccard curves, family-wise error rates and recovery times per policy.
///
/// All traces must share `T`. Non-recovery is censored at `censor`, which
/// defaults to `T`.
pub fn compute_metrics(traces: &[AicpTrace], censor: Option<usize>) -> Result<MetricsSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::arg("no traces to summarize"))?;
    let t_max = first.t_max;
    if let Some(t) = traces.iter().find(|t| t.t_max != t_max) {
        return Err(Error::arg(format!(
            "traces disagree on T: {} and {}",
            t_max, t.t_max
        )));
    }
    let censor = censor.unwrap_or(t_max);

    #[derive(Default)]
    struct Acc {
        runs: usize,
        errors: usize,
        recovery: usize,
        jaccard: Vec<f64>,
    }
    let mut by_policy: BTreeMap<String, Acc> = BTreeMap::new();
    for trace in traces {
        let acc = by_policy.entry(trace.policy.name()).or_default();
        acc.jaccard.resize(t_max, 0.0);
        let estimates = estimates_by_round(trace, t_max);
        for (t, est) in estimates.iter().enumerate() {
            acc.jaccard[t] += jaccard(est, &trace.true_parents);
        }
        acc.runs += 1;
        acc.errors += trace
            .rounds
            .iter()
            .any(|r| !r.estimate.is_subset(&trace.true_parents)) as usize;
        acc.recovery += trace
            .rounds
            .iter()
            .find(|r| r.estimate == trace.true_parents)
            .map_or(censor, |r| r.t.min(censor));
    }

    let mut jaccard_points = Vec::new();
    let mut policies = Vec::new();
    for (name, acc) in by_policy {
        let n = acc.runs as f64;
        for (t, sum) in acc.jaccard.iter().enumerate() {
            jaccard_points.push(JaccardPoint {
                policy: name.clone(),
                t: t + 1,
                mean_jaccard: sum / n,
            });
        }
        policies.push(PolicySummary {
            policy: name,
            runs: acc.runs,
            fwer: acc.errors as f64 / n,
            mean_recovery: acc.recovery as f64 / n,
        });
    }
    Ok(MetricsSummary {
        t_max,
        censor,
        jaccard: jaccard_points,
        policies,
    })
}

pub fn write_jaccard_csv<W: Write>(m: &MetricsSummary, mut out: W) -> Result<()> {
    writeln!(out, "policy,t,mean_jaccard")?;
    for j in &m.jaccard {
        writeln!(out, "{},{},{}", j.policy, j.t, j.mean_jaccard)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(m: &MetricsSummary, mut out: W) -> Result<()> {
    writeln!(out, "policy,fwer,mean_recovery")?;
    for p in &m.policies {
        writeln!(out, "{},{},{}", p.policy, p.fwer, p.mean_recovery)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{PolicyConfig, RoundRecord};

    fn set(xs: &[usize]) -> NodeSet {
        xs.iter().copied().collect()
    }

    fn trace(policy: &str, t_max: usize, estimates: &[&[usize]], parents: &[usize]) -> AicpTrace {
        AicpTrace {
            scm_id: 0,
            policy: policy.parse::<PolicyConfig>().unwrap(),
            seed: 0,
            t_max,
            alpha: None,
            n_obs: None,
            n_e: None,
            rounds: estimates
                .iter()
                .enumerate()
                .map(|(i, e)| RoundRecord {
                    t: i + 1,
                    target: 0,
                    accepted_count: 1,
                    estimate: set(e),
                    empty_set_p: None,
                })
                .collect(),
            final_estimate: set(estimates.last().copied().unwrap_or(&[])),
            true_parents: set(parents),
        }
    }

    #[test]
    fn jaccard_values() {
        assert_eq!(jaccard(&set(&[0, 1]), &set(&[0, 1])), 1.0);
        assert_eq!(jaccard(&set(&[]), &set(&[0, 1])), 0.0);
        assert_eq!(jaccard(&set(&[0]), &set(&[0, 1])), 0.5);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 1.0);
        assert_eq!(jaccard(&set(&[0, 2]), &set(&[0, 1])), 1.0 / 3.0);
    }

    #[test]
    fn immediate_recovery() {
        let traces: Vec<AicpTrace> = (0..3).map(|_| trace("random", 4, &[&[1, 2]], &[1, 2])).collect();
        let m = compute_metrics(&traces, None).unwrap();
        let s = m.policy("random").unwrap();
        assert_eq!((s.fwer, s.mean_recovery, s.runs), (0.0, 1.0, 3));
        for t in 1..=4 {
            assert_eq!(m.mean_jaccard("random", t), Some(1.0));
        }
    }

    #[test]
    fn false_positive_counts_once() {
        let traces = vec![
            trace("e", 3, &[&[0, 5], &[0, 5], &[0]], &[0]),
            trace("e", 3, &[&[], &[0], &[0]], &[0]),
        ];
        let m = compute_metrics(&traces, None).unwrap();
        let s = m.policy("e").unwrap();
        assert_eq!(s.fwer, 0.5);
        assert_eq!(s.mean_recovery, 2.5);
    }

    #[test]
    fn censoring() {
        let traces = vec![trace("r", 5, &[&[], &[0]], &[0, 1])];
        assert_eq!(compute_metrics(&traces, None).unwrap().policies[0].mean_recovery, 5.0);
        assert_eq!(compute_metrics(&traces, Some(20)).unwrap().policies[0].mean_recovery, 20.0);
        // the curve holds the last estimate after an early stop
        let m = compute_metrics(&traces, None).unwrap();
        assert_eq!(m.mean_jaccard("r", 5), Some(0.5));
    }

    #[test]
    fn input_errors() {
        assert!(compute_metrics(&[], None).is_err());
        let mixed = vec![trace("r", 5, &[&[]], &[0]), trace("r", 6, &[&[]], &[0])];
        assert!(compute_metrics(&mixed, None).is_err());
    }

    #[test]
    fn csv_layout() {
        let traces = vec![trace("random", 2, &[&[0], &[0, 1]], &[0, 1])];
        let m = compute_metrics(&traces, None).unwrap();
        let mut a = Vec::new();
        write_jaccard_csv(&m, &mut a).unwrap();
        assert_eq!(String::from_utf8(a).unwrap(), "policy,t,mean_jaccard\nrandom,1,0.5\nrandom,2,1\n");
        let mut b = Vec::new();
        write_summary_csv(&m, &mut b).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "policy,fwer,mean_recovery\nrandom,0,2\n");
    }
}
