use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{first_intervention, next_intervention, Observational, PolicyConfig};
use crate::error::{Error, Result};
use crate::graph::{stable_sets, stable_sets_among, NodeSet};
use crate::icp::{run_icp, Candidates};
use crate::scm::{EnvironmentSet, Intervention, LinearScm};
use crate::stats::test_invariance_between;

/// Parameters of a finite-sample run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSettings {
    /// Number of interventions.
    #[serde(rename = "T")]
    pub t_max: usize,
    /// Overall level; each round tests at `alpha / T`.
    pub alpha: f64,
    pub n_obs: usize,
    pub n_e: usize,
    /// Moved to the chosen target each round.
    pub intervention: Intervention,
}

impl FiniteSettings {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::arg("T must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::arg(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_obs < 2 || self.n_e < 2 {
            return Err(Error::SampleSize {
                got: self.n_obs.min(self.n_e),
                need: 2,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub target: usize,
    pub accepted_count: usize,
    pub estimate: NodeSet,
    /// p-value of the empty set between the observational and the newest
    /// environment, when the empty-set strategy is active.
    pub empty_set_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AicpTrace {
    pub scm_id: usize,
    pub policy: PolicyConfig,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t_max: usize,
    /// `None` in the population setting, where nothing is tested.
    pub alpha: Option<f64>,
    pub n_obs: Option<usize>,
    pub n_e: Option<usize>,
    pub rounds: Vec<RoundRecord>,
    pub final_estimate: NodeSet,
    pub true_parents: NodeSet,
}

/// Active ICP on finite samples drawn from `scm`.
///
/// Each round draws `n_e` rows under the intervention chosen by the policy and
/// reruns ICP at level `alpha / T`, testing only the sets accepted in the
/// previous round.
pub fn run_aicp(scm: &LinearScm, cfg: &PolicyConfig, settings: &FiniteSettings, seed: u64) -> Result<AicpTrace> {
    settings.validate()?;
    let response = scm.response();
    let level = settings.alpha / settings.t_max as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let obs = scm.sample(settings.n_obs, rng.random())?;
    let (first, mut state) =
        first_intervention(cfg, Observational::Sample(&obs), response, false, &mut rng)?;
    let mut envs = EnvironmentSet::observational(obs, response)?;

    let mut rounds = Vec::with_capacity(settings.t_max);
    let mut candidates = Candidates::All;
    let mut estimate = NodeSet::new();
    let mut next = Some(first);
    for t in 1..=settings.t_max {
        let Some(target) = next else { break };
        let iv = settings.intervention.at(target);
        let data = scm.apply_intervention(&iv)?.sample(settings.n_e, rng.random())?;
        envs.push(data, Some(iv))?;

        let icp = run_icp(&envs, &candidates, level)?;
        let empty_set_p = if cfg.use_empty_set {
            let newest = envs.len() - 1;
            let p = test_invariance_between(&envs, &[0, newest], &NodeSet::new())?.p_value;
            if p > level {
                state.blacklist.insert(target);
            }
            Some(p)
        } else {
            None
        };
        estimate = icp.estimate.clone();
        rounds.push(RoundRecord {
            t,
            target,
            accepted_count: icp.accepted.len(),
            estimate: icp.estimate,
            empty_set_p,
        });
        if t < settings.t_max {
            next = next_intervention(cfg, &mut state, &icp.accepted, &mut rng);
        }
        candidates = Candidates::Sets(icp.accepted);
    }

    Ok(AicpTrace {
        scm_id: 0,
        policy: *cfg,
        seed,
        t_max: settings.t_max,
        alpha: Some(settings.alpha),
        n_obs: Some(settings.n_obs),
        n_e: Some(settings.n_e),
        rounds,
        final_estimate: estimate,
        true_parents: scm.dag().parents(response).iter().copied().collect(),
    })
}

/// Active ICP with exact knowledge of which sets are stable.
///
/// Targets are drawn without replacement; the run ends once the estimate
/// equals the parents of the response or every predictor has been used.
pub fn run_aicp_population(scm: &LinearScm, cfg: &PolicyConfig, seed: u64) -> Result<AicpTrace> {
    if cfg.use_empty_set {
        return Err(Error::arg(
            "the empty-set strategy does not apply in the population setting",
        ));
    }
    let dag = scm.dag();
    let response = scm.response();
    let parents: NodeSet = dag.parents(response).iter().copied().collect();
    let t_max = dag.num_predictors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let g = scm.population_distribution();
    let (first, mut state) =
        first_intervention(cfg, Observational::Population(&g), response, true, &mut rng)?;

    let mut targets = NodeSet::new();
    let mut accepted: Vec<NodeSet> = Vec::new();
    let mut estimate = NodeSet::new();
    let mut rounds = Vec::new();
    let mut next = Some(first);
    for t in 1..=t_max {
        let Some(target) = next else { break };
        targets.insert(target);
        let coll = if t == 1 {
            stable_sets(dag, &targets)?
        } else {
            stable_sets_among(dag, &targets, &accepted)?
        };
        estimate = coll.intersection();
        accepted = coll.into_sets();
        rounds.push(RoundRecord {
            t,
            target,
            accepted_count: accepted.len(),
            estimate: estimate.clone(),
            empty_set_p: None,
        });
        if estimate == parents {
            break;
        }
        next = next_intervention(cfg, &mut state, &accepted, &mut rng);
    }

    Ok(AicpTrace {
        scm_id: 0,
        policy: *cfg,
        seed,
        t_max,
        alpha: None,
        n_obs: None,
        n_e: None,
        rounds,
        final_estimate: estimate,
        true_parents: parents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Relation;
    use crate::scm::{random_scm, RandomScmConfig};
    use nalgebra::DMatrix;

    fn set(xs: &[usize]) -> NodeSet {
        xs.iter().copied().collect()
    }

    fn collider_scm() -> LinearScm {
        let mut w = DMatrix::zeros(5, 5);
        w[(0, 2)] = 0.8;
        w[(1, 2)] = 0.6;
        w[(2, 3)] = 0.9;
        w[(4, 3)] = 0.7;
        LinearScm::from_weights(w, 2, vec![0.0; 5], vec![0.0; 5], vec![1.0; 5]).unwrap()
    }

    fn settings(t_max: usize, n: usize) -> FiniteSettings {
        FiniteSettings {
            t_max,
            alpha: 0.01,
            n_obs: n,
            n_e: n,
            intervention: Intervention::shift(0, 10.0, 1.0).unwrap(),
        }
    }

    #[test]
    fn population_intervened_parents_enter_the_estimate() {
        let scm = collider_scm();
        for cfg in ["random", "markov", "r", "markov+r"] {
            let cfg: PolicyConfig = cfg.parse().unwrap();
            for seed in 0..20 {
                let trace = run_aicp_population(&scm, &cfg, seed).unwrap();
                let mut used = NodeSet::new();
                for r in &trace.rounds {
                    used.insert(r.target);
                    let hit: NodeSet = used.intersection(&set(&[0, 1])).copied().collect();
                    assert!(r.estimate.is_superset(&hit), "{cfg} {seed}: {:?}", trace.rounds);
                }
                assert_eq!(trace.final_estimate, set(&[0, 1]));
                assert_eq!(trace.t_max, 4);
                assert!(trace.rounds.len() <= 4);
            }
        }
    }

    #[test]
    fn population_rejects_empty_set_strategy() {
        let cfg: PolicyConfig = "e".parse().unwrap();
        assert!(matches!(
            run_aicp_population(&collider_scm(), &cfg, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn population_recovers_parents_on_random_scms() {
        let rc = RandomScmConfig {
            num_nodes: 8,
            ..RandomScmConfig::default()
        };
        for i in 0..30 {
            let scm = random_scm(&rc, i).unwrap();
            let trace = run_aicp_population(&scm, &PolicyConfig::RANDOM, i).unwrap();
            assert_eq!(trace.final_estimate, trace.true_parents);
            // estimates only grow: stable sets shrink as targets are added
            for w in trace.rounds.windows(2) {
                assert!(w[1].estimate.is_superset(&w[0].estimate));
                assert!(w[1].accepted_count <= w[0].accepted_count);
            }
        }
    }

    #[test]
    fn markov_and_markov_ratio_agree_when_blanket_is_parents() {
        // Y = 3 with parents 0, 1, 2 and no children: MB(Y) = PA(Y)
        let mut w = DMatrix::zeros(5, 5);
        w[(0, 3)] = 0.7;
        w[(1, 3)] = 0.8;
        w[(2, 3)] = 0.9;
        w[(4, 0)] = 0.6;
        let scm = LinearScm::from_weights(w, 3, vec![0.0; 5], vec![0.0; 5], vec![1.0; 5]).unwrap();
        assert_eq!(scm.dag().markov_blanket(3).unwrap(), set(&[0, 1, 2]));
        let markov: PolicyConfig = "markov".parse().unwrap();
        let markov_r: PolicyConfig = "markov+r".parse().unwrap();
        for seed in 0..20 {
            let a = run_aicp_population(&scm, &markov, seed).unwrap();
            let b = run_aicp_population(&scm, &markov_r, seed).unwrap();
            assert_eq!(a.rounds, b.rounds);
        }
    }

    #[test]
    fn single_round_is_one_icp_call() {
        let scm = collider_scm();
        let trace = run_aicp(&scm, &PolicyConfig::RANDOM, &settings(1, 200), 4).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.rounds[0].t, 1);
        assert_eq!(trace.final_estimate, trace.rounds[0].estimate);
    }

    #[test]
    fn finite_run_is_deterministic() {
        let scm = collider_scm();
        let cfg: PolicyConfig = "markov+e+r".parse().unwrap();
        let a = run_aicp(&scm, &cfg, &settings(8, 300), 11).unwrap();
        let b = run_aicp(&scm, &cfg, &settings(8, 300), 11).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = run_aicp(&scm, &cfg, &settings(8, 300), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn finite_accepted_counts_never_grow() {
        let scm = collider_scm();
        for cfg in PolicyConfig::ALL {
            let trace = run_aicp(&scm, &cfg, &settings(10, 500), 3).unwrap();
            assert_eq!(trace.rounds.len(), 10);
            for w in trace.rounds.windows(2) {
                assert!(w[1].accepted_count <= w[0].accepted_count);
            }
            assert_eq!(trace.rounds[0].empty_set_p.is_some(), cfg.use_empty_set);
        }
    }

    #[test]
    fn empty_set_strategy_blacklists_non_ancestors() {
        // shifting X3 or X4 leaves Y untouched, so the empty set stays invariant
        let scm = collider_scm();
        let cfg: PolicyConfig = "e".parse().unwrap();
        let ancestors = scm.dag().relatives(2, Relation::Ancestors).unwrap();
        let trace = run_aicp(&scm, &cfg, &settings(30, 500), 8).unwrap();
        let mut blacklisted = NodeSet::new();
        for r in &trace.rounds {
            let p = r.empty_set_p.unwrap();
            if p > 0.01 / 30.0 {
                blacklisted.insert(r.target);
            }
        }
        assert!(blacklisted.is_disjoint(&ancestors), "{blacklisted:?}");
    }

    #[test]
    fn finite_recovers_parents_with_strong_shifts() {
        let scm = collider_scm();
        let cfg: PolicyConfig = "e".parse().unwrap();
        let mut hits = 0;
        for seed in 0..10 {
            let trace = run_aicp(&scm, &cfg, &settings(10, 1000), seed).unwrap();
            assert!(trace.final_estimate.is_subset(&set(&[0, 1])));
            hits += (trace.final_estimate == set(&[0, 1])) as usize;
        }
        assert!(hits >= 8, "{hits}/10");
    }

    #[test]
    fn rejects_bad_settings() {
        let scm = collider_scm();
        let mut s = settings(0, 100);
        assert!(run_aicp(&scm, &PolicyConfig::RANDOM, &s, 0).is_err());
        s.t_max = 2;
        s.alpha = 1.5;
        assert!(run_aicp(&scm, &PolicyConfig::RANDOM, &s, 0).is_err());
    }

    #[test]
    fn trace_json_fields() {
        let scm = collider_scm();
        let trace = run_aicp(&scm, &PolicyConfig::RANDOM, &settings(2, 100), 0).unwrap();
        let v = serde_json::to_value(&trace).unwrap();
        for key in ["scm_id", "policy", "seed", "T", "alpha", "n_obs", "n_e", "rounds", "final_estimate", "true_parents"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["policy"], "random");
        assert_eq!(v["true_parents"], serde_json::json!([0, 1]));
        let back: AicpTrace = serde_json::from_value(v).unwrap();
        assert_eq!(back, trace);
    }
}
