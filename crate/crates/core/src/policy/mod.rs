//! Intervention-selection policies and the active ICP loop.
//!
//! A policy combines up to three strategies on top of uniform sampling:
//! restrict targets to an estimated Markov blanket of the response (`markov`),
//! stop intervening on targets for which the empty set stays invariant
//! (`e`), and skip targets whose stability ratio is below one half (`r`).

mod run;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::NodeSet;
use crate::scm::{population_ols, GaussianDist};
use crate::stats::lasso_markov_blanket;

pub use run::{run_aicp, run_aicp_population, AicpTrace, FiniteSettings, RoundRecord};

/// Folds used for the cross-validated Lasso behind the Markov strategy.
pub const LASSO_FOLDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolicyConfig {
    pub use_markov: bool,
    pub use_empty_set: bool,
    pub use_ratio: bool,
}

impl PolicyConfig {
    pub const RANDOM: PolicyConfig = PolicyConfig::new(false, false, false);

    /// The random baseline followed by the seven strategy combinations.
    pub const ALL: [PolicyConfig; 8] = [
        PolicyConfig::new(false, false, false),
        PolicyConfig::new(true, false, false),
        PolicyConfig::new(false, true, false),
        PolicyConfig::new(false, false, true),
        PolicyConfig::new(true, true, false),
        PolicyConfig::new(true, false, true),
        PolicyConfig::new(false, true, true),
        PolicyConfig::new(true, true, true),
    ];

    pub const fn new(use_markov: bool, use_empty_set: bool, use_ratio: bool) -> Self {
        PolicyConfig {
            use_markov,
            use_empty_set,
            use_ratio,
        }
    }

    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.use_markov {
            parts.push("markov");
        }
        if self.use_empty_set {
            parts.push("e");
        }
        if self.use_ratio {
            parts.push("r");
        }
        if parts.is_empty() {
            "random".to_string()
        } else {
            parts.join("+")
        }
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PolicyConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyConfig::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown policy '{s}'")))
    }
}

impl Serialize for PolicyConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for PolicyConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What the policy knows about the observational distribution.
#[derive(Clone, Copy, Debug)]
pub enum Observational<'a> {
    /// A finite sample, one column per node.
    Sample(&'a DMatrix<f64>),
    /// The exact joint distribution.
    Population(&'a GaussianDist),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyState {
    /// `None` unless the Markov strategy is active.
    pub markov_blanket: Option<NodeSet>,
    /// Targets discarded by the empty-set strategy.
    pub blacklist: NodeSet,
    /// Predictors with stability ratio 1 over the latest accepted sets.
    pub identified_parents: NodeSet,
    pub last_target: Option<usize>,
    /// Targets intervened on so far.
    pub used: NodeSet,
    predictors: Vec<usize>,
    without_replacement: bool,
}

impl PolicyState {
    pub fn predictors(&self) -> &[usize] {
        &self.predictors
    }
}

fn draw(pool: &[usize], rng: &mut impl Rng) -> usize {
    pool[rng.random_range(0..pool.len())]
}

/// Picks the first target.
///
/// With the Markov strategy the blanket is estimated here, once, and kept for
/// the rest of the run. `without_replacement` is for the population setting,
/// where a variable is never intervened on twice.
pub fn first_intervention(
    cfg: &PolicyConfig,
    obs: Observational<'_>,
    response: usize,
    without_replacement: bool,
    rng: &mut impl Rng,
) -> Result<(usize, PolicyState)> {
    let num_nodes = match obs {
        Observational::Sample(x) => x.ncols(),
        Observational::Population(g) => g.dim(),
    };
    if response >= num_nodes {
        return Err(Error::Index {
            index: response,
            num_nodes,
        });
    }
    let predictors: Vec<usize> = (0..num_nodes).filter(|&j| j != response).collect();
    if predictors.is_empty() {
        return Err(Error::arg("there are no predictors to intervene on"));
    }

    let markov_blanket = if cfg.use_markov {
        Some(match obs {
            Observational::Sample(x) => {
                if x.nrows() == 0 {
                    return Err(Error::SampleSize { got: 0, need: 1 });
                }
                let design = x.select_columns(&predictors);
                let y: DVector<f64> = x.column(response).into_owned();
                let support = lasso_markov_blanket(&design, &y, LASSO_FOLDS, rng.random())?;
                support.into_iter().map(|k| predictors[k]).collect()
            }
            Observational::Population(g) => {
                let all: NodeSet = predictors.iter().copied().collect();
                population_ols(g, response, &all)?.support()
            }
        })
    } else {
        None
    };

    let pool: Vec<usize> = match &markov_blanket {
        Some(mb) if !mb.is_empty() => mb.iter().copied().collect(),
        _ => predictors.clone(),
    };
    let target = draw(&pool, rng);
    let mut state = PolicyState {
        markov_blanket,
        blacklist: NodeSet::new(),
        identified_parents: NodeSet::new(),
        last_target: Some(target),
        used: NodeSet::new(),
        predictors,
        without_replacement,
    };
    state.used.insert(target);
    Ok((target, state))
}

/// Picks the next target given the sets accepted so far, or `None` when
/// nothing is left to intervene on.
///
/// Identified parents are always excluded. If the enabled filters leave
/// nothing, they are relaxed in turn: first the ratio filter, then the Markov
/// blanket, then the blacklist.
pub fn next_intervention(
    cfg: &PolicyConfig,
    state: &mut PolicyState,
    accepted: &[NodeSet],
    rng: &mut impl Rng,
) -> Option<usize> {
    let mut counts = vec![0usize; state.predictors.len() + 1];
    for s in accepted {
        for &v in s {
            if let Ok(k) = state.predictors.binary_search(&v) {
                counts[k] += 1;
            }
        }
    }
    let total = accepted.len();
    state.identified_parents = state
        .predictors
        .iter()
        .enumerate()
        .filter(|&(k, _)| total > 0 && counts[k] == total)
        .map(|(_, &v)| v)
        .collect();

    let base: Vec<(usize, usize)> = state
        .predictors
        .iter()
        .enumerate()
        .filter(|(_, v)| !(state.without_replacement && state.used.contains(v)))
        .filter(|(_, v)| !state.identified_parents.contains(v))
        .map(|(k, &v)| (k, v))
        .collect();

    let ladder = [
        (cfg.use_ratio && total > 0, cfg.use_markov, cfg.use_empty_set),
        (false, cfg.use_markov, cfg.use_empty_set),
        (false, false, cfg.use_empty_set),
        (false, false, false),
    ];
    for (by_ratio, by_blanket, by_blacklist) in ladder {
        let pool: Vec<usize> = base
            .iter()
            .filter(|&&(k, _)| !by_ratio || 2 * counts[k] >= total)
            .filter(|&&(_, v)| {
                !by_blanket || state.markov_blanket.as_ref().is_none_or(|mb| mb.contains(&v))
            })
            .filter(|&&(_, v)| !by_blacklist || !state.blacklist.contains(&v))
            .map(|&(_, v)| v)
            .collect();
        if !pool.is_empty() {
            let target = draw(&pool, rng);
            state.last_target = Some(target);
            state.used.insert(target);
            return Some(target);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{stable_sets, Dag};
    use crate::scm::LinearScm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn state_for(cfg: &PolicyConfig, seed: u64) -> PolicyState {
        let g = collider_scm().population_distribution();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        first_intervention(cfg, Observational::Population(&g), 2, false, &mut rng)
            .unwrap()
            .1
    }

    #[test]
    fn names_round_trip() {
        let names: Vec<String> = PolicyConfig::ALL.iter().map(|p| p.name()).collect();
        assert_eq!(
            names,
            ["random", "markov", "e", "r", "markov+e", "markov+r", "e+r", "markov+e+r"]
        );
        for p in PolicyConfig::ALL {
            assert_eq!(p.name().parse::<PolicyConfig>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(serde_json::from_str::<PolicyConfig>(&json).unwrap(), p);
        }
        assert!("r+e".parse::<PolicyConfig>().is_err());
    }

    #[test]
    fn random_first_target_is_uniform_over_predictors() {
        let g = collider_scm().population_distribution();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 5];
        let reps = 4000;
        for _ in 0..reps {
            let (t, _) =
                first_intervention(&PolicyConfig::RANDOM, Observational::Population(&g), 2, false, &mut rng)
                    .unwrap();
            counts[t] += 1;
        }
        assert_eq!(counts[2], 0);
        for (j, &c) in counts.iter().enumerate().filter(|&(j, _)| j != 2) {
            assert!((c as f64 / reps as f64 - 0.25).abs() < 0.03, "node {j}: {c}");
        }
    }

    #[test]
    fn markov_first_target_in_blanket() {
        let scm = collider_scm();
        let g = scm.population_distribution();
        let cfg: PolicyConfig = "markov".parse().unwrap();
        let graphical = scm.dag().markov_blanket(2).unwrap();
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (t, state) =
                first_intervention(&cfg, Observational::Population(&g), 2, false, &mut rng).unwrap();
            assert_eq!(state.markov_blanket.as_ref(), Some(&graphical));
            assert!(graphical.contains(&t));
        }
    }

    #[test]
    fn markov_from_sample_uses_node_indices() {
        let scm = collider_scm();
        let x = scm.sample(2000, 3).unwrap();
        let cfg: PolicyConfig = "markov".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (t, state) = first_intervention(&cfg, Observational::Sample(&x), 2, false, &mut rng).unwrap();
        let mb = state.markov_blanket.unwrap();
        assert!(!mb.contains(&2));
        assert!(mb.is_superset(&set(&[0, 1, 3])), "{mb:?}");
        assert!(mb.contains(&t));
    }

    #[test]
    fn empty_blanket_falls_back_to_all_predictors() {
        // Y independent of everything: the population blanket is empty
        let scm = LinearScm::from_weights(DMatrix::zeros(4, 4), 0, vec![0.0; 4], vec![0.0; 4], vec![1.0; 4])
            .unwrap();
        let g = scm.population_distribution();
        let cfg: PolicyConfig = "markov".parse().unwrap();
        let mut seen = NodeSet::new();
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (t, state) =
                first_intervention(&cfg, Observational::Population(&g), 0, false, &mut rng).unwrap();
            assert_eq!(state.markov_blanket, Some(NodeSet::new()));
            seen.insert(t);
        }
        assert_eq!(seen, set(&[1, 2, 3]));
    }

    #[test]
    fn ratio_pool_on_collider_scm() {
        let dag = Dag::new(5, &[(0, 2), (1, 2), (2, 3), (4, 3)], 2).unwrap();
        let accepted = stable_sets(&dag, &set(&[0, 4])).unwrap().into_sets();
        let cfg: PolicyConfig = "r".parse().unwrap();
        let mut seen = NodeSet::new();
        for seed in 0..60 {
            let mut state = state_for(&cfg, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seen.insert(next_intervention(&cfg, &mut state, &accepted, &mut rng).unwrap());
            assert_eq!(state.identified_parents, set(&[0]));
        }
        // X0 has ratio 1, X3 has ratio 2/6; X1 (3/6) and X4 (4/6) remain
        assert_eq!(seen, set(&[1, 4]));
    }

    #[test]
    fn random_policy_skips_identified_parents_only() {
        let dag = Dag::new(5, &[(0, 2), (1, 2), (2, 3), (4, 3)], 2).unwrap();
        let accepted = stable_sets(&dag, &set(&[0, 4])).unwrap().into_sets();
        let mut seen = NodeSet::new();
        for seed in 0..60 {
            let mut state = state_for(&PolicyConfig::RANDOM, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seen.insert(next_intervention(&PolicyConfig::RANDOM, &mut state, &accepted, &mut rng).unwrap());
        }
        assert_eq!(seen, set(&[1, 3, 4]));
    }

    #[test]
    fn blacklisted_targets_are_never_drawn() {
        let cfg: PolicyConfig = "e".parse().unwrap();
        let mut state = state_for(&cfg, 0);
        state.blacklist = set(&[0, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let t = next_intervention(&cfg, &mut state, &[], &mut rng).unwrap();
            assert!(t == 1 || t == 4);
        }
    }

    #[test]
    fn fallback_ladder_relaxes_filters_in_order() {
        let cfg: PolicyConfig = "markov+e+r".parse().unwrap();
        let mut state = state_for(&cfg, 0);
        state.markov_blanket = Some(set(&[1]));
        state.blacklist = set(&[1, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // blanket minus blacklist is empty, so the blanket goes; the blacklist stays
        for _ in 0..50 {
            let t = next_intervention(&cfg, &mut state, &[], &mut rng).unwrap();
            assert!(t == 0 || t == 4, "{t}");
        }
        state.blacklist = set(&[0, 1, 3, 4]);
        for _ in 0..20 {
            assert!(next_intervention(&cfg, &mut state, &[], &mut rng).is_some());
        }
    }

    #[test]
    fn stops_when_every_predictor_is_identified() {
        let cfg = PolicyConfig::RANDOM;
        let mut state = state_for(&cfg, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(next_intervention(&cfg, &mut state, &[set(&[0, 1, 3, 4])], &mut rng), None);
    }

    #[test]
    fn without_replacement_exhausts_the_pool() {
        let g = collider_scm().population_distribution();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (first, mut state) =
            first_intervention(&PolicyConfig::RANDOM, Observational::Population(&g), 2, true, &mut rng)
                .unwrap();
        let mut drawn = vec![first];
        while let Some(t) = next_intervention(&PolicyConfig::RANDOM, &mut state, &[], &mut rng) {
            drawn.push(t);
        }
        drawn.sort();
        assert_eq!(drawn, [0, 1, 3, 4]);
    }
}
