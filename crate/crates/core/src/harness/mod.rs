//! Batch experiments: ensemble generation, parallel runs, trace I/O and
//! summary metrics.

pub mod check;
mod metrics;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::policy::{run_aicp, run_aicp_population, AicpTrace, FiniteSettings, PolicyConfig, LASSO_FOLDS};
use crate::scm::{random_scm, Intervention, InterventionKind, LinearScm, RandomScmConfig, ResponseRule};
use crate::stats::LassoSettings;

pub use metrics::{compute_metrics, jaccard, write_jaccard_csv, write_summary_csv, JaccardPoint, MetricsSummary, PolicySummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact stable sets, no sampling.
    Population,
    Finite,
}

/// Intervention applied at whichever target a policy picks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionTemplate {
    pub kind: InterventionKind,
    pub mean: f64,
    pub variance: f64,
}

impl Default for InterventionTemplate {
    fn default() -> Self {
        InterventionTemplate {
            kind: InterventionKind::Shift,
            mean: 10.0,
            variance: 1.0,
        }
    }
}

fn default_weight_range() -> (f64, f64) {
    (0.5, 1.0)
}

fn default_unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_alpha() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub num_scms: usize,
    pub seeds_per_scm: usize,
    /// Number of nodes including the response.
    pub p: usize,
    pub avg_degree: f64,
    #[serde(default = "default_weight_range")]
    pub weight_range: (f64, f64),
    #[serde(default = "default_unit_range")]
    pub intercept_range: (f64, f64),
    #[serde(default = "default_unit_range")]
    pub variance_range: (f64, f64),
    #[serde(default)]
    pub flip_signs: bool,
    #[serde(default)]
    pub response_rule: ResponseRule,
    /// Interventions per run. Ignored in population mode, where a run lasts at
    /// most one round per predictor.
    #[serde(rename = "T", default)]
    pub t_max: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub n_obs: Option<usize>,
    #[serde(default)]
    pub n_e: Option<usize>,
    #[serde(default)]
    pub intervention: InterventionTemplate,
    pub policies: Vec<PolicyConfig>,
    #[serde(default)]
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn scm_config(&self) -> RandomScmConfig {
        RandomScmConfig {
            num_nodes: self.p,
            avg_degree: self.avg_degree,
            weight_range: self.weight_range,
            intercept_range: self.intercept_range,
            variance_range: self.variance_range,
            flip_signs: self.flip_signs,
            response_rule: self.response_rule,
        }
    }

    /// Settings of a finite-sample run; `None` in population mode.
    pub fn finite_settings(&self) -> Result<Option<FiniteSettings>> {
        if self.mode == Mode::Population {
            return Ok(None);
        }
        let missing = |what: &str| Error::arg(format!("finite mode needs '{what}'"));
        let t = self.intervention;
        let settings = FiniteSettings {
            t_max: self.t_max.ok_or_else(|| missing("T"))?,
            alpha: self.alpha,
            n_obs: self.n_obs.ok_or_else(|| missing("n_obs"))?,
            n_e: self.n_e.ok_or_else(|| missing("n_e"))?,
            intervention: Intervention::new(0, t.kind, t.mean, t.variance)?,
        };
        settings.validate()?;
        Ok(Some(settings))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_scms == 0 || self.seeds_per_scm == 0 {
            return Err(Error::arg("num_scms and seeds_per_scm must be positive"));
        }
        if self.policies.is_empty() {
            return Err(Error::arg("no policies configured"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::arg(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.scm_config().validate()?;
        if self.mode == Mode::Population {
            if let Some(p) = self.policies.iter().find(|p| p.use_empty_set) {
                return Err(Error::arg(format!(
                    "policy '{p}' uses the empty-set strategy, which needs finite samples"
                )));
            }
        }
        self.finite_settings()?;
        Ok(())
    }
}

/// A 64-bit seed from SHA-256 over length-prefixed parts.
pub fn derive_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn scm_seed(master_seed: u64, scm_index: usize) -> u64 {
    derive_seed(&[&master_seed.to_le_bytes(), b"scm", &(scm_index as u64).to_le_bytes()])
}

/// Seed of one run. Depends only on its own coordinates, so adding a policy
/// or an SCM leaves every other run unchanged.
pub fn run_seed(master_seed: u64, scm_index: usize, policy: &PolicyConfig, seed_index: usize) -> u64 {
    derive_seed(&[
        &master_seed.to_le_bytes(),
        &(scm_index as u64).to_le_bytes(),
        policy.name().as_bytes(),
        &(seed_index as u64).to_le_bytes(),
    ])
}

pub fn generate_ensemble(cfg: &ExperimentConfig) -> Result<Vec<LinearScm>> {
    let scm_cfg = cfg.scm_config();
    (0..cfg.num_scms)
        .map(|i| random_scm(&scm_cfg, scm_seed(cfg.master_seed, i)))
        .collect()
}

/// Runs every (SCM, policy, seed) combination on `workers` threads. The
/// result is sorted by SCM index, policy name and seed.
pub fn run_experiment(cfg: &ExperimentConfig, scms: &[LinearScm], workers: usize) -> Result<Vec<AicpTrace>> {
    let settings = cfg.finite_settings()?;
    let mut jobs = Vec::new();
    for scm_index in 0..scms.len() {
        for policy in &cfg.policies {
            for seed_index in 0..cfg.seeds_per_scm {
                jobs.push((scm_index, *policy, run_seed(cfg.master_seed, scm_index, policy, seed_index)));
            }
        }
    }
    let run = |&(scm_index, policy, seed): &(usize, PolicyConfig, u64)| -> Result<AicpTrace> {
        let scm = &scms[scm_index];
        let mut trace = match &settings {
            Some(s) => run_aicp(scm, &policy, s, seed)?,
            None => run_aicp_population(scm, &policy, seed)?,
        };
        trace.scm_id = scm_index;
        Ok(trace)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))?;
    let mut traces = pool.install(|| jobs.par_iter().map(run).collect::<Result<Vec<_>>>())?;
    traces.sort_by(|a, b| {
        (a.scm_id, a.policy.name(), a.seed).cmp(&(b.scm_id, b.policy.name(), b.seed))
    });
    Ok(traces)
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_traces(path: &Path) -> Result<Vec<AicpTrace>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut traces = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            traces.push(serde_json::from_str(&line)?);
        }
    }
    Ok(traces)
}

pub fn write_ensemble(scms: &[LinearScm], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, scms)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_ensemble(path: &Path) -> Result<Vec<LinearScm>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Choices the traces depend on that are not part of the configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub crate_version: &'static str,
    pub lasso: LassoSettings,
    pub lasso_folds: usize,
    /// Level of every per-round ICP call.
    pub icp_level_per_round: Option<f64>,
    /// The empty-set side test runs at the same level as ICP, so policies
    /// using it spend up to twice `alpha` in total.
    pub empty_set_test_level: Option<f64>,
    pub identified_parents_excluded_for: &'static str,
    pub finite_targets_with_replacement: bool,
}

impl RunMetadata {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let level = cfg.t_max.filter(|_| cfg.mode == Mode::Finite).map(|t| cfg.alpha / t as f64);
        RunMetadata {
            config: cfg.clone(),
            crate_version: env!("CARGO_PKG_VERSION"),
            lasso: LassoSettings::default(),
            lasso_folds: LASSO_FOLDS,
            icp_level_per_round: level,
            empty_set_test_level: level.filter(|_| cfg.policies.iter().any(|p| p.use_empty_set)),
            identified_parents_excluded_for: "all policies, including random",
            finite_targets_with_replacement: true,
        }
    }
}
