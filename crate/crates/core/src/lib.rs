//! Active invariant causal prediction.
//!
//! The crate simulates linear-Gaussian structural causal models under
//! single-variable interventions, tests invariance of the conditional
//! distribution of a response across environments (ICP), and runs active
//! intervention-selection policies that try to recover the direct causes of
//! the response with as few experiments as possible.
//!
//! Module map:
//!
//! - [`graph`]: DAGs, d-separation, intervention stable sets, stability ratios.
//! - [`scm`]: linear SCMs, interventions, sampling, exact Gaussian moments,
//!   random model generation, environment collections.
//! - [`stats`]: OLS, Welch and F tests, the invariance test, cross-validated Lasso.
//! - [`icp`]: invariant causal prediction over candidate sets.
//! - [`policy`]: intervention-selection strategies and the active loop.
//! - [`harness`]: experiment configs, batch execution, metrics, property checks.

pub mod error;
pub mod graph;
pub mod harness;
pub mod icp;
pub mod policy;
pub mod scm;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Dag, NodeSet, StableSetCollection};
pub use icp::{run_icp, Candidates, IcpState};
pub use policy::{run_aicp, run_aicp_population, AicpTrace, FiniteSettings, PolicyConfig};
pub use scm::{EnvironmentSet, GaussianDist, Intervention, InterventionKind, LinearScm};
