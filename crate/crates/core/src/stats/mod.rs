//! Finite-sample statistics: least squares, two-sample tests, the invariance
//! test behind ICP and cross-validated Lasso.

mod hypothesis;
mod invariance;
pub mod lasso;
mod ols;
mod special;

pub use hypothesis::{f_test_variance, welch_t_test, Summary};
pub use invariance::{test_invariance, test_invariance_between, InvarianceTestResult};
pub use lasso::{lasso_cv, lasso_fit, lasso_markov_blanket, LassoCv, LassoFit, LassoSettings};
pub use ols::{ols_fit, RegressionFit};
