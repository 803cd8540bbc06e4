//! Lasso by cyclic coordinate descent on standardized columns, with k-fold
//! cross-validation over a log-spaced regularization path.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeSet;

pub const PATH_LENGTH: usize = 50;
pub const PATH_RATIO: f64 = 1e-3;
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
pub const TOLERANCE: f64 = 1e-6;
const MAX_SWEEPS: usize = 100_000;

/// Path and selection constants, reported alongside results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoSettings {
    pub path_length: usize,
    pub path_ratio: f64,
    pub support_threshold: f64,
    pub tolerance: f64,
}

impl Default for LassoSettings {
    fn default() -> Self {
        LassoSettings {
            path_length: PATH_LENGTH,
            path_ratio: PATH_RATIO,
            support_threshold: SUPPORT_THRESHOLD,
            tolerance: TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    /// In the original units of `x`.
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Objective of the standardized problem after each sweep.
    pub objective_history: Vec<f64>,
}

/// Sufficient statistics of a standardized problem:
/// `(1/2n)|y - X b|^2 + lambda |b|_1` with `gram = X^T X / n`, `xty = X^T y / n`.
struct Standardized {
    means: DVector<f64>,
    scales: DVector<f64>,
    /// Columns with zero spread never enter the model.
    active: Vec<bool>,
    y_mean: f64,
    yy: f64,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
}

impl Standardized {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize]) -> Self {
        let p = x.ncols();
        let n = rows.len() as f64;
        let y_mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
        let mut means = DVector::zeros(p);
        let mut scales = DVector::zeros(p);
        for j in 0..p {
            let m = rows.iter().map(|&r| x[(r, j)]).sum::<f64>() / n;
            let v = rows.iter().map(|&r| (x[(r, j)] - m).powi(2)).sum::<f64>() / n;
            means[j] = m;
            scales[j] = v.sqrt();
        }
        let active: Vec<bool> = scales.iter().map(|&s| s > 0.0).collect();
        let mut z = DMatrix::zeros(rows.len(), p);
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..p {
                if active[j] {
                    z[(i, j)] = (x[(r, j)] - means[j]) / scales[j];
                }
            }
        }
        let yc = DVector::from_iterator(rows.len(), rows.iter().map(|&r| y[r] - y_mean));
        Standardized {
            gram: z.tr_mul(&z) / n,
            xty: z.tr_mul(&yc) / n,
            yy: yc.dot(&yc) / n,
            means,
            scales,
            active,
            y_mean,
        }
    }

    fn lambda_max(&self) -> f64 {
        self.xty.amax()
    }

    fn objective(&self, b: &DVector<f64>, lambda: f64) -> f64 {
        0.5 * self.yy - self.xty.dot(b) + 0.5 * b.dot(&(&self.gram * b)) + lambda * b.lp_norm(1)
    }

    /// Coordinate descent from `b`, in place. Returns the objective per sweep.
    fn descend(&self, b: &mut DVector<f64>, lambda: f64) -> Vec<f64> {
        let p = b.len();
        // gb = gram * b, kept in sync with every coordinate update
        let mut gb = &self.gram * &*b;
        let mut history = Vec::new();
        for _ in 0..MAX_SWEEPS {
            let mut max_change = 0.0f64;
            for j in 0..p {
                if !self.active[j] {
                    continue;
                }
                let old = b[j];
                let rho = self.xty[j] - gb[j] + self.gram[(j, j)] * old;
                let new = soft_threshold(rho, lambda) / self.gram[(j, j)];
                if new != old {
                    let delta = new - old;
                    gb.axpy(delta, &self.gram.column(j), 1.0);
                    b[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            history.push(self.objective(b, lambda));
            if max_change < TOLERANCE {
                break;
            }
        }
        history
    }

    fn to_original(&self, b: &DVector<f64>) -> (DVector<f64>, f64) {
        let mut coef = DVector::zeros(b.len());
        for j in 0..b.len() {
            if self.active[j] {
                coef[j] = b[j] / self.scales[j];
            }
        }
        let intercept = self.y_mean - coef.dot(&self.means);
        (coef, intercept)
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::arg(format!("{} design rows but {} responses", x.nrows(), y.len())));
    }
    Ok(())
}

/// Lasso at a single `lambda` (on the standardized scale).
pub fn lasso_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LassoFit> {
    check_shapes(x, y)?;
    if x.nrows() < 2 {
        return Err(Error::SampleSize { got: x.nrows(), need: 2 });
    }
    if !(lambda >= 0.0) {
        return Err(Error::arg("lambda must be non-negative"));
    }
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let st = Standardized::new(x, y, &rows);
    let mut b = DVector::zeros(x.ncols());
    let objective_history = st.descend(&mut b, lambda);
    let (coefficients, intercept) = st.to_original(&b);
    Ok(LassoFit {
        coefficients,
        intercept,
        lambda,
        objective_history,
    })
}

/// Cross-validated Lasso selection.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoCv {
    /// Decreasing.
    pub lambdas: Vec<f64>,
    /// Mean held-out squared error per lambda, averaged over folds.
    pub cv_errors: Vec<f64>,
    pub best_lambda: f64,
    pub fit: Option<LassoFit>,
    /// Columns of `x` with a coefficient above the support threshold.
    pub support: NodeSet,
}

/// Fits the path on each fold, picks the lambda with the smallest mean CV
/// error (ties go to the larger lambda) and refits on all rows. Fold
/// membership is a seeded shuffle.
pub fn lasso_cv(x: &DMatrix<f64>, y: &DVector<f64>, folds: usize, seed: u64) -> Result<LassoCv> {
    check_shapes(x, y)?;
    let n = x.nrows();
    if folds < 2 || n < folds {
        return Err(Error::arg(format!("need n >= folds >= 2, got n = {n}, folds = {folds}")));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = Standardized::new(x, y, &all);
    let lambda_max = full.lambda_max();
    if full.yy <= 0.0 || lambda_max <= 0.0 {
        return Ok(LassoCv {
            lambdas: Vec::new(),
            cv_errors: Vec::new(),
            best_lambda: lambda_max,
            fit: None,
            support: NodeSet::new(),
        });
    }
    let lambdas: Vec<f64> = (0..PATH_LENGTH)
        .map(|i| lambda_max * PATH_RATIO.powf(i as f64 / (PATH_LENGTH - 1) as f64))
        .collect();

    let mut order = all.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % folds;
    }

    let mut cv_errors = vec![0.0; lambdas.len()];
    for f in 0..folds {
        let train: Vec<usize> = all.iter().copied().filter(|&r| fold_of[r] != f).collect();
        let test: Vec<usize> = all.iter().copied().filter(|&r| fold_of[r] == f).collect();
        let st = Standardized::new(x, y, &train);
        let mut b = DVector::zeros(x.ncols());
        for (li, &lambda) in lambdas.iter().enumerate() {
            st.descend(&mut b, lambda);
            let (coef, intercept) = st.to_original(&b);
            let mse = test
                .iter()
                .map(|&r| {
                    let pred = intercept + x.row(r).transpose().dot(&coef);
                    (y[r] - pred).powi(2)
                })
                .sum::<f64>()
                / test.len() as f64;
            cv_errors[li] += mse / folds as f64;
        }
    }

    let mut best = 0;
    for li in 1..lambdas.len() {
        if cv_errors[li] < cv_errors[best] {
            best = li;
        }
    }
    let best_lambda = lambdas[best];
    let mut b = DVector::zeros(x.ncols());
    // warm start down the path for a stable final solve
    for &lambda in &lambdas[..=best] {
        full.descend(&mut b, lambda);
    }
    let objective_history = full.descend(&mut b, best_lambda);
    let (coefficients, intercept) = full.to_original(&b);
    let support = coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > SUPPORT_THRESHOLD)
        .map(|(j, _)| j)
        .collect();
    Ok(LassoCv {
        lambdas,
        cv_errors,
        best_lambda,
        fit: Some(LassoFit {
            coefficients,
            intercept,
            lambda: best_lambda,
            objective_history,
        }),
        support,
    })
}

/// Column indices of `x` selected by cross-validated Lasso; a Markov blanket
/// estimate when `y` is the response and `x` holds all predictors.
pub fn lasso_markov_blanket(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: usize,
    seed: u64,
) -> Result<NodeSet> {
    Ok(lasso_cv(x, y, folds, seed)?.support)
}
