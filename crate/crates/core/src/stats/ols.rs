use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares fit of `y` on the columns of `x` plus an intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionFit {
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub residuals: DVector<f64>,
}

/// Ordinary least squares with an intercept. Rank-deficient designs get the
/// minimum-norm coefficient vector.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<RegressionFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::arg(format!("{n} design rows but {} responses", y.len())));
    }
    if n < k + 2 {
        return Err(Error::SampleSize { got: n, need: k + 2 });
    }
    let y_mean = y.mean();
    let yc = y.add_scalar(-y_mean);
    if k == 0 {
        return Ok(RegressionFit {
            coefficients: DVector::zeros(0),
            intercept: y_mean,
            residuals: yc,
        });
    }
    let col_means: DVector<f64> = DVector::from_iterator(k, x.column_iter().map(|c| c.mean()));
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-col_means[j]);
    }
    let svd = xc.clone().svd(true, true);
    let top = svd.singular_values.max();
    let eps = top * (n.max(k) as f64) * f64::EPSILON;
    let coefficients = svd
        .solve(&yc, eps)
        .map_err(|e| Error::Numeric(format!("least squares failed: {e}")))?;
    let intercept = y_mean - coefficients.dot(&col_means);
    let residuals = yc - xc * &coefficients;
    Ok(RegressionFit {
        coefficients,
        intercept,
        residuals,
    })
}
