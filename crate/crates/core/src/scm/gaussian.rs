use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::SUPPORT_TOLERANCE;
use crate::error::{Error, Result};
use crate::graph::NodeSet;

const SYMMETRY_TOLERANCE: f64 = 1e-9;
const PSD_TOLERANCE: f64 = 1e-9;
/// Added to the diagonal of a singular conditioning block before giving up.
const RIDGE: f64 = 1e-10;

/// A multivariate Gaussian described by its first two moments.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDist {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::arg(format!(
                "covariance must be {d}x{d}, got {:?}",
                covariance.shape()
            )));
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if d > 0 && asym > SYMMETRY_TOLERANCE {
            return Err(Error::arg(format!("covariance is not symmetric (max gap {asym})")));
        }
        if d > 0 {
            let eig = covariance.clone().symmetric_eigen();
            let min = eig.eigenvalues.min();
            if min < -PSD_TOLERANCE {
                return Err(Error::arg(format!(
                    "covariance is not positive semi-definite (eigenvalue {min})"
                )));
            }
        }
        Ok(GaussianDist { mean, covariance })
    }

    pub(crate) fn from_parts_unchecked(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        GaussianDist { mean, covariance }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// The marginal over `indices`, in the order given.
    pub fn marginal(&self, indices: &[usize]) -> Result<GaussianDist> {
        for &i in indices {
            crate::graph::check_index(i, self.dim())?;
        }
        Ok(GaussianDist {
            mean: self.mean.select_rows(indices),
            covariance: self.covariance.select_rows(indices).select_columns(indices),
        })
    }

    /// Conditions on `X_given = values`. The result is over the remaining
    /// coordinates in ascending index order.
    pub fn condition(&self, given: &[usize], values: &[f64]) -> Result<GaussianDist> {
        if given.len() != values.len() {
            return Err(Error::arg("one value is needed per conditioning index"));
        }
        let mut seen = vec![false; self.dim()];
        for &i in given {
            crate::graph::check_index(i, self.dim())?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::arg(format!("index {i} given twice")));
            }
        }
        if given.is_empty() {
            return Ok(self.clone());
        }
        let rest: Vec<usize> = (0..self.dim()).filter(|&i| !seen[i]).collect();
        let s_rg = self.covariance.select_rows(&rest).select_columns(given);
        let s_gg = self.covariance.select_rows(given).select_columns(given);
        let s_rr = self.covariance.select_rows(&rest).select_columns(&rest);
        let chol = cholesky_with_ridge(s_gg)?;
        let delta = DVector::from_column_slice(values) - self.mean.select_rows(given);
        let mean = self.mean.select_rows(&rest) + &s_rg * chol.solve(&delta);
        let gain = chol.solve(&s_rg.transpose());
        let mut cov = s_rr - &s_rg * gain;
        cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianDist {
            mean,
            covariance: cov,
        })
    }
}

pub fn gaussian_condition(g: &GaussianDist, given: &[usize], values: &[f64]) -> Result<GaussianDist> {
    g.condition(given, values)
}

fn cholesky_with_ridge(m: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = m.clone().cholesky() {
        return Ok(c);
    }
    let d = m.nrows();
    (m + DMatrix::identity(d, d) * RIDGE)
        .cholesky()
        .ok_or_else(|| Error::Numeric("conditioning block is singular".into()))
}

/// Population least-squares regression of one coordinate on others.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationOls {
    /// Keyed by regressor index.
    pub coefficients: BTreeMap<usize, f64>,
    pub intercept: f64,
    pub residual_variance: f64,
}

impl PopulationOls {
    /// Regressors whose coefficient magnitude exceeds `SUPPORT_TOLERANCE`.
    pub fn support(&self) -> NodeSet {
        self.coefficients
            .iter()
            .filter(|(_, c)| c.abs() > SUPPORT_TOLERANCE)
            .map(|(&i, _)| i)
            .collect()
    }
}

/// `beta = Sigma_SS^-1 Sigma_SY`, falling back to the pseudo-inverse when the
/// regressor block is singular.
pub fn population_ols(g: &GaussianDist, response: usize, regressors: &NodeSet) -> Result<PopulationOls> {
    crate::graph::check_index(response, g.dim())?;
    if regressors.contains(&response) {
        return Err(Error::arg("the response cannot be its own regressor"));
    }
    let idx: Vec<usize> = regressors.iter().copied().collect();
    for &i in &idx {
        crate::graph::check_index(i, g.dim())?;
    }
    let mu_y = g.mean[response];
    let var_y = g.covariance[(response, response)];
    if idx.is_empty() {
        return Ok(PopulationOls {
            coefficients: BTreeMap::new(),
            intercept: mu_y,
            residual_variance: var_y,
        });
    }
    let s_ss = g.covariance.select_rows(&idx).select_columns(&idx);
    let s_sy = g.covariance.select_rows(&idx).column(response).into_owned();
    let beta = match s_ss.clone().cholesky() {
        Some(c) => c.solve(&s_sy),
        None => {
            let svd = s_ss.svd(true, true);
            let scale = svd.singular_values.max().max(1.0);
            svd.solve(&s_sy, scale * 1e-12)
                .map_err(|e| Error::Numeric(format!("pseudo-inverse failed: {e}")))?
        }
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numeric("regression coefficients are not finite".into()));
    }
    let mu_s = g.mean.select_rows(&idx);
    let intercept = mu_y - beta.dot(&mu_s);
    let residual_variance = (var_y - s_sy.dot(&beta)).max(0.0);
    Ok(PopulationOls {
        coefficients: idx.iter().copied().zip(beta.iter().copied()).collect(),
        intercept,
        residual_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Relation;
    use crate::scm::{random_scm, RandomScmConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn set(xs: &[usize]) -> NodeSet {
        xs.iter().copied().collect()
    }

    fn triangle(sigma0_sq: f64) -> GaussianDist {
        crate::scm::tests::triangle_example(sigma0_sq).population_distribution()
    }

    #[test]
    fn triangle_conditional_on_x2() {
        for sigma0_sq in [0.3, 1.0, 4.0] {
            let g = triangle(sigma0_sq);
            // keep (Y=X1) after conditioning on X2 and marginalizing X0
            let x2 = 1.7;
            let c = g.marginal(&[1, 2]).unwrap().condition(&[1], &[x2]).unwrap();
            assert_abs_diff_eq!(c.mean()[0], 0.5 * x2, epsilon = 1e-12);
            assert_abs_diff_eq!(c.covariance()[(0, 0)], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn triangle_conditional_on_parent() {
        let g = triangle(2.0);
        let c = g.marginal(&[0, 1]).unwrap().condition(&[0], &[0.4]).unwrap();
        assert_abs_diff_eq!(c.mean()[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(c.covariance()[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conditioning_on_nothing_is_identity() {
        let g = triangle(1.0);
        assert_eq!(g.condition(&[], &[]).unwrap(), g);
    }

    #[test]
    fn condition_and_marginalize_commute() {
        let scm = random_scm(
            &RandomScmConfig {
                num_nodes: 6,
                ..RandomScmConfig::default()
            },
            5,
        )
        .unwrap();
        let g = scm.population_distribution();
        // condition on {1,4}, keep {0,3}
        let a = g.condition(&[1, 4], &[0.2, -1.0]).unwrap(); // rest = 0,2,3,5
        let a = a.marginal(&[0, 2]).unwrap();
        let b = g.marginal(&[0, 1, 3, 4]).unwrap();
        let b = b.condition(&[1, 3], &[0.2, -1.0]).unwrap();
        assert!((a.mean() - b.mean()).amax() < 1e-9);
        assert!((a.covariance() - b.covariance()).amax() < 1e-9);
    }

    #[test]
    fn zero_variance_block_gets_ridge() {
        let g = GaussianDist::new(
            DVector::from_vec(vec![0.0, 1.0]),
            dmatrix![1.0, 0.0; 0.0, 0.0],
        )
        .unwrap();
        let c = g.condition(&[1], &[1.0]).unwrap();
        assert_abs_diff_eq!(c.covariance()[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_covariances() {
        let asym = GaussianDist::new(DVector::zeros(2), dmatrix![1.0, 0.5; 0.0, 1.0]);
        assert!(asym.is_err());
        let neg = GaussianDist::new(DVector::zeros(2), dmatrix![1.0, 2.0; 2.0, 1.0]);
        assert!(neg.is_err());
    }

    #[test]
    fn ols_slope_on_x2() {
        let g = triangle(1.0);
        let fit = population_ols(&g, 1, &set(&[2])).unwrap();
        assert_abs_diff_eq!(fit.coefficients[&2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.residual_variance, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ols_on_independent_regressors() {
        let g = GaussianDist::new(
            DVector::from_vec(vec![3.0, 1.0, -2.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0])),
        )
        .unwrap();
        let fit = population_ols(&g, 0, &set(&[1, 2])).unwrap();
        assert!(fit.support().is_empty());
        assert_abs_diff_eq!(fit.intercept, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.residual_variance, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_with_singular_regressors_uses_pseudo_inverse() {
        // X1 == X2 exactly
        let g = GaussianDist::new(
            DVector::zeros(3),
            dmatrix![2.0, 1.0, 1.0; 1.0, 1.0, 1.0; 1.0, 1.0, 1.0],
        )
        .unwrap();
        let fit = population_ols(&g, 0, &set(&[1, 2])).unwrap();
        assert_abs_diff_eq!(fit.coefficients[&1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.coefficients[&2], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.residual_variance, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn full_regression_support_is_markov_blanket() {
        for seed in 0..40 {
            let scm = random_scm(
                &RandomScmConfig {
                    num_nodes: 10,
                    ..RandomScmConfig::default()
                },
                seed,
            )
            .unwrap();
            let y = scm.response();
            let fit =
                population_ols(&scm.population_distribution(), y, &scm.dag().predictor_set()).unwrap();
            // graphical Markov blanket assembled from the relation queries
            let dag = scm.dag();
            let mut mb = dag.relatives(y, Relation::Parents).unwrap();
            for c in dag.relatives(y, Relation::Children).unwrap() {
                mb.insert(c);
                mb.extend(dag.relatives(c, Relation::Parents).unwrap());
            }
            mb.remove(&y);
            assert_eq!(fit.support(), mb, "seed {seed}");
        }
    }
}
