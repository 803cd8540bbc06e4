use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::hypothesis::{f_p, welch_p, Summary};
use crate::error::{Error, Result};
use crate::graph::{check_index, NodeSet};
use crate::scm::EnvironmentSet;

/// Outcome of testing invariance of `Y | X_S` across environments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceTestResult {
    pub set: NodeSet,
    pub p_value: f64,
    /// `(t-test p, F-test p)` of each environment against all the others.
    pub per_environment: Vec<(f64, f64)>,
}

/// Tests `H_0,S` over every environment in `envs`.
pub fn test_invariance(envs: &EnvironmentSet, s: &NodeSet) -> Result<InvarianceTestResult> {
    let all: Vec<usize> = (0..envs.len()).collect();
    test_invariance_between(envs, &all, s)
}

/// Tests `H_0,S` over the environments at `indices` only.
///
/// Y is regressed on `X_S` over the pooled data. The residuals of each
/// environment are compared with the residuals of the rest by a Welch t-test
/// and a two-sided F-test, and the smallest p-value is Bonferroni-corrected
/// by `2 * |environments|`.
///
/// Everything is computed from per-environment moment matrices, so the cost
/// does not depend on the number of rows.
pub fn test_invariance_between(
    envs: &EnvironmentSet,
    indices: &[usize],
    s: &NodeSet,
) -> Result<InvarianceTestResult> {
    if indices.len() < 2 {
        return Err(Error::arg("the invariance test needs at least two environments"));
    }
    let cols = envs.num_columns();
    let response = envs.response();
    for &i in s {
        check_index(i, cols)?;
        if i == response {
            return Err(Error::arg("the conditioning set contains the response"));
        }
    }
    let mut selected = Vec::with_capacity(indices.len());
    for &e in indices {
        let env = envs
            .get(e)
            .ok_or_else(|| Error::arg(format!("no environment {e}")))?;
        if env.len() < 2 {
            return Err(Error::SampleSize { got: env.len(), need: 2 });
        }
        selected.push(env.moments());
    }

    // moment-matrix coordinates: 0 is the constant, node j sits at j + 1
    let mut coords: Vec<usize> = Vec::with_capacity(s.len() + 2);
    coords.push(0);
    coords.extend(s.iter().map(|&j| j + 1));
    let k = coords.len();
    coords.push(response + 1);

    let m = k + 1;
    let mut pooled = DMatrix::<f64>::zeros(m, m);
    for mat in &selected {
        for (b, &cb) in coords.iter().enumerate() {
            for (a, &ca) in coords.iter().enumerate() {
                pooled[(a, b)] += mat[(ca, cb)];
            }
        }
    }
    let n_total = pooled[(0, 0)];
    if n_total < (s.len() + 3) as f64 {
        return Err(Error::SampleSize {
            got: n_total as usize,
            need: s.len() + 3,
        });
    }

    let gram = pooled.view((0, 0), (k, k)).into_owned();
    let rhs = pooled.view((0, k), (k, 1)).column(0).into_owned();
    let beta = solve_normal_equations(gram, &rhs)?;

    // residual = Z v with v = (-beta, 1) over `coords`
    let mut v: Vec<f64> = beta.iter().map(|b| -b).collect();
    v.push(1.0);

    // count, residual sum and residual sum of squares per environment
    let sums: Vec<(f64, f64, f64)> = selected
        .iter()
        .map(|mat| {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for (a, &ca) in coords.iter().enumerate() {
                let row: f64 = coords.iter().zip(&v).map(|(&cb, vb)| mat[(ca, cb)] * vb).sum();
                if a == 0 {
                    s1 = row;
                }
                s2 += v[a] * row;
            }
            (mat[(0, 0)], s1, s2)
        })
        .collect();
    let total = sums
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2));

    let mut per_environment = Vec::with_capacity(sums.len());
    let mut smallest = 1.0f64;
    for &(n, s1, s2) in &sums {
        let inside = Summary::from_sums(n, s1, s2);
        let outside = Summary::from_sums(total.0 - n, total.1 - s1, total.2 - s2);
        let tp = welch_p(&inside, &outside);
        let fp = f_p(&inside, &outside);
        smallest = smallest.min(2.0 * tp.min(fp));
        per_environment.push((tp, fp));
    }
    let p_value = (sums.len() as f64 * smallest).min(1.0);
    Ok(InvarianceTestResult {
        set: s.clone(),
        p_value,
        per_environment,
    })
}

fn solve_normal_equations(gram: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = gram.clone().cholesky() {
        let beta = chol.solve(rhs);
        if beta.iter().all(|b| b.is_finite()) {
            return Ok(beta);
        }
    }
    let svd = gram.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    svd.solve(rhs, eps)
        .map_err(|e| Error::Numeric(format!("normal equations failed: {e}")))
}
