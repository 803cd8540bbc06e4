use super::special::{beta_tails, student_t_two_sided};
use crate::error::{Error, Result};

/// Count, mean and unbiased variance of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: f64,
    pub mean: f64,
    pub var: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
        Summary {
            n,
            mean,
            var: ss / (n - 1.0),
        }
    }

    /// From the count, sum and sum of squares.
    pub(crate) fn from_sums(n: f64, sum: f64, sum_sq: f64) -> Self {
        let mean = sum / n;
        let var = ((sum_sq - sum * mean) / (n - 1.0)).max(0.0);
        Summary { n, mean, var }
    }
}

fn check_sizes(a: &[f64], b: &[f64]) -> Result<()> {
    let got = a.len().min(b.len());
    if got < 2 {
        return Err(Error::SampleSize { got, need: 2 });
    }
    Ok(())
}

/// Two-sided Welch t-test for equal means.
///
/// When both samples have zero variance the p-value is 1 for equal means
/// and 0 otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sizes(a, b)?;
    Ok(welch_p(&Summary::of(a), &Summary::of(b)))
}

pub(crate) fn welch_p(a: &Summary, b: &Summary) -> f64 {
    let qa = a.var / a.n;
    let qb = b.var / b.n;
    let se2 = qa + qb;
    if se2 <= 0.0 {
        return if a.mean == b.mean { 1.0 } else { 0.0 };
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (a.n - 1.0) + qb * qb / (b.n - 1.0));
    student_t_two_sided(t, df)
}

/// Two-sided F-test for equal variances, `2 * min(CDF, 1 - CDF)` capped at 1.
pub fn f_test_variance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sizes(a, b)?;
    Ok(f_p(&Summary::of(a), &Summary::of(b)))
}

pub(crate) fn f_p(a: &Summary, b: &Summary) -> f64 {
    let (d1, d2) = (a.n - 1.0, b.n - 1.0);
    let (wa, wb) = (d1 * a.var, d2 * b.var);
    let total = wa + wb;
    if total <= 0.0 {
        return 1.0;
    }
    // CDF of F = var_a / var_b at the observed value, and its complement,
    // written so that swapping the samples swaps the two tails exactly
    let (lower, upper) = if wa <= wb {
        beta_tails(0.5 * d1, 0.5 * d2, wa / total)
    } else {
        let (u, l) = beta_tails(0.5 * d2, 0.5 * d1, wb / total);
        (l, u)
    };
    (2.0 * lower.min(upper)).clamp(0.0, 1.0)
}
