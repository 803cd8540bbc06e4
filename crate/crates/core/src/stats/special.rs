use statrs::function::gamma::ln_gamma;

const MAX_ITER: usize = 20_000;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// Regularized incomplete beta `I_x(a, b)`, by Lentz's continued fraction.
///
/// The iteration count grows like `sqrt(max(a, b))`, so it is not capped at
/// the small fixed bound common elsewhere; residual degrees of freedom in the
/// tens of thousands are routine here.
pub(crate) fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    beta_tails(a, b, x).0
}

/// `(I_x(a, b), 1 - I_x(a, b))` from a single continued fraction, each tail
/// accurate on its own.
pub(crate) fn beta_tails(a: f64, b: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let front = ln_front_factor(a, b, x).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = front * continued_fraction(a, b, x) / a;
        (lower, 1.0 - lower)
    } else {
        let upper = front * continued_fraction(b, a, 1.0 - x) / b;
        (1.0 - upper, upper)
    }
}

/// `ln[x^a (1-x)^b / B(a, b)]`.
///
/// For large `a` and `b` the log-gamma terms are huge and nearly cancel, so
/// Stirling's series is expanded by hand and the leading terms are combined
/// before rounding.
fn ln_front_factor(a: f64, b: f64, x: f64) -> f64 {
    if a < 10.0 || b < 10.0 {
        return ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    }
    let d = x * b - a * (1.0 - x);
    a * (d / a).ln_1p() + b * (-d / b).ln_1p() + 0.5 * (a * b / (a + b)).ln()
        - 0.5 * (2.0 * std::f64::consts::PI).ln()
        + stirling_correction(a + b)
        - stirling_correction(a)
        - stirling_correction(b)
}

/// `ln Gamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2]` for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r * (1.0 / 1680.0 - r / 1188.0)))) / x
}

fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub(crate) fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    regularized_beta(0.5 * df, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}
