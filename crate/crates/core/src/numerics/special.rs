//! Incomplete beta and F-distribution kernels.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("incomplete beta needs a, b > 0 (got {a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta needs x in [0, 1] (got {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_front.exp() * beta_cf(a, b, x)? / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x)? / b).clamp(0.0, 1.0))
    }
}

/// Continued fraction for the incomplete beta, modified Lentz evaluation.
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;

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
            return Ok(h);
        }
    }
    Err(Error::NonConvergence(format!("incomplete beta continued fraction at a={a}, b={b}, x={x}")))
}

fn check_df(d1: f64, d2: f64) -> Result<()> {
    if d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("F degrees of freedom must be positive (got {d1}, {d2})")))
    }
}

/// Central F distribution CDF.
pub fn f_cdf(d1: f64, d2: f64, x: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("F CDF needs x >= 0 (got {x})")));
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    reg_inc_beta(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
}

/// Upper tail `1 - F(x)`, computed on the complementary beta to keep precision.
pub fn f_sf(d1: f64, d2: f64, x: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("F survival needs x >= 0 (got {x})")));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d1 * x + d2))
}

/// Quantile of the central F distribution: `x` with `f_cdf(d1, d2, x) = p`.
pub fn f_quantile(d1: f64, d2: f64, p: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("F quantile needs p in (0, 1) (got {p})")));
    }
    let (a, b) = (d1 / 2.0, d2 / 2.0);
    let ln_b = ln_beta(a, b);
    // Solve on the beta scale y = d1 x / (d1 x + d2), where the CDF is I_y(a, b).
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut y = 0.5;
    for _ in 0..200 {
        let value = reg_inc_beta(a, b, y)?;
        let err = value - p;
        if err.abs() < 1e-15 {
            return Ok(beta_to_f(d1, d2, y));
        }
        if err > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        if hi - lo <= 4.0 * f64::EPSILON * y.max(f64::MIN_POSITIVE) {
            return Ok(beta_to_f(d1, d2, y));
        }
        let ln_density = (a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p() - ln_b;
        let newton = y - err / ln_density.exp();
        y = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NonConvergence(format!("F quantile (d1={d1}, d2={d2}, p={p}) after 200 iterations")))
}

fn beta_to_f(d1: f64, d2: f64, y: f64) -> f64 {
    d2 * y / (d1 * (1.0 - y))
}

/// Remaining Poisson mass targeted before truncating the noncentral series.
const POISSON_TAIL: f64 = 1e-13;

/// CDF of the noncentral F distribution with noncentrality `lambda`.
///
/// Poisson(λ/2)-weighted mixture of incomplete betas `I_y(d1/2 + j, d2/2)`
/// with `y = d1 x / (d1 x + d2)`. Terms are accumulated outward from the
/// Poisson mode; each direction stops once a geometric bound on its remaining
/// weight falls below half the tail budget.
pub fn noncentral_f_cdf(d1: f64, d2: f64, lambda: f64, x: f64) -> Result<f64> {
    check_df(d1, d2)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("noncentrality must be finite and >= 0 (got {lambda})")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("noncentral F CDF needs x >= 0 (got {x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    if lambda == 0.0 {
        return f_cdf(d1, d2, x);
    }
    let mu = lambda / 2.0;
    let y = d1 * x / (d1 * x + d2);
    let (a, b) = (d1 / 2.0, d2 / 2.0);
    let weight = |j: f64| (-mu + j * mu.ln() - ln_gamma(j + 1.0)).exp();

    let mode = mu.floor();
    let mut total = 0.0;
    const MAX_TERMS: usize = 1_000_000;

    // Upward from the mode; w_{j+1}/w_j = mu/(j+1) shrinks, so the tail past j
    // is at most w_j / (1 - mu/(j+1)).
    let mut j = mode;
    let mut terms = 0;
    loop {
        let w = weight(j);
        total += w * reg_inc_beta(a + j, b, y)?;
        let ratio = mu / (j + 1.0);
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < POISSON_TAIL / 2.0 {
            break;
        }
        j += 1.0;
        terms += 1;
        if terms > MAX_TERMS {
            return Err(Error::NonConvergence("noncentral F series (upper tail)".into()));
        }
    }

    // Downward; w_{j-1}/w_j = j/mu, bounded by (mode)/mu < 1 below the mode.
    let mut j = mode - 1.0;
    while j >= 0.0 {
        let w = weight(j);
        total += w * reg_inc_beta(a + j, b, y)?;
        let ratio = j / mu;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < POISSON_TAIL / 2.0 {
            break;
        }
        j -= 1.0;
    }
    Ok(total.clamp(0.0, 1.0))
}
