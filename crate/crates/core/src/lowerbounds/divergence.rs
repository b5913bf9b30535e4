//! Closed-form chi-square divergences and indistinguishability radii, each
//! with a quadrature cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::{integrate_pieces, QuadSpec};

/// A closed-form value next to its numerical counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub formula_value: f64,
    pub numeric_value: f64,
    pub abs_gap: f64,
    pub method: String,
}

impl DivergenceReport {
    fn new(formula_value: f64, numeric_value: f64, method: String) -> Self {
        Self {
            formula_value,
            numeric_value,
            abs_gap: (formula_value - numeric_value).abs(),
            method,
        }
    }
}

fn check_n(n: f64) -> Result<()> {
    if n.is_finite() && n > 0.0 {
        Ok(())
    } else {
        Err(invalid("n", format!("must be positive, got {n}")))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(invalid("eta", format!("must lie in (0, 1), got {eta}")))
    }
}

/// Right-hand side of the chi-square criterion, `1 + 4 (1 - eta)^2`.
pub fn chi2_budget(eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(1.0 + 4.0 * (1.0 - eta).powi(2))
}

/// `sqrt(ln(1 + 4 (1 - eta)^2) / n)`: two means this close cannot be told
/// apart with total error below `eta`.
pub fn two_point_separation(n: f64, eta: f64) -> Result<f64> {
    check_n(n)?;
    Ok((chi2_budget(eta)?.ln() / n).sqrt())
}

/// Chi-square divergence (plus one) between `N(rho, 1/n)` and `N(0, 1/n)`:
/// `exp(n rho^2)`.
pub fn chi2_two_point(n: f64, rho: f64) -> Result<f64> {
    check_n(n)?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho", format!("must be nonnegative, got {rho}")));
    }
    Ok((n * rho * rho).exp())
}

/// Unit-spaced breakpoints covering `[center - reach, center + reach]`.
fn unit_breaks(center: f64, reach: f64) -> Vec<f64> {
    let k = reach.ceil() as i64;
    (-k..=k).map(|j| center + j as f64).collect()
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_87;

/// Checks [`chi2_two_point`] against `int f_rho(x)^2 / f_0(x) dx`.
pub fn chi2_two_point_report(n: f64, rho: f64, spec: &QuadSpec) -> Result<DivergenceReport> {
    let formula = chi2_two_point(n, rho)?;
    // standardised coordinate t = sqrt(n) x; the integrand peaks at t = 2a
    let a = n.sqrt() * rho;
    // f_rho^2 / f_0 with the exponents combined so the tails cannot give 0/0
    let integrand = |t: f64| INV_SQRT_2PI * (-(t - a) * (t - a) + 0.5 * t * t).exp();
    let q = integrate_pieces(integrand, &unit_breaks(2.0 * a, 40.0), spec)?;
    Ok(DivergenceReport::new(
        formula,
        q.value,
        format!("gauss-kronrod-15 on [2a-40, 2a+40] from unit pieces, {} intervals", q.intervals),
    ))
}

/// `cosh(n h^2)^(d-1)`: chi-square divergence (plus one) of the prior that
/// flips the sign of each of `d - 1` coordinates of size `h`.
pub fn ball_prior_divergence(n: f64, d: usize, h: f64) -> Result<f64> {
    check_n(n)?;
    if d < 2 {
        return Err(invalid("d", "must be at least 2"));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("must be nonnegative, got {h}")));
    }
    Ok((n * h * h).cosh().powi((d - 1) as i32))
}

/// Checks [`ball_prior_divergence`] by integrating the one-coordinate factor
/// `E[cosh^2(n h Y)] exp(-n h^2)`, `Y ~ N(0, 1/n)`, and raising it to `d - 1`.
pub fn ball_prior_divergence_report(
    n: f64,
    d: usize,
    h: f64,
    spec: &QuadSpec,
) -> Result<DivergenceReport> {
    let formula = ball_prior_divergence(n, d, h)?;
    let a = n.sqrt() * h;
    // cosh^2 = 1 + sinh^2; integrate the sinh^2 part so the small excess
    // over one keeps full relative precision
    let integrand = |t: f64| {
        let s = (a * t).sinh();
        s * s * INV_SQRT_2PI * (-0.5 * t * t).exp()
    };
    let reach = 40.0 + 2.0 * a;
    let q = integrate_pieces(integrand, &unit_breaks(0.0, reach), spec)?;
    let log_factor = q.value.ln_1p() - a * a;
    let numeric = ((d - 1) as f64 * log_factor).exp();
    Ok(DivergenceReport::new(
        formula,
        numeric,
        format!("gauss-kronrod-15 on [-{reach}, {reach}] from unit pieces, {} intervals", q.intervals),
    ))
}

/// Per-coordinate amplitude `h` of the ball prior at separation `rho`:
/// `h^2 = ((R + rho)^2 - R^2) / (d - 1)`.
pub fn ball_prior_amplitude(d: usize, radius: f64, rho: f64) -> Result<f64> {
    if d < 2 {
        return Err(invalid("d", "must be at least 2"));
    }
    if !(radius >= 0.0 && rho >= 0.0) {
        return Err(invalid("R/rho", "must be nonnegative"));
    }
    Ok((((radius + rho).powi(2) - radius * radius) / (d - 1) as f64).sqrt())
}

/// Inverse of [`ball_prior_amplitude`].
pub fn ball_prior_separation(d: usize, radius: f64, h: f64) -> Result<f64> {
    if d < 2 {
        return Err(invalid("d", "must be at least 2"));
    }
    if !(radius >= 0.0 && h >= 0.0) {
        return Err(invalid("R/h", "must be nonnegative"));
    }
    let r2 = radius * radius;
    let extra = (d - 1) as f64 * h * h;
    // sqrt(R^2 + e) - R without cancellation
    Ok(extra / ((r2 + extra).sqrt() + radius))
}

/// `s = sqrt(d - 1) / n * sqrt((2/e) ln(1 + 4 (1 - eta)^2))`.
pub fn ball_lower_s(n: f64, d: usize, eta: f64) -> Result<f64> {
    check_n(n)?;
    if d < 3 {
        return Err(invalid("d", format!("must be at least 3, got {d}")));
    }
    let c = (2.0 / std::f64::consts::E * chi2_budget(eta)?.ln()).sqrt();
    Ok(((d - 1) as f64).sqrt() / n * c)
}

/// Lower bound on the separation radius of a ball of radius `R`:
/// `s / (2 sqrt(s + R^2))`.
pub fn ball_lower_separation(n: f64, d: usize, radius: f64, eta: f64) -> Result<f64> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(invalid("R", format!("must be nonnegative, got {radius}")));
    }
    let s = ball_lower_s(n, d, eta)?;
    Ok(s / (2.0 * (s + radius * radius).sqrt()))
}

/// The sharper radius `sqrt(s + R^2) - R` that [`ball_lower_separation`]
/// bounds from below.
pub fn ball_lower_separation_exact(n: f64, d: usize, radius: f64, eta: f64) -> Result<f64> {
    let s = ball_lower_s(n, d, eta)?;
    Ok(s / ((s + radius * radius).sqrt() + radius))
}
