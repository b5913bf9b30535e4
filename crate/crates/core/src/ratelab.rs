//! Monte Carlo error levels at extremal configurations, bisection for the
//! empirical separation radius, parameter sweeps and log-log fits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::geometry::ConvexBody;
use crate::lowerbounds::{ball_lower_separation, inflated_orthant_rho, prior_parameters, two_point_separation};
use crate::model::{fill_standard_normal, observe, ModelParams, Point, Seed};
use crate::testkit::{ConfiguredTest, Levels, TestKind};

/// Type-I and type-II frequencies with a 3-sigma binomial radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub reps: u64,
    /// `max` over both components of `3 sqrt(p (1 - p) / reps)`.
    pub ci_radius: f64,
}

impl ErrorEstimate {
    fn from_counts(type_one: u64, type_two: u64, reps: u64) -> Self {
        let r = reps as f64;
        let (a, b) = (type_one as f64 / r, type_two as f64 / r);
        let ci = |p: f64| 3.0 * (p * (1.0 - p) / r).sqrt();
        Self {
            alpha_hat: a,
            beta_hat: b,
            reps,
            ci_radius: ci(a).max(ci(b)),
        }
    }

    pub fn total(&self) -> f64 {
        self.alpha_hat + self.beta_hat
    }
}

/// Standard normal noise for `reps` replicates, one null and one
/// alternative vector each. Replicate `i` reads stream `i` of the master
/// seed, so every estimate built on the same bank uses common random numbers.
#[derive(Debug, Clone)]
pub struct NoiseBank {
    d: usize,
    reps: u64,
    data: Vec<f64>,
}

impl NoiseBank {
    pub fn new(d: usize, reps: u64, master: u64, exec: Execution) -> Result<Self> {
        if d == 0 || reps == 0 {
            return Err(invalid("reps", "dimension and replicate count must be positive"));
        }
        let rows = usize::try_from(reps).map_err(|_| invalid("reps", "too large"))?;
        let data = exec::fill_rows(rows, 2 * d, exec, |i, row| {
            fill_standard_normal(&mut Seed::new(master, i as u64).rng(), row);
        });
        Ok(Self { d, reps, data })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn reps(&self) -> u64 {
        self.reps
    }

    fn row(&self, i: u64, offset: usize) -> &[f64] {
        let start = i as usize * 2 * self.d + offset;
        &self.data[start..start + self.d]
    }

    pub fn null_noise(&self, i: u64) -> &[f64] {
        self.row(i, 0)
    }

    pub fn alt_noise(&self, i: u64) -> &[f64] {
        self.row(i, self.d)
    }

    /// Number of replicates in which `test` rejects at mean `mu`.
    fn rejections(
        &self,
        test: &ConfiguredTest,
        mu: &[f64],
        alt_side: bool,
        exec: Execution,
    ) -> Result<u64> {
        check_dim(self.d, mu.len())?;
        let sigma = test.params().sigma();
        exec::count(self.reps, self.d, exec, |i, x| {
            let eps = if alt_side { self.alt_noise(i) } else { self.null_noise(i) };
            observe(mu, eps, sigma, x);
            test.rejects_slice(x)
        })
    }
}

/// A null mean on the boundary of the body and an alternative at distance
/// `rho` along the outward normal there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub null_mu: Point,
    pub alt_mu: Point,
    pub description: String,
}

/// How far inside the orthant the untouched alternative coordinates sit.
fn deep_offset(n: f64) -> f64 {
    -1e3 * (1.0f64).max(1.0 / n.sqrt())
}

/// The worst-case pair used for Monte Carlo: the body's canonical boundary
/// point as null, and for the alternative that point moved by `rho` along
/// the normal. For orthant-based bodies the alternative's remaining
/// coordinates are pushed deep inside, so that only one coordinate carries
/// signal for the distance statistic.
pub fn extremal_configuration(body: &ConvexBody, rho: f64, n: f64) -> Result<Configuration> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho", format!("must be nonnegative, got {rho}")));
    }
    let (null_mu, normal) = body.extremal_boundary()?;
    let mut alt: Vec<f64> = null_mu
        .as_slice()
        .iter()
        .zip(normal.as_slice())
        .map(|(p, v)| p + rho * v)
        .collect();
    let description = if body.is_orthant_based() {
        let deep = deep_offset(n);
        let lead = normal
            .as_slice()
            .iter()
            .position(|&v| v != 0.0)
            .expect("normals are nonzero");
        for (i, a) in alt.iter_mut().enumerate() {
            if i != lead {
                *a = deep;
            }
        }
        format!(
            "null at the {} corner point, alternative offset {rho} along e_{} with other coordinates at {deep}",
            body.variant_name(),
            lead + 1
        )
    } else {
        format!(
            "null at the {} boundary point, alternative offset {rho} along the outward normal",
            body.variant_name()
        )
    };
    Ok(Configuration {
        null_mu,
        alt_mu: Point::new(alt)?,
        description,
    })
}

fn check_estimate_inputs(test: &ConfiguredTest, null_mu: &Point, alt_mu: &Point) -> Result<()> {
    let d = test.params().d();
    check_dim(d, null_mu.dim())?;
    check_dim(d, alt_mu.dim())?;
    let dn = test.body().distance(null_mu)?;
    if dn > 1e-9 {
        return Err(invalid("null_mu", format!("lies at distance {dn} from the body")));
    }
    let da = test.body().distance(alt_mu)?;
    if !(da > 0.0) {
        return Err(invalid("alt_mu", "lies inside the body"));
    }
    Ok(())
}

/// Rejection frequency at `null_mu` and acceptance frequency at `alt_mu`.
/// Replicate `i` uses stream `i` of `master` for both.
pub fn estimate_errors(
    test: &ConfiguredTest,
    null_mu: &Point,
    alt_mu: &Point,
    reps: u64,
    master: u64,
    exec: Execution,
) -> Result<ErrorEstimate> {
    check_estimate_inputs(test, null_mu, alt_mu)?;
    let bank = NoiseBank::new(test.params().d(), reps, master, exec)?;
    estimate_errors_with(test, null_mu, alt_mu, &bank, exec)
}

/// [`estimate_errors`] on pre-drawn noise.
pub fn estimate_errors_with(
    test: &ConfiguredTest,
    null_mu: &Point,
    alt_mu: &Point,
    bank: &NoiseBank,
    exec: Execution,
) -> Result<ErrorEstimate> {
    check_estimate_inputs(test, null_mu, alt_mu)?;
    let type_one = bank.rejections(test, null_mu.as_slice(), false, exec)?;
    let type_two = bank.reps() - bank.rejections(test, alt_mu.as_slice(), true, exec)?;
    Ok(ErrorEstimate::from_counts(type_one, type_two, bank.reps()))
}

/// Bisection settings. With `rho_hi = None` the upper end starts at the
/// guaranteed separation and doubles (at most ten times) until the total
/// error falls below `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationOptions {
    pub reps: u64,
    pub master: u64,
    pub rho_lo: f64,
    pub rho_hi: Option<f64>,
    pub bisect_tol: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        Self {
            reps: 20_000,
            master: 0,
            rho_lo: 0.0,
            rho_hi: None,
            bisect_tol: 0.02,
            exec: Execution::Parallel,
        }
    }
}

/// A total-error evaluation that exceeded an earlier evaluation at a smaller
/// radius by more than the confidence radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonMonotone {
    pub rho_small: f64,
    pub rho_large: f64,
    pub error_small: f64,
    pub error_large: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationResult {
    pub rho_hat: f64,
    /// Error levels at `rho_hat`.
    pub errors: ErrorEstimate,
    pub bracket: (f64, f64),
    pub evaluations: Vec<(f64, f64)>,
    pub non_monotone: Vec<NonMonotone>,
    pub configuration: String,
}

/// Smallest radius at which the Monte Carlo total error at the extremal
/// configuration drops below `eta`, located by bisection on common random
/// numbers to a bracket of width `bisect_tol * rho_hi`.
pub fn empirical_separation(
    test: &ConfiguredTest,
    eta: f64,
    opts: &SeparationOptions,
) -> Result<SeparationResult> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid("eta", format!("must lie in (0, 1), got {eta}")));
    }
    if !(opts.bisect_tol > 0.0 && opts.bisect_tol < 1.0) {
        return Err(invalid("bisect_tol", "must lie in (0, 1)"));
    }
    if !(opts.rho_lo >= 0.0) {
        return Err(invalid("rho_lo", "must be nonnegative"));
    }
    let params = test.params();
    let body = test.body();
    let bank = NoiseBank::new(params.d(), opts.reps, opts.master, opts.exec)?;
    let probe = extremal_configuration(body, 0.0, params.n())?;
    // the null side does not move with rho
    let type_one = bank.rejections(test, probe.null_mu.as_slice(), false, opts.exec)?;
    let mut evaluations: Vec<(f64, f64)> = Vec::new();
    let mut eval = |rho: f64| -> Result<ErrorEstimate> {
        let cfg = extremal_configuration(body, rho, params.n())?;
        let accepted = bank.reps() - bank.rejections(test, cfg.alt_mu.as_slice(), true, opts.exec)?;
        let e = ErrorEstimate::from_counts(type_one, accepted, bank.reps());
        evaluations.push((rho, e.total()));
        Ok(e)
    };

    let e_lo = eval(opts.rho_lo)?;
    let mut lo = opts.rho_lo;
    let (mut hi, mut e_hi) = match opts.rho_hi {
        Some(hi) => {
            if !(hi > lo) {
                return Err(invalid("rho_hi", format!("must exceed rho_lo = {lo}, got {hi}")));
            }
            (hi, eval(hi)?)
        }
        None => {
            let mut hi = test.guaranteed_separation()?.rho.max(lo * 2.0).max(f64::MIN_POSITIVE);
            let mut e = eval(hi)?;
            for _ in 0..10 {
                if e.total() < eta {
                    break;
                }
                hi *= 2.0;
                e = eval(hi)?;
            }
            (hi, e)
        }
    };
    if !(e_lo.total() >= eta && e_hi.total() < eta) {
        return Err(Error::InvalidBracket {
            lo,
            hi,
            err_lo: e_lo.total(),
            err_hi: e_hi.total(),
            eta,
        });
    }
    let width = opts.bisect_tol * hi;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let e = eval(mid)?;
        if e.total() < eta {
            hi = mid;
            e_hi = e;
        } else {
            lo = mid;
        }
    }
    let _ = e_hi;
    let rho_hat = 0.5 * (lo + hi);
    let errors = eval(rho_hat)?;
    let cfg = extremal_configuration(body, rho_hat, params.n())?;

    let mut sorted = evaluations.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ci = errors.ci_radius;
    let mut non_monotone = Vec::new();
    let mut running_min = (f64::NAN, f64::INFINITY);
    for &(rho, e) in &sorted {
        if e > running_min.1 + ci {
            non_monotone.push(NonMonotone {
                rho_small: running_min.0,
                rho_large: rho,
                error_small: running_min.1,
                error_large: e,
            });
        }
        if e < running_min.1 {
            running_min = (rho, e);
        }
    }
    Ok(SeparationResult {
        rho_hat,
        errors,
        bracket: (lo, hi),
        evaluations,
        non_monotone,
        configuration: cfg.description,
    })
}

/// Body families a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyFamily {
    HalfSpace,
    Orthant,
    Ball,
    InflatedOrthant,
}

impl BodyFamily {
    pub fn name(self) -> &'static str {
        match self {
            BodyFamily::HalfSpace => "halfspace",
            BodyFamily::Orthant => "orthant",
            BodyFamily::Ball => "ball",
            BodyFamily::InflatedOrthant => "inflated-orthant",
        }
    }

    pub fn needs_radius(self) -> bool {
        matches!(self, BodyFamily::Ball | BodyFamily::InflatedOrthant)
    }

    /// The body of this family in dimension `d`.
    pub fn build(self, d: usize, radius: Option<f64>) -> Result<ConvexBody> {
        let need = || radius.ok_or_else(|| invalid("R", format!("required for the {} family", self.name())));
        match self {
            BodyFamily::HalfSpace => ConvexBody::canonical_half_space(d),
            BodyFamily::Orthant => ConvexBody::orthant(d),
            BodyFamily::Ball => ConvexBody::ball(Point::zeros(d)?, need()?),
            BodyFamily::InflatedOrthant => ConvexBody::inflated(ConvexBody::orthant(d)?, need()?),
        }
    }

    /// The natural test for the family.
    pub fn default_test(self) -> TestKind {
        match self {
            BodyFamily::HalfSpace => TestKind::HalfSpace,
            BodyFamily::Orthant => TestKind::PlugIn,
            BodyFamily::Ball => TestKind::Ball,
            BodyFamily::InflatedOrthant => TestKind::Rounded,
        }
    }
}

impl std::str::FromStr for BodyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halfspace" | "half-space" => Ok(BodyFamily::HalfSpace),
            "orthant" => Ok(BodyFamily::Orthant),
            "ball" => Ok(BodyFamily::Ball),
            "inflated-orthant" | "inflated" => Ok(BodyFamily::InflatedOrthant),
            other => Err(Error::Parse(format!(
                "unknown body family '{other}' (expected halfspace, orthant, ball or inflated-orthant)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    D,
    N,
    R,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::D => "d",
            SweepAxis::N => "n",
            SweepAxis::R => "R",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(SweepAxis::D),
            "n" => Ok(SweepAxis::N),
            "R" | "r" => Ok(SweepAxis::R),
            other => Err(Error::Parse(format!("unknown axis '{other}' (expected d, n or R)"))),
        }
    }
}

/// Everything a sweep needs apart from the swept values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: BodyFamily,
    pub test: TestKind,
    pub d: usize,
    pub n: f64,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    pub eta: f64,
    pub reps: u64,
    pub seed: u64,
    pub bisect_tol: f64,
}

/// One sweep point. `lower_bound` and `guaranteed` are the closed-form
/// radii that sandwich `rho_hat` when they exist for the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub body: String,
    pub d: usize,
    pub n: f64,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    pub eta: f64,
    pub rho_hat: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub reps: u64,
    pub seed: u64,
    pub ci_radius: f64,
    pub guaranteed: f64,
    pub lower_bound: Option<f64>,
    pub configuration: String,
    pub non_monotone: usize,
}

impl SweepRow {
    pub fn axis_value(&self, axis: SweepAxis) -> Option<f64> {
        match axis {
            SweepAxis::D => Some(self.d as f64),
            SweepAxis::N => Some(self.n),
            SweepAxis::R => self.radius,
        }
    }
}

/// Closed-form indistinguishability radius for the family, when one applies.
pub fn lower_bound_for(family: BodyFamily, d: usize, n: f64, radius: Option<f64>, eta: f64) -> Option<f64> {
    match family {
        BodyFamily::HalfSpace => two_point_separation(n, eta).ok(),
        BodyFamily::Ball => ball_lower_separation(n, d, radius?, eta).ok(),
        BodyFamily::Orthant => prior_parameters(d, eta, n, false).ok().map(|p| p.orthant_rho()),
        BodyFamily::InflatedOrthant => inflated_orthant_rho(d, n, radius?, eta).ok().map(|r| r.rho),
    }
}

/// Runs [`empirical_separation`] at one parameter point.
pub fn sweep_point(cfg: &SweepConfig, exec: Execution) -> Result<SweepRow> {
    let body = cfg.family.build(cfg.d, cfg.radius)?;
    let params = ModelParams::new(cfg.d, cfg.n)?;
    let levels = Levels::from_eta(cfg.eta)?;
    let test = ConfiguredTest::new(cfg.test, body, params, levels, None)?;
    let opts = SeparationOptions {
        reps: cfg.reps,
        master: cfg.seed,
        bisect_tol: cfg.bisect_tol,
        exec,
        ..SeparationOptions::default()
    };
    let res = empirical_separation(&test, cfg.eta, &opts)?;
    Ok(SweepRow {
        body: cfg.family.name().to_string(),
        d: cfg.d,
        n: cfg.n,
        radius: if cfg.family.needs_radius() { cfg.radius } else { None },
        eta: cfg.eta,
        rho_hat: res.rho_hat,
        alpha_hat: res.errors.alpha_hat,
        beta_hat: res.errors.beta_hat,
        reps: cfg.reps,
        seed: cfg.seed,
        ci_radius: res.errors.ci_radius,
        guaranteed: test.guaranteed_separation()?.rho,
        lower_bound: lower_bound_for(cfg.family, cfg.d, cfg.n, cfg.radius, cfg.eta),
        configuration: res.configuration,
        non_monotone: res.non_monotone.len(),
    })
}

/// Minimum number of sweep values and fit points.
pub const MIN_SWEEP_POINTS: usize = 4;

/// One row per value of `axis`, every row on the same master seed.
pub fn rate_sweep(axis: SweepAxis, values: &[f64], base: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    if values.len() < MIN_SWEEP_POINTS {
        return Err(invalid(
            "values",
            format!("need at least {MIN_SWEEP_POINTS}, got {}", values.len()),
        ));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("values", "must be strictly increasing"));
    }
    values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            match axis {
                SweepAxis::D => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return Err(invalid("values", format!("dimension {v} is not a positive integer")));
                    }
                    cfg.d = v as usize;
                }
                SweepAxis::N => cfg.n = v,
                SweepAxis::R => {
                    if !cfg.family.needs_radius() && cfg.test != TestKind::Rounded {
                        return Err(invalid("axis", format!("the {} family has no radius", cfg.family.name())));
                    }
                    cfg.radius = Some(v);
                }
            }
            sweep_point(&cfg, exec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

/// Least-squares line through `(ln x, ln rho_hat)`.
pub fn fit_loglog(rows: &[SweepRow], axis: SweepAxis) -> Result<RateFit> {
    if rows.len() < MIN_SWEEP_POINTS {
        return Err(invalid(
            "rows",
            format!("need at least {MIN_SWEEP_POINTS}, got {}", rows.len()),
        ));
    }
    let points = rows
        .iter()
        .map(|r| {
            let x = r
                .axis_value(axis)
                .ok_or_else(|| invalid("rows", format!("a row has no {} value", axis.name())))?;
            if !(x > 0.0 && r.rho_hat > 0.0) {
                return Err(invalid("rows", "axis values and rho_hat must be positive"));
            }
            Ok((x.ln(), r.rho_hat.ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 1e-24) {
        return Err(invalid("rows", "axis values are degenerate"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points,
    })
}

pub const CSV_HEADER: &str = "body,d,n,R,eta,rho_hat,alpha_hat,beta_hat,reps,seed";

/// Writes `rows` as CSV, floats in shortest round-trip form.
pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let radius = r.radius.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.body, r.d, r.n, radius, r.eta, r.rho_hat, r.alpha_hat, r.beta_hat, r.reps, r.seed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(xs: &[f64], f: impl Fn(f64) -> f64) -> Vec<SweepRow> {
        xs.iter()
            .map(|&n| SweepRow {
                body: "halfspace".into(),
                d: 1,
                n,
                radius: None,
                eta: 0.1,
                rho_hat: f(n),
                alpha_hat: 0.0,
                beta_hat: 0.0,
                reps: 1,
                seed: 0,
                ci_radius: 0.0,
                guaranteed: 1.0,
                lower_bound: None,
                configuration: String::new(),
                non_monotone: 0,
            })
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let rows = synthetic(&[100.0, 400.0, 1600.0, 6400.0], |n| 3.0 / n.sqrt());
        let fit = fit_loglog(&rows, SweepAxis::N).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let mut rows = synthetic(&[8.0, 16.0, 32.0, 64.0], |d| 2.0 * d.powf(0.25));
        for r in &mut rows {
            r.d = r.n as usize;
        }
        assert!((fit_loglog(&rows, SweepAxis::D).unwrap().slope - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_rows() {
        assert!(fit_loglog(&synthetic(&[1.0, 2.0, 3.0], |n| n), SweepAxis::N).is_err());
        assert!(fit_loglog(&synthetic(&[2.0; 4], |n| n), SweepAxis::N).is_err());
        assert!(fit_loglog(&synthetic(&[1.0, 2.0, 3.0, 4.0], |_| 0.0), SweepAxis::N).is_err());
        assert!(fit_loglog(&synthetic(&[1.0, 2.0, 3.0, 4.0], |n| n), SweepAxis::R).is_err());
    }

    #[test]
    fn csv_format() {
        let mut rows = synthetic(&[100.0], |_| 0.25);
        rows.push(SweepRow {
            body: "ball".into(),
            radius: Some(0.5),
            ..rows[0].clone()
        });
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "halfspace,1,100,,0.1,0.25,0,0,1,0");
        assert_eq!(lines[2], "ball,1,100,0.5,0.1,0.25,0,0,1,0");
    }

    #[test]
    fn configurations_sit_at_the_right_distance() {
        let n = 100.0;
        let bodies = [
            ConvexBody::canonical_half_space(3).unwrap(),
            ConvexBody::orthant(4).unwrap(),
            ConvexBody::ball(Point::new(vec![1.0, -2.0]).unwrap(), 0.7).unwrap(),
            ConvexBody::inflated(ConvexBody::orthant(5).unwrap(), 2.0).unwrap(),
        ];
        for body in &bodies {
            let c = extremal_configuration(body, 0.3, n).unwrap();
            assert!(body.distance(&c.null_mu).unwrap() < 1e-12);
            assert!((body.distance(&c.alt_mu).unwrap() - 0.3).abs() < 1e-12, "{body:?}");
        }
        let o = extremal_configuration(&bodies[1], 0.3, n).unwrap();
        assert_eq!(o.alt_mu.as_slice(), &[0.3, -1e3, -1e3, -1e3]);
        assert!(extremal_configuration(&bodies[0], -1.0, n).is_err());
    }

    fn halfspace_test(n: f64, eta: f64) -> ConfiguredTest {
        let body = ConvexBody::canonical_half_space(1).unwrap();
        let params = ModelParams::new(1, n).unwrap();
        ConfiguredTest::new(TestKind::HalfSpace, body, params, Levels::from_eta(eta).unwrap(), None).unwrap()
    }

    #[test]
    fn estimate_errors_examples() {
        let t = halfspace_test(100.0, 0.1);
        let c = extremal_configuration(t.body(), 1e3 * t.threshold(), 100.0).unwrap();
        let e = estimate_errors(&t, &c.null_mu, &c.alt_mu, 2000, 4, Execution::Parallel).unwrap();
        assert_eq!(e.beta_hat, 0.0);
        assert!(e.alpha_hat <= 0.05 + e.ci_radius);
        let inside = Point::new(vec![-0.5]).unwrap();
        assert!(estimate_errors(&t, &c.alt_mu, &c.alt_mu, 100, 4, Execution::Parallel).is_err());
        assert!(estimate_errors(&t, &inside, &inside, 100, 4, Execution::Parallel).is_err());
        let deep = estimate_errors(&t, &inside, &c.alt_mu, 2000, 4, Execution::Parallel).unwrap();
        assert!(deep.alpha_hat <= e.alpha_hat + e.ci_radius);
    }

    #[test]
    fn halfspace_separation_sandwich() {
        let t = halfspace_test(100.0, 0.1);
        let opts = SeparationOptions {
            reps: 10_000,
            master: 7,
            ..SeparationOptions::default()
        };
        let r = empirical_separation(&t, 0.1, &opts).unwrap();
        let lo = two_point_separation(100.0, 0.1).unwrap();
        let hi = t.guaranteed_separation().unwrap().rho;
        assert!(lo <= r.rho_hat && r.rho_hat <= hi, "{lo} {} {hi}", r.rho_hat);
        assert!(r.bracket.1 - r.bracket.0 <= 0.02 * r.bracket.1 + 1e-15);
        let again = empirical_separation(&t, 0.1, &opts).unwrap();
        assert_eq!(r, again);
        let seq = empirical_separation(&t, 0.1, &SeparationOptions { exec: Execution::Sequential, ..opts }).unwrap();
        assert_eq!(r.rho_hat, seq.rho_hat);
    }

    #[test]
    fn invalid_brackets() {
        let t = halfspace_test(100.0, 0.1);
        let opts = SeparationOptions {
            reps: 2000,
            rho_lo: 10.0,
            rho_hi: Some(20.0),
            ..SeparationOptions::default()
        };
        assert!(matches!(
            empirical_separation(&t, 0.1, &opts),
            Err(Error::InvalidBracket { .. })
        ));
        let backwards = SeparationOptions {
            rho_lo: 0.5,
            rho_hi: Some(0.1),
            ..opts
        };
        assert!(empirical_separation(&t, 0.1, &backwards).is_err());
    }

    #[test]
    fn sweep_validation() {
        let base = SweepConfig {
            family: BodyFamily::HalfSpace,
            test: TestKind::HalfSpace,
            d: 1,
            n: 100.0,
            radius: None,
            eta: 0.1,
            reps: 1000,
            seed: 0,
            bisect_tol: 0.05,
        };
        assert!(rate_sweep(SweepAxis::N, &[1.0, 2.0, 3.0], &base, Execution::Parallel).is_err());
        assert!(rate_sweep(SweepAxis::N, &[1.0, 3.0, 2.0, 4.0], &base, Execution::Parallel).is_err());
        assert!(rate_sweep(SweepAxis::R, &[1.0, 2.0, 3.0, 4.0], &base, Execution::Parallel).is_err());
        assert!(rate_sweep(SweepAxis::D, &[1.5, 2.0, 3.0, 4.0], &base, Execution::Parallel).is_err());
        let rows = rate_sweep(SweepAxis::N, &[100.0, 400.0, 1600.0, 6400.0], &base, Execution::Parallel).unwrap();
        assert!(rows.windows(2).all(|w| w[1].rho_hat < w[0].rho_hat));
    }

    #[test]
    fn family_parsing() {
        assert_eq!("orthant".parse::<BodyFamily>().unwrap(), BodyFamily::Orthant);
        assert_eq!("R".parse::<SweepAxis>().unwrap(), SweepAxis::R);
        assert!("cube".parse::<BodyFamily>().is_err());
        assert!(BodyFamily::Ball.build(3, None).is_err());
    }
}
