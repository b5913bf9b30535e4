//! The four subcommands. Each returns the process exit code.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use seprate_core::geometry::ConvexBody;
use seprate_core::lowerbounds::divergence::{ball_lower_s, ball_prior_amplitude};
use seprate_core::lowerbounds::{
    ball_lower_separation, ball_lower_separation_exact, ball_prior_divergence_report,
    chi2_budget, chi2_two_point_report, construct_moment_priors, inflated_orthant_rho, moment_gaps,
    prior_parameters, scaled_moment_gaps, tv_bound_product, tv_distance_1d, two_point_separation,
    ConditionalPrior, PriorParameters,
};
use seprate_core::model::sample;
use seprate_core::quad::QuadSpec;
use seprate_core::ratelab::{fit_loglog, rate_sweep, write_csv, BodyFamily, SweepAxis, SweepConfig};
use seprate_core::testkit::ConfiguredTest;
use seprate_core::validation::{run_suite, Suite};
use seprate_core::{Execution, Levels, ModelParams, Point, Seed, TestKind};

use crate::config::{body_arg, parse_body, require, resolve};

pub const EXIT_ACCEPT: u8 = 0;
pub const EXIT_REJECT: u8 = 3;
pub const EXIT_FAILED_CHECKS: u8 = 1;

fn emit(report: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    if let Some(path) = out {
        std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{text}");
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct TestArgs {
    /// Null body: inline JSON or a path to a JSON file.
    #[arg(long, value_parser = body_arg)]
    pub body: Option<Value>,
    /// True mean, comma separated; the observation is sampled from it.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// half-space, plug-in, rounded or ball (default follows the body).
    #[arg(long)]
    pub kind: Option<String>,
    /// Rounding radius override for the rounded test.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing, default)]
    pub config: Option<PathBuf>,
}

fn default_kind(body: &ConvexBody) -> TestKind {
    match body {
        ConvexBody::HalfSpace { .. } => TestKind::HalfSpace,
        ConvexBody::Ball { .. } => TestKind::Ball,
        _ => TestKind::PlugIn,
    }
}

pub fn cmd_test(flags: &TestArgs) -> Result<u8> {
    let a = resolve(flags, flags.config.as_ref())?;
    let body = parse_body(&require(a.body.clone(), "body")?)?;
    let mu = Point::new(require(a.mu.clone(), "mu")?)?;
    let n = require(a.n, "n")?;
    let levels = Levels::new(a.alpha.unwrap_or(0.05), a.beta.unwrap_or(0.05))?;
    let kind = match &a.kind {
        Some(k) => k.parse()?,
        None => default_kind(&body),
    };
    let seed = a.seed.unwrap_or(0);
    let params = ModelParams::new(body.dim(), n)?;
    let test = ConfiguredTest::new(kind, body, params, levels, a.radius)?;
    let x = sample(&params, &mu, Seed::new(seed, 0))?;
    let outcome = test.outcome(&x)?;
    let mut config = serde_json::to_value(&a)?;
    config["kind"] = json!(kind.name());
    config["seed"] = json!(seed);
    config["alpha"] = json!(levels.alpha());
    config["beta"] = json!(levels.beta());
    let report = json!({
        "statistic": outcome.statistic,
        "threshold": outcome.threshold,
        "reject": outcome.reject,
        "observation": x,
        "config": config,
    });
    emit(&report, a.out.as_deref())?;
    Ok(if outcome.reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Body family (halfspace, orthant, ball, inflated-orthant) or a body
    /// as inline JSON or a file.
    #[arg(long, value_parser = body_arg)]
    pub body: Option<Value>,
    /// Test kind (default follows the family).
    #[arg(long)]
    pub kind: Option<String>,
    /// Swept parameter: d, n or R.
    #[arg(long)]
    pub axis: Option<String>,
    /// Swept values, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bisect_tol: Option<f64>,
    /// CSV path; the fit goes next to it with extension `.fit.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing, default)]
    pub config: Option<PathBuf>,
}

/// The family, dimension and radius a body description implies.
fn family_of(spec: &Value) -> Result<(BodyFamily, Option<usize>, Option<f64>)> {
    if let Value::String(s) = spec {
        if let Ok(f) = s.parse::<BodyFamily>() {
            return Ok((f, None, None));
        }
    }
    let body = parse_body(spec)?;
    let d = Some(body.dim());
    Ok(match &body {
        ConvexBody::HalfSpace { .. } => (BodyFamily::HalfSpace, d, None),
        ConvexBody::Orthant { .. } => (BodyFamily::Orthant, d, None),
        ConvexBody::Ball { radius, .. } => (BodyFamily::Ball, d, Some(*radius)),
        ConvexBody::Inflated { base, radius } if matches!(**base, ConvexBody::Orthant { .. }) => {
            (BodyFamily::InflatedOrthant, d, Some(*radius))
        }
        other => bail!(
            "sweeps support halfspace, orthant, ball and inflated-orthant bodies, got {}",
            other.variant_name()
        ),
    })
}

/// `foo.csv` -> `foo.fit.json`.
pub fn fit_path(csv: &Path) -> PathBuf {
    csv.with_extension("fit.json")
}

pub fn cmd_sweep(flags: &SweepArgs, exec: Execution) -> Result<u8> {
    let a = resolve(flags, flags.config.as_ref())?;
    let (family, body_d, body_r) = family_of(&require(a.body.clone(), "body")?)?;
    let axis: SweepAxis = require(a.axis.clone(), "axis")?.parse()?;
    let values = require(a.values.clone(), "values")?;
    if values.is_empty() {
        bail!("--values is empty");
    }
    let first = values[0];
    let d = match axis {
        SweepAxis::D => first as usize,
        _ => require(a.d.or(body_d), "d")?,
    };
    let n = match axis {
        SweepAxis::N => first,
        _ => require(a.n, "n")?,
    };
    let radius = match axis {
        SweepAxis::R => Some(first),
        _ => a.radius.or(body_r),
    };
    let test = match &a.kind {
        Some(k) => k.parse()?,
        None => family.default_test(),
    };
    let cfg = SweepConfig {
        family,
        test,
        d,
        n,
        radius,
        eta: a.eta.unwrap_or(0.1),
        reps: a.reps.unwrap_or(20_000),
        seed: a.seed.unwrap_or(0),
        bisect_tol: a.bisect_tol.unwrap_or(0.02),
    };
    let rows = rate_sweep(axis, &values, &cfg, exec)?;
    let fit = fit_loglog(&rows, axis)?;
    match &a.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_csv(&rows, &mut w)?;
            w.flush()?;
            let report = json!({
                "config": {"axis": axis.name(), "values": values, "sweep": cfg},
                "fit": fit,
                "rows": rows,
                "configuration": rows.first().map(|r| r.configuration.clone()),
            });
            std::fs::write(fit_path(path), serde_json::to_string_pretty(&report)? + "\n")?;
            eprintln!(
                "wrote {} rows to {}; slope {} (r^2 {})",
                rows.len(),
                path.display(),
                fit.slope,
                fit.r_squared
            );
        }
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(0)
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundArgs {
    /// two-point, orthant, inflated-orthant or ball.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Draws used to estimate the conditioning acceptance rate.
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nodes of the moment-matching LP grid.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing, default)]
    pub config: Option<PathBuf>,
}

/// Priors, moment gaps, TV verification and conditioning rate for the
/// orthant constructions.
fn orthant_report(p: &PriorParameters, grid: usize, reps: u64, seed: u64, radius: Option<f64>) -> Result<Value> {
    let (nu0, nu1) = construct_moment_priors(p.m, p.b, grid, 1e-8)?;
    let scaled = scaled_moment_gaps(&nu0, &nu1, p.m as u32, p.b);
    let raw = moment_gaps(&nu0, &nu1, p.m as u32);
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let tv = tv_distance_1d(&nu0, &nu1, p.sigma, &QuadSpec::default())?;
    let bound = tv_bound_product(p.m, p.free_dim)?;
    let conditional = match radius {
        Some(r) => ConditionalPrior::shifted(nu1.clone(), p.d, r)?,
        None => ConditionalPrior::new(nu1.clone(), p.d)?,
    };
    let acceptance = conditional.acceptance_rate(reps, Seed::new(seed, 0));
    Ok(json!({
        "M": p.m,
        "parameters": p,
        "priors": {"nu0": nu0, "nu1": nu1, "mass_at_u": nu1.mass_at(p.u)},
        "moment_gaps": {"max_scaled": max(&scaled), "max_raw": max(&raw), "tol": 1e-8},
        "tv": {
            "one_dim": tv,
            "times_d": p.free_dim as f64 * tv.value,
            "product_bound": bound,
            "bound_holds": p.free_dim as f64 * (tv.value + tv.error) <= bound,
            "error_floor": 1.0 - 0.5 * bound,
            "error_floor_meets_eta_plus_ninth": 1.0 - 0.5 * bound >= p.eta + 1.0 / 9.0 - 1e-6,
        },
        "conditioning": {"draws": reps, "acceptance_rate": acceptance},
    }))
}

pub fn cmd_lowerbound(flags: &LowerBoundArgs) -> Result<u8> {
    let a = resolve(flags, flags.config.as_ref())?;
    let kind = require(a.kind.clone(), "kind")?;
    let eta = a.eta.unwrap_or(0.5);
    let seed = a.seed.unwrap_or(0);
    let reps = a.reps.unwrap_or(10_000);
    let grid = a.grid.unwrap_or(seprate_core::lowerbounds::priors::DEFAULT_GRID);
    let mut config = serde_json::to_value(&a)?;
    config["eta"] = json!(eta);
    config["seed"] = json!(seed);
    config["reps"] = json!(reps);
    config["grid"] = json!(grid);
    let report = match kind.as_str() {
        "two-point" => {
            let n = require(a.n, "n")?;
            let rho = two_point_separation(n, eta)?;
            json!({
                "kind": kind,
                "rho": rho,
                "chi2_budget": chi2_budget(eta)?,
                "divergence": chi2_two_point_report(n, rho, &QuadSpec::default())?,
                "config": config,
            })
        }
        "ball" => {
            let (d, n, r) = (require(a.d, "d")?, require(a.n, "n")?, require(a.radius, "R")?);
            if d < 3 {
                bail!("the ball lower bound needs d >= 3, got {d}");
            }
            let exact = ball_lower_separation_exact(n, d, r, eta)?;
            let h = ball_prior_amplitude(d, r, exact)?;
            json!({
                "kind": kind,
                "rho": ball_lower_separation(n, d, r, eta)?,
                "rho_exact": exact,
                "s": ball_lower_s(n, d, eta)?,
                "amplitude": h,
                "chi2_budget": chi2_budget(eta)?,
                "divergence": ball_prior_divergence_report(n, d, h, &QuadSpec::default())?,
                "config": config,
            })
        }
        "orthant" => {
            let p = prior_parameters(require(a.d, "d")?, eta, a.n.unwrap_or(1.0), false)?;
            let mut v = orthant_report(&p, grid, reps, seed, None)?;
            v["kind"] = json!(kind);
            v["rho"] = json!(p.orthant_rho());
            v["rho_rounded"] = json!(p.orthant_rho_rounded());
            v["config"] = config;
            v
        }
        "inflated-orthant" => {
            let (d, n, r) = (require(a.d, "d")?, a.n.unwrap_or(1.0), require(a.radius, "R")?);
            let p = prior_parameters(d, eta, n, true)?;
            let rho = inflated_orthant_rho(d, n, r, eta)?;
            let mut v = orthant_report(&p, grid, reps, seed, Some(r))?;
            v["kind"] = json!(kind);
            v["rho"] = json!(rho.rho);
            v["branch"] = json!(rho.branch);
            v["s"] = json!(rho.s);
            v["config"] = config;
            v
        }
        other => bail!("unknown lower-bound kind '{other}' (expected two-point, orthant, inflated-orthant or ball)"),
    };
    emit(&report, a.out.as_deref())?;
    Ok(0)
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct CheckArgs {
    /// concentration, geometry, divergence or rounding.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the rows as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing, default)]
    pub config: Option<PathBuf>,
}

pub fn cmd_check(flags: &CheckArgs, exec: Execution) -> Result<u8> {
    let a = resolve(flags, flags.config.as_ref())?;
    let suite: Suite = require(a.suite.clone(), "suite")?.parse()?;
    let seed = a.seed.unwrap_or(0);
    let rows = run_suite(suite, seed, exec)?;
    let mut out = std::io::stdout().lock();
    for r in &rows {
        let tag = match (r.passed, r.expected_failure) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "XFAIL",
            (true, true) => "XPASS",
        };
        writeln!(out, "{tag:5}  {}  ({})", r.name, r.detail)?;
    }
    let bad = rows.iter().filter(|r| !r.consistent()).count();
    writeln!(out, "{}: {} rows, {} unexpected", suite.name(), rows.len(), bad)?;
    if let Some(path) = &a.out {
        let report = json!({"suite": suite.name(), "seed": seed, "rows": rows});
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(if bad == 0 { 0 } else { EXIT_FAILED_CHECKS })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_path_replaces_the_extension() {
        assert_eq!(fit_path(Path::new("out/foo.csv")), PathBuf::from("out/foo.fit.json"));
        assert_eq!(fit_path(Path::new("foo")), PathBuf::from("foo.fit.json"));
    }

    #[test]
    fn families_from_bodies() {
        let (f, d, r) = family_of(&Value::String("orthant".into())).unwrap();
        assert_eq!((f, d, r), (BodyFamily::Orthant, None, None));
        let ball = json!({"variant": "ball", "d": 16, "radius": 2.0});
        assert_eq!(family_of(&ball).unwrap(), (BodyFamily::Ball, Some(16), Some(2.0)));
        let inflated = json!({"variant": "inflated", "base": {"variant": "orthant", "d": 3}, "R": 0.5});
        assert_eq!(family_of(&inflated).unwrap().0, BodyFamily::InflatedOrthant);
        assert!(family_of(&Value::String("cube".into())).is_err());
    }

    #[test]
    fn default_kinds_follow_the_body() {
        assert_eq!(default_kind(&ConvexBody::orthant(2).unwrap()), TestKind::PlugIn);
        assert_eq!(default_kind(&ConvexBody::canonical_half_space(2).unwrap()), TestKind::HalfSpace);
    }
}
