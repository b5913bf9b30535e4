//! Acceptance criteria. Each test prints one `criterion N ... PASS|FAIL`
//! line and then asserts the same condition.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use seprate_core::geometry::{check_local_rounding, BoundaryGraph};
use seprate_core::lowerbounds::{
    bayes_error_of_test, construct_moment_priors, moment_gaps, prior_parameters, scaled_moment_gaps,
    tv_bound_product, tv_distance_1d, two_point_separation, ConditionalPrior, ProductPrior,
};
use seprate_core::quad::QuadSpec;
use seprate_core::ratelab::{
    estimate_errors, extremal_configuration, fit_loglog, rate_sweep, BodyFamily, SweepAxis, SweepConfig,
    SweepRow,
};
use seprate_core::testkit::ConfiguredTest;
use seprate_core::validation::{run_suite, Suite};
use seprate_core::{ConvexBody, Execution, Levels, ModelParams, Point, Seed, TestKind};
use statrs::distribution::{ContinuousCDF, Normal};

const REPS: u64 = 20_000;
const SEED: u64 = 2024;

fn report(label: &str, ok: bool, detail: &str) {
    println!("criterion {label}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
}

/// Three binomial standard errors at level p over `REPS` replicates.
fn slack(p: f64) -> f64 {
    3.0 * (p * (1.0 - p) / REPS as f64).sqrt()
}

/// The four tests at alpha = beta = 0.05, n = 100.
fn level_configurations() -> Vec<(&'static str, ConfiguredTest)> {
    let levels = Levels::new(0.05, 0.05).unwrap();
    let unit_ball = |d| ConvexBody::ball(Point::zeros(d).unwrap(), 1.0).unwrap();
    let make = |kind, body: ConvexBody| {
        let params = ModelParams::new(body.dim(), 100.0).unwrap();
        ConfiguredTest::new(kind, body, params, levels, None).unwrap()
    };
    vec![
        ("half-space", make(TestKind::HalfSpace, ConvexBody::canonical_half_space(16).unwrap())),
        ("plug-in on orthant(16)", make(TestKind::PlugIn, ConvexBody::orthant(16).unwrap())),
        ("rounded on ball(0,1), d=10", make(TestKind::Rounded, unit_ball(10))),
        ("ball test, d=10", make(TestKind::Ball, unit_ball(10))),
    ]
}

#[test]
fn criterion_01_level_control() {
    let bound = 0.05 + slack(0.05);
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, (name, t)) in level_configurations().into_iter().enumerate() {
        let start = Instant::now();
        let rho = t.guaranteed_separation().unwrap().rho;
        let c = extremal_configuration(t.body(), rho, 100.0).unwrap();
        let e = estimate_errors(&t, &c.null_mu, &c.alt_mu, REPS, SEED + k as u64, Execution::Parallel).unwrap();
        ok &= e.alpha_hat <= bound && start.elapsed().as_secs() < 60;
        detail.push(format!("{name}: {}", e.alpha_hat));
        if t.kind() == TestKind::HalfSpace {
            // exact level of the half-space test on its boundary
            let exact = Normal::new(0.0, 1.0).unwrap().sf(t.threshold() * 10.0);
            ok &= exact <= 0.05 && (e.alpha_hat - exact).abs() <= slack(exact);
            detail.push(format!("half-space exact {exact:.5}"));
        }
    }
    report("1 level control", ok, &format!("bound {bound:.4}; {}", detail.join(", ")));
    assert!(ok);
}

#[test]
fn criterion_02_power_at_guaranteed_separation() {
    let bound = 0.05 + slack(0.05);
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, (name, t)) in level_configurations().into_iter().enumerate() {
        let rho = t.guaranteed_separation().unwrap().rho;
        let c = extremal_configuration(t.body(), rho, 100.0).unwrap();
        let e = estimate_errors(&t, &c.null_mu, &c.alt_mu, REPS, SEED + 10 + k as u64, Execution::Parallel).unwrap();
        ok &= e.beta_hat <= bound;
        detail.push(format!("{name}: beta {} at rho {rho:.4}", e.beta_hat));
    }
    report("2 power at guaranteed separation", ok, &format!("bound {bound:.4}; {}", detail.join(", ")));
    assert!(ok);
}

fn sweep(family: BodyFamily, axis: SweepAxis, values: &[f64], d: usize, n: f64, eta: f64) -> Vec<SweepRow> {
    let base = SweepConfig {
        family,
        test: family.default_test(),
        d,
        n,
        radius: None,
        eta,
        reps: REPS,
        seed: SEED,
        bisect_tol: 0.02,
    };
    rate_sweep(axis, values, &base, Execution::Parallel).unwrap()
}

#[test]
fn criterion_03_half_space_rate() {
    let start = Instant::now();
    let rows = sweep(BodyFamily::HalfSpace, SweepAxis::N, &[100.0, 400.0, 1600.0, 6400.0, 25600.0], 4, 100.0, 0.1);
    let fit = fit_loglog(&rows, SweepAxis::N).unwrap();
    let sandwich = rows.iter().all(|r| r.rho_hat >= two_point_separation(r.n, 0.1).unwrap());
    let ok = (-0.57..=-0.43).contains(&fit.slope)
        && fit.r_squared >= 0.95
        && sandwich
        && start.elapsed().as_secs() < 600;
    report(
        "3 half-space rate",
        ok,
        &format!("slope {:.4}, r^2 {:.4}, above two-point bound: {sandwich}", fit.slope, fit.r_squared),
    );
    assert!(ok);
}

#[test]
fn criterion_04_plug_in_dimension_rate() {
    let rows = sweep(BodyFamily::Orthant, SweepAxis::D, &[8.0, 16.0, 32.0, 64.0, 128.0], 8, 100.0, 0.5);
    let fit = fit_loglog(&rows, SweepAxis::D).unwrap();
    let ok = (0.35..=0.60).contains(&fit.slope) && fit.r_squared >= 0.95;
    report("4 plug-in dimension rate", ok, &format!("slope {:.4}, r^2 {:.4}", fit.slope, fit.r_squared));
    assert!(ok);
}

fn ball_sweep() -> Vec<SweepRow> {
    let base = SweepConfig {
        family: BodyFamily::Ball,
        test: TestKind::Ball,
        d: 16,
        n: 100.0,
        radius: Some(0.05),
        eta: 0.5,
        reps: REPS,
        seed: SEED,
        bisect_tol: 0.02,
    };
    rate_sweep(SweepAxis::R, &[0.05, 0.5, 5.0, 50.0], &base, Execution::Parallel).unwrap()
}

#[test]
fn criterion_05_ball_crossover_order_and_sandwich() {
    let rows = ball_sweep();
    let rho: Vec<f64> = rows.iter().map(|r| r.rho_hat).collect();
    let monotone = rho.windows(2).all(|w| w[1] <= w[0]);
    let sandwich = rows
        .iter()
        .all(|r| r.rho_hat >= r.lower_bound.unwrap() && r.rho_hat <= r.guaranteed);
    let ok = monotone && sandwich;
    report(
        "5 ball crossover (monotone, sandwich)",
        ok,
        &format!("rho_hat {rho:?}, monotone {monotone}, sandwich {sandwich}"),
    );
    assert!(ok);
}

#[test]
fn criterion_05_ball_crossover_halving() {
    let rows = ball_sweep();
    let (first, last) = (rows[0].rho_hat, rows[rows.len() - 1].rho_hat);
    let ok = last <= first / 2.0;
    report("5 ball crossover (halving)", ok, &format!("rho_hat(50) = {last:.4} vs rho_hat(0.05)/2 = {:.4}", first / 2.0));
    assert!(ok, "rho_hat(50) = {last} exceeds rho_hat(0.05)/2 = {}", first / 2.0);
}

#[test]
fn criterion_06_divergence_identities() {
    let start = Instant::now();
    let rows = run_suite(Suite::Divergence, SEED, Execution::Parallel).unwrap();
    let ok = rows.iter().all(|r| r.passed) && rows.len() == 3 && start.elapsed().as_secs() < 60;
    let detail: Vec<String> = rows.iter().map(|r| format!("{}: {}", r.name, r.detail)).collect();
    report("6 divergence identities", ok, &detail.join("; "));
    assert!(ok);
}

#[test]
fn criterion_07_moment_priors() {
    let start = Instant::now();
    let (d, eta) = (42usize, 0.5);
    let p = prior_parameters(d, eta, 1.0, false).unwrap();
    let (nu0, nu1) = construct_moment_priors(p.m, p.b, 512, 1e-8).unwrap();
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let gap = max(moment_gaps(&nu0, &nu1, p.m as u32)).max(max(scaled_moment_gaps(&nu0, &nu1, p.m as u32, p.b)));
    let mass = nu1.mass_at(p.u);
    let tv = tv_distance_1d(&nu0, &nu1, p.sigma, &QuadSpec::default()).unwrap();
    let bound = tv_bound_product(36, 42).unwrap();
    let attempts = 10_000u64;
    let rate = ConditionalPrior::new(nu1, d).unwrap().acceptance_rate(attempts, Seed::new(SEED, 0));
    let floor = 0.9 - 3.0 * (0.9 * 0.1 / attempts as f64).sqrt();
    let ok = p.m == 36
        && gap <= 1e-8
        && mass >= 0.5 - 1e-8
        && d as f64 * (tv.value + tv.error) <= bound
        && rate >= floor
        && start.elapsed().as_secs() < 300;
    report(
        "7 moment priors",
        ok,
        &format!(
            "M {}, max gap {gap:e}, mass at u {mass:.5}, d*TV {:e} vs {bound:.5}, acceptance {rate}",
            p.m,
            d as f64 * tv.value
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_lower_bound_witness() {
    let (d, eta) = (42usize, 0.5);
    let p = prior_parameters(d, eta, 1.0, false).unwrap();
    let (nu0, nu1) = construct_moment_priors(p.m, p.b, 512, 1e-8).unwrap();
    let params = ModelParams::new(d, 1.0).unwrap();
    let test = ConfiguredTest::new(
        TestKind::PlugIn,
        ConvexBody::orthant(d).unwrap(),
        params,
        Levels::from_eta(eta).unwrap(),
        None,
    )
    .unwrap();
    let prior0 = ProductPrior::new(&nu0, d).unwrap();
    let prior1 = ConditionalPrior::new(nu1, d).unwrap();
    let e = bayes_error_of_test(&test, &prior0, &prior1, REPS, SEED, Execution::Parallel).unwrap();
    let ok = e.total >= eta - e.ci_radius();
    report(
        "8 lower-bound witness",
        ok,
        &format!("rho {:.4e}, total Bayes error {} (ci {:e})", p.orthant_rho(), e.total, e.ci_radius()),
    );
    assert!(ok);
}

#[test]
fn criterion_09_geometry_oracles() {
    let geo = run_suite(Suite::Geometry, SEED, Execution::Parallel).unwrap();
    let rounding = run_suite(Suite::Rounding, SEED, Execution::Parallel).unwrap();
    let ok = geo.iter().all(|r| r.passed) && rounding.iter().all(|r| r.consistent());
    let failed: Vec<&str> = geo
        .iter()
        .filter(|r| !r.passed)
        .chain(rounding.iter().filter(|r| !r.consistent()))
        .map(|r| r.name.as_str())
        .collect();
    report("9 geometry oracles", ok, &format!("{} rows, unexpected: {failed:?}", geo.len() + rounding.len()));
    assert!(ok);
}

#[test]
fn criterion_09_spherical_cap_accepted_at_its_own_radius() {
    let cap = BoundaryGraph::spherical_cap(3, 1.0, 0.5).unwrap();
    let c = check_local_rounding(&cap, 1.0, 2000).unwrap();
    report(
        "9 spherical cap at its own R",
        c.ok,
        &format!("max eigenvalue {} vs 1/R = 1, {} violations", c.max_eigenvalue, c.violations.len()),
    );
    assert!(c.ok, "certifier rejects the cap: max eigenvalue {}", c.max_eigenvalue);
}

fn run_cli(args: &[&str], threads: &str) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_seprate"))
        .args(args)
        .env("SEPRATE_THREADS", threads)
        .output()
        .unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let fit = dir.path().join("sweep.fit.json");
    let lb = dir.path().join("lb.json");
    let csv_s = csv.to_str().unwrap();
    let lb_s = lb.to_str().unwrap();
    let sweep = [
        "sweep", "--body", "orthant", "--axis", "d", "--values", "4,8,16,32", "--n", "100", "--eta", "0.5",
        "--reps", "4000", "--seed", "9", "--out", csv_s,
    ];
    let lower = ["lowerbound", "--kind", "orthant", "--d", "42", "--eta", "0.5", "--seed", "9", "--out", lb_s];
    let test = [
        "test", "--body", r#"{"variant":"ball","d":3,"radius":1}"#, "--mu", "1.2,0,0", "--n", "100", "--seed", "9",
    ];
    let check = ["check", "--suite", "concentration", "--seed", "9"];

    let mut runs = Vec::new();
    for threads in ["1", "4", "1", "4"] {
        let mut bytes = Vec::new();
        for args in [&sweep[..], &lower[..], &test[..], &check[..]] {
            let (code, stdout) = run_cli(args, threads);
            bytes.push(format!("{} exit {code}", args[0]).into_bytes());
            bytes.push(stdout);
        }
        bytes.extend([read(&csv), read(&fit), read(&lb)]);
        runs.push(bytes);
    }
    let ok = runs.windows(2).all(|w| w[0] == w[1]);
    report(
        "10 determinism",
        ok,
        &format!("{} outputs compared over SEPRATE_THREADS in {{1, 4}}, repeated", runs[0].len()),
    );
    assert!(ok);
}
