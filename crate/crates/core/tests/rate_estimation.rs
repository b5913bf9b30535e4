//! Monte Carlo behaviour of the error estimator and the bisection.

use seprate_core::geometry::ConvexBody;
use seprate_core::ratelab::{
    empirical_separation, estimate_errors, extremal_configuration, rate_sweep, write_csv, BodyFamily,
    SeparationOptions, SweepAxis, SweepConfig,
};
use seprate_core::testkit::{ball_upper_branches, ConfiguredTest};
use seprate_core::{Execution, Levels, ModelParams, TestKind};

fn plugin_orthant(d: usize, n: f64, levels: Levels) -> ConfiguredTest {
    let params = ModelParams::new(d, n).unwrap();
    ConfiguredTest::new(TestKind::PlugIn, ConvexBody::orthant(d).unwrap(), params, levels, None).unwrap()
}

#[test]
fn plugin_power_at_guaranteed_separation() {
    let levels = Levels::new(0.05, 0.05).unwrap();
    let t = plugin_orthant(16, 100.0, levels);
    let rho = t.guaranteed_separation().unwrap().rho;
    let c = extremal_configuration(t.body(), rho, 100.0).unwrap();
    let e = estimate_errors(&t, &c.null_mu, &c.alt_mu, 20_000, 5, Execution::Parallel).unwrap();
    assert!(e.alpha_hat <= 0.05 + e.ci_radius, "{e:?}");
    assert!(e.beta_hat <= 0.05 + e.ci_radius, "{e:?}");
}

#[test]
fn plugin_separation_is_nonincreasing_in_n() {
    let mut last = f64::INFINITY;
    for &n in &[25.0, 100.0, 400.0] {
        let t = plugin_orthant(8, n, Levels::from_eta(0.3).unwrap());
        let opts = SeparationOptions {
            reps: 10_000,
            master: 3,
            ..SeparationOptions::default()
        };
        let r = empirical_separation(&t, 0.3, &opts).unwrap();
        assert!(r.rho_hat <= last, "n={n}");
        last = r.rho_hat;
    }
}

#[test]
fn ball_separation_below_large_radius_guarantee() {
    let (d, n, radius) = (16usize, 100.0, 1e3);
    let params = ModelParams::new(d, n).unwrap();
    let levels = Levels::from_eta(0.5).unwrap();
    let body = ConvexBody::ball(seprate_core::Point::zeros(d).unwrap(), radius).unwrap();
    let t = ConfiguredTest::new(TestKind::Ball, body, params, levels, None).unwrap();
    let opts = SeparationOptions {
        reps: 10_000,
        master: 4,
        ..SeparationOptions::default()
    };
    let r = empirical_separation(&t, 0.5, &opts).unwrap();
    let (_, large) = ball_upper_branches(d, n, radius, &levels).unwrap();
    assert!(r.rho_hat <= large, "{} vs {large}", r.rho_hat);
}

#[test]
fn sweeps_are_reproducible_and_thread_independent() {
    let base = SweepConfig {
        family: BodyFamily::Orthant,
        test: TestKind::PlugIn,
        d: 8,
        n: 100.0,
        radius: None,
        eta: 0.5,
        reps: 4000,
        seed: 17,
        bisect_tol: 0.02,
    };
    let values = [4.0, 8.0, 16.0, 32.0];
    let csv = |exec| {
        let rows = rate_sweep(SweepAxis::D, &values, &base, exec).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        buf
    };
    let a = csv(Execution::Parallel);
    assert_eq!(a, csv(Execution::Parallel));
    assert_eq!(a, csv(Execution::Sequential));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 5);
}
