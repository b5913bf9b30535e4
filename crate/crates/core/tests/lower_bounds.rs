//! End-to-end checks of the lower-bound constructions.

use seprate_core::geometry::ConvexBody;
use seprate_core::lowerbounds::{
    ball_lower_separation, construct_moment_priors, inflated_orthant_rho, moment_gaps, prior_parameters,
    scaled_moment_gaps, tv_bound_product, tv_distance_1d, ConditionalPrior, InflatedBranch,
};
use seprate_core::quad::QuadSpec;
use seprate_core::Seed;

#[test]
fn moment_priors_meet_the_product_tv_bound() {
    for &(d, eta) in &[(42usize, 0.5), (64, 0.3)] {
        let p = prior_parameters(d, eta, 1.0, false).unwrap();
        let (nu0, nu1) = construct_moment_priors(p.m, p.b, 512, 1e-8).unwrap();
        assert!(scaled_moment_gaps(&nu0, &nu1, p.m as u32, p.b).iter().all(|g| *g <= 1e-8));
        assert!(moment_gaps(&nu0, &nu1, p.m as u32).iter().all(|g| *g <= 1e-8));
        assert!(nu0.atoms().iter().all(|a| (-p.b..=0.0).contains(&a.0)));
        assert!(nu1.atoms().iter().all(|a| (-p.b..=0.0).contains(&a.0) || a.0 == p.u));
        assert!(nu1.mass_at(p.u) >= 0.5 - 1e-8);

        let tv = tv_distance_1d(&nu0, &nu1, p.sigma, &QuadSpec::default()).unwrap();
        let bound = tv_bound_product(p.m, d).unwrap();
        assert!(d as f64 * (tv.value + tv.error) <= bound);
        assert!(1.0 - 0.5 * bound >= eta + 1.0 / 9.0 - 1e-6);
    }
}

#[test]
fn conditioned_draws_are_far_from_the_orthant() {
    let p = prior_parameters(42, 0.5, 100.0, false).unwrap();
    let (_, nu1) = construct_moment_priors(p.m, p.b, 512, 1e-8).unwrap();
    let cp = ConditionalPrior::new(nu1, 42).unwrap();
    let orthant = ConvexBody::orthant(42).unwrap();
    for s in 0..500 {
        let mu = cp.sample(Seed::new(21, s)).unwrap();
        assert!(orthant.distance(&mu).unwrap() >= p.orthant_rho() - 1e-15);
    }
}

#[test]
fn inflated_orthant_draws_match_the_distance_formula() {
    let (d, n, radius, eta) = (43usize, 1.0, 0.5, 0.5);
    let p = prior_parameters(d, eta, n, true).unwrap();
    let (_, nu1) = construct_moment_priors(p.m, p.b, 512, 1e-8).unwrap();
    let cp = ConditionalPrior::shifted(nu1, d, radius).unwrap();
    let body = ConvexBody::inflated(ConvexBody::orthant(d).unwrap(), radius).unwrap();
    let floor = (radius * radius + (d - 1) as f64 * p.u * p.u / 3.0).sqrt() - radius;
    for s in 0..500 {
        let mu = cp.sample(Seed::new(22, s)).unwrap();
        assert!(body.distance(&mu).unwrap() >= floor - 1e-9);
    }
    let r = inflated_orthant_rho(d, n, 1.0, eta).unwrap();
    assert_eq!(r.branch, InflatedBranch::Curved);
    let s = 3f64.sqrt() / 28.0 / 216.0;
    assert!((r.s - 2.863_84e-4).abs() < 1e-9);
    assert!((r.rho - 42.0 * s * s / 12.0).abs() < 1e-18);
    assert!((r.rho - 2.870_6e-7).abs() < 1e-11);
}

#[test]
fn ball_lower_bound_decreases_in_radius() {
    let mut last = f64::INFINITY;
    for &r in &[0.05, 0.5, 5.0, 50.0] {
        let v = ball_lower_separation(100.0, 16, r, 0.5).unwrap();
        assert!(v < last);
        last = v;
    }
}
