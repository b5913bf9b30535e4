//! Lower-bound construction for the orthant and the inflated orthant:
//! prior parameters, the product TV bound, one-dimensional TV by
//! quadrature, and sampling from the conditioned alternative prior.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Point, Seed, StreamRng};
use crate::quad::{integrate_pieces, QuadSpec};

use super::priors::{AtomSampler, DiscretePrior};

/// `2 sqrt(2) / (sqrt(17) e)`.
pub fn prior_scale_constant() -> f64 {
    2.0 * 2f64.sqrt() / (17f64.sqrt() * std::f64::consts::E)
}

/// Smallest dimension the orthant construction covers.
pub const MIN_ORTHANT_DIM: usize = 42;

/// Moment order `max(32, ceil(k ln(dim) + 1 + k ln(1.8 / (8/9 - eta))))`
/// with `k = 2 / (1 - ln 2)`, where `dim` is the number of randomised
/// coordinates.
pub fn moment_order(dim: usize, eta: f64) -> Result<usize> {
    check_eta(eta)?;
    if dim < MIN_ORTHANT_DIM {
        return Err(invalid("d", format!("must be at least {MIN_ORTHANT_DIM}, got {dim}")));
    }
    let k = 2.0 / (1.0 - 2f64.ln());
    let raw = k * (dim as f64).ln() + 1.0 + k * (1.8 / (8.0 / 9.0 - eta)).ln();
    Ok((raw.ceil() as usize).max(32))
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 8.0 / 9.0 {
        Ok(())
    } else {
        Err(invalid("eta", format!("must lie in (0, 8/9), got {eta}")))
    }
}

/// Parameters of the moment-matching prior construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorParameters {
    pub d: usize,
    pub eta: f64,
    pub n: f64,
    /// Whether the last coordinate is pinned (inflated orthant).
    pub shifted: bool,
    /// Number of randomised coordinates: `d`, or `d - 1` when shifted.
    pub free_dim: usize,
    pub m: usize,
    pub c: f64,
    pub sigma: f64,
    pub b: f64,
    pub u: f64,
}

impl PriorParameters {
    /// Exact orthant radius `sqrt(d/3) u`.
    pub fn orthant_rho(&self) -> f64 {
        (self.free_dim as f64 / 3.0).sqrt() * self.u
    }

    /// The rounded-down form `(1/28) M^{-3/2} sqrt(d) / sqrt(n)`.
    pub fn orthant_rho_rounded(&self) -> f64 {
        (self.free_dim as f64).sqrt() / (28.0 * (self.m as f64).powf(1.5) * self.n.sqrt())
    }

    /// `s = (sqrt 3 / 28) M^{-3/2} / sqrt(n)` used by the inflated orthant.
    pub fn inflated_s(&self) -> f64 {
        3f64.sqrt() / (28.0 * (self.m as f64).powf(1.5) * self.n.sqrt())
    }
}

/// Prior parameters for dimension `d` at total error `eta` and scaling `n`.
/// `shifted` selects the inflated-orthant variant, which randomises only
/// `d - 1` coordinates and needs `d >= 43`.
pub fn prior_parameters(d: usize, eta: f64, n: f64, shifted: bool) -> Result<PriorParameters> {
    if !(n.is_finite() && n > 0.0) {
        return Err(invalid("n", format!("must be positive, got {n}")));
    }
    let free_dim = if shifted {
        if d <= MIN_ORTHANT_DIM {
            return Err(invalid("d", format!("must be at least {}, got {d}", MIN_ORTHANT_DIM + 1)));
        }
        d - 1
    } else {
        d
    };
    let m = moment_order(free_dim, eta)?;
    let c = prior_scale_constant();
    let sigma = 1.0 / n.sqrt();
    let b = c * (m as f64).sqrt() * sigma;
    Ok(PriorParameters {
        d,
        eta,
        n,
        shifted,
        free_dim,
        m,
        c,
        sigma,
        b,
        u: b / (4.0 * (m * m) as f64),
    })
}

/// Which expression of the inflated-orthant radius is smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InflatedBranch {
    /// `(d - 1) s^2 / R`, large radii.
    Curved,
    /// `sqrt(3) sqrt(d - 1) s`, small radii (orthant-like).
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflatedRho {
    pub rho: f64,
    pub branch: InflatedBranch,
    pub s: f64,
    pub m: usize,
}

/// `(1/12) min((d - 1) s^2 / R, sqrt(3) sqrt(d - 1) s)`.
pub fn inflated_orthant_rho(d: usize, n: f64, radius: f64, eta: f64) -> Result<InflatedRho> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(invalid("R", format!("must be positive, got {radius}")));
    }
    let p = prior_parameters(d, eta, n, true)?;
    let s = p.inflated_s();
    let k = (d - 1) as f64;
    let curved = k * s * s / radius;
    let flat = 3f64.sqrt() * k.sqrt() * s;
    let (v, branch) = if curved <= flat {
        (curved, InflatedBranch::Curved)
    } else {
        (flat, InflatedBranch::Flat)
    };
    Ok(InflatedRho {
        rho: v / 12.0,
        branch,
        s,
        m: p.m,
    })
}

/// `d (1 + 1/(2 sqrt(pi))) (2/(e - 2)) (2/e)^{floor(M/2)}`, an upper bound on
/// the L1 distance between the `d`-fold product mixtures.
pub fn tv_bound_product(m: usize, d: usize) -> Result<f64> {
    if m < 32 {
        return Err(invalid("M", format!("the bound needs M >= 32, got {m}")));
    }
    let e = std::f64::consts::E;
    let lead = 1.0 + 1.0 / (2.0 * std::f64::consts::PI.sqrt());
    Ok(d as f64 * lead * (2.0 / (e - 2.0)) * (2.0 / e).powi((m / 2) as i32))
}

/// L1 distance between Gaussian mixtures, with the quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub value: f64,
    pub error: f64,
}

fn mixture_density(prior: &DiscretePrior, x: f64, sigma: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_677_939_946_059_934_381_87;
    prior
        .atoms()
        .iter()
        .map(|&(z, w)| {
            let t = (x - z) / sigma;
            w * INV_SQRT_2PI / sigma * (-0.5 * t * t).exp()
        })
        .sum()
}

/// `int |f_1 - f_0|` for the mixtures `f_i = nu_i * N(0, sigma^2)`, the L1
/// convention (values in `[0, 2]`).
pub fn tv_distance_1d(
    nu0: &DiscretePrior,
    nu1: &DiscretePrior,
    sigma: f64,
    spec: &QuadSpec,
) -> Result<TvReport> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    let (lo0, hi0) = nu0.support_range();
    let (lo1, hi1) = nu1.support_range();
    let a = lo0.min(lo1) - 10.0 * sigma;
    let b = hi0.max(hi1) + 10.0 * sigma;
    // start from pieces of width at most sigma so no component is skipped
    let pieces = ((b - a) / sigma).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=pieces).map(|k| a + (b - a) * k as f64 / pieces as f64).collect();
    let q = integrate_pieces(
        |x| (mixture_density(nu1, x, sigma) - mixture_density(nu0, x, sigma)).abs(),
        &breaks,
        spec,
    )?;
    Ok(TvReport {
        value: q.value,
        error: q.error,
    })
}

/// Draws `mu` with i.i.d. coordinates from `nu1` until at least a third of
/// them sit on the positive atom `u`.
#[derive(Debug, Clone)]
pub struct ConditionalPrior {
    nu1: DiscretePrior,
    sampler: AtomSampler,
    d: usize,
    pinned_last: Option<f64>,
    u_index: usize,
}

/// Attempts allowed before [`ConditionalPrior::sample`] gives up.
pub const REJECTION_BUDGET: usize = 1000;

impl ConditionalPrior {
    /// All `d` coordinates random.
    pub fn new(nu1: DiscretePrior, d: usize) -> Result<Self> {
        Self::build(nu1, d, None)
    }

    /// First `d - 1` coordinates random, the last fixed at `radius`.
    pub fn shifted(nu1: DiscretePrior, d: usize, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("R", format!("must be positive, got {radius}")));
        }
        if d < 2 {
            return Err(invalid("d", "must be at least 2"));
        }
        Self::build(nu1, d, Some(radius))
    }

    fn build(nu1: DiscretePrior, d: usize, pinned_last: Option<f64>) -> Result<Self> {
        let free = d - usize::from(pinned_last.is_some());
        if free < MIN_ORTHANT_DIM {
            return Err(invalid(
                "d",
                format!("needs at least {MIN_ORTHANT_DIM} random coordinates, got {free}"),
            ));
        }
        let (u_index, &(u, _)) = nu1
            .atoms()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("priors are nonempty");
        if !(u > 0.0) {
            return Err(invalid("nu1", "has no positive atom"));
        }
        if nu1.mass_at(u) < 0.5 - 1e-8 {
            return Err(invalid("nu1", format!("mass {} at u is below 1/2", nu1.mass_at(u))));
        }
        Ok(Self {
            sampler: nu1.sampler()?,
            nu1,
            d,
            pinned_last,
            u_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn free_dim(&self) -> usize {
        self.d - usize::from(self.pinned_last.is_some())
    }

    pub fn positive_atom(&self) -> f64 {
        self.nu1.atoms()[self.u_index].0
    }

    /// One unconditioned draw and whether it meets the conditioning event.
    /// One unconditioned draw into `out`; true when it meets the event.
    pub fn draw_once(&self, rng: &mut StreamRng, out: &mut [f64]) -> bool {
        let free = self.free_dim();
        let mut hits = 0usize;
        for slot in &mut out[..free] {
            let i = self.sampler.draw_index(rng);
            hits += usize::from(i == self.u_index);
            *slot = self.nu1.atoms()[i].0;
        }
        if let Some(r) = self.pinned_last {
            out[free] = r;
        }
        3 * hits >= free
    }

    /// A conditioned draw into `out`, returning the number of attempts.
    pub fn draw_into(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<usize> {
        for attempt in 1..=REJECTION_BUDGET {
            if self.draw_once(rng, out) {
                return Ok(attempt);
            }
        }
        Err(Error::RejectionBudget {
            attempts: REJECTION_BUDGET,
        })
    }

    pub fn sample(&self, seed: Seed) -> Result<Point> {
        let mut mu = vec![0.0; self.d];
        self.draw_into(&mut seed.rng(), &mut mu)?;
        Point::new(mu)
    }

    /// Fraction of unconditioned draws meeting the event, over `attempts`
    /// draws from one stream.
    pub fn acceptance_rate(&self, attempts: u64, seed: Seed) -> f64 {
        let mut rng = seed.rng();
        let mut buf = vec![0.0; self.d];
        let hits = (0..attempts).filter(|_| self.draw_once(&mut rng, &mut buf)).count();
        hits as f64 / attempts as f64
    }
}

/// Draws from `nu1^{(x)d}` conditioned on at least `d/3` coordinates at `u`.
pub fn sample_conditional_prior(nu1: &DiscretePrior, d: usize, seed: Seed) -> Result<Point> {
    ConditionalPrior::new(nu1.clone(), d)?.sample(seed)
}

/// Same with the last coordinate pinned to `radius`.
pub fn sample_conditional_prior_shifted(
    nu1: &DiscretePrior,
    d: usize,
    radius: f64,
    seed: Seed,
) -> Result<Point> {
    ConditionalPrior::shifted(nu1.clone(), d, radius)?.sample(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexBody;

    #[test]
    fn parameter_examples() {
        let c = prior_scale_constant();
        assert!((c - 0.252_363).abs() < 1e-6);
        assert!(c >= 0.25);
        assert_eq!(moment_order(42, 0.5).unwrap(), 36);
        let p = prior_parameters(42, 0.5, 1.0, false).unwrap();
        assert_eq!(p.m, 36);
        assert!((p.b - c * 6.0).abs() < 1e-15);
        assert!((p.u - p.b / (4.0 * 1296.0)).abs() < 1e-18);
        let rounded = 42f64.sqrt() / (28.0 * 216.0);
        assert!((p.orthant_rho_rounded() - rounded).abs() < 1e-15);
        assert!((rounded - 1.0716e-3).abs() < 1e-7);
        assert!(p.orthant_rho() >= p.orthant_rho_rounded());
        assert!(prior_parameters(41, 0.5, 1.0, false).is_err());
        assert!(prior_parameters(42, 0.9, 1.0, false).is_err());
        assert!(prior_parameters(42, 0.5, 1.0, true).is_err());
        assert_eq!(prior_parameters(43, 0.5, 1.0, true).unwrap().m, 36);
        assert!(moment_order(42, 0.01).unwrap() >= 32);
    }

    #[test]
    fn inflated_rho_example() {
        let r = inflated_orthant_rho(43, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(r.m, 36);
        let s = 3f64.sqrt() / 28.0 / 216.0;
        assert!((r.s - s).abs() < 1e-18);
        assert_eq!(r.branch, InflatedBranch::Curved);
        assert!((r.rho - 42.0 * s * s / 12.0).abs() < 1e-20);
        let tiny_r = inflated_orthant_rho(43, 1.0, 1e-9, 0.5).unwrap();
        assert_eq!(tiny_r.branch, InflatedBranch::Flat);
        assert!(inflated_orthant_rho(42, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn tv_bound_values() {
        let e = std::f64::consts::E;
        let one = (1.0 + 1.0 / (2.0 * std::f64::consts::PI.sqrt())) * 2.0 / (e - 2.0) * (2.0 / e).powi(16);
        assert!((tv_bound_product(32, 1).unwrap() - one).abs() < 1e-15);
        assert!((tv_bound_product(32, 7).unwrap() - 7.0 * one).abs() < 1e-15);
        assert!((tv_bound_product(33, 1).unwrap() - one).abs() < 1e-15);
        assert!(tv_bound_product(31, 1).is_err());
    }

    #[test]
    fn tv_of_simple_mixtures() {
        let spec = QuadSpec {
            abs_tol: 1e-11,
            rel_tol: 0.0,
            max_intervals: 4000,
        };
        let p = DiscretePrior::new(vec![(-0.3, 0.4), (0.5, 0.6)]).unwrap();
        assert!(tv_distance_1d(&p, &p, 0.7, &spec).unwrap().value.abs() < 1e-12);
        // two Diracs: 2 (2 Phi(rho / 2) - 1) for sigma = 1, rho = 1
        let a = DiscretePrior::dirac(0.0).unwrap();
        let b = DiscretePrior::dirac(1.0).unwrap();
        let tv = tv_distance_1d(&a, &b, 1.0, &spec).unwrap();
        assert!(tv.error <= 1e-8);
        assert!((tv.value - 0.765_849_2).abs() < 1e-6);
        assert!(tv_distance_1d(&a, &b, 0.0, &spec).is_err());
    }

    #[test]
    fn conditional_sampling() {
        let u = 0.01;
        let nu1 = DiscretePrior::new(vec![(-1.0, 0.5), (u, 0.5)]).unwrap();
        let cp = ConditionalPrior::new(nu1.clone(), 42).unwrap();
        for s in 0..200 {
            let mu = cp.sample(Seed::new(5, s)).unwrap();
            let hits = mu.as_slice().iter().filter(|&&z| z == u).count();
            assert!(hits >= 14);
            let o = ConvexBody::orthant(42).unwrap();
            assert!(o.distance(&mu).unwrap() >= (42.0f64 / 3.0).sqrt() * u - 1e-15);
        }
        let shifted = ConditionalPrior::shifted(nu1.clone(), 43, 2.0).unwrap();
        let mu = shifted.sample(Seed::new(5, 0)).unwrap();
        assert_eq!(mu.dim(), 43);
        assert_eq!(mu[42], 2.0);
        assert!(ConditionalPrior::new(nu1.clone(), 41).is_err());
        let no_mass = DiscretePrior::new(vec![(-1.0, 0.9), (u, 0.1)]).unwrap();
        assert!(ConditionalPrior::new(no_mass, 42).is_err());
        let negative = DiscretePrior::new(vec![(-1.0, 1.0)]).unwrap();
        assert!(ConditionalPrior::new(negative, 42).is_err());
    }

    #[test]
    fn acceptance_rate_matches_binomial_tail() {
        // P(Bin(42, 1/2) >= 14), exact
        let mut tail = 0.0;
        let mut c = 1.0f64;
        for k in 0..=42u32 {
            if k >= 14 {
                tail += c;
            }
            c = c * (42 - k) as f64 / (k + 1) as f64;
        }
        tail /= 2f64.powi(42);
        assert!(tail >= 0.9);
        let nu1 = DiscretePrior::new(vec![(-1.0, 0.5), (0.01, 0.5)]).unwrap();
        let cp = ConditionalPrior::new(nu1, 42).unwrap();
        let reps = 20_000u64;
        let rate = cp.acceptance_rate(reps, Seed::new(3, 0));
        let ci = 3.0 * (tail * (1.0 - tail) / reps as f64).sqrt();
        assert!((rate - tail).abs() <= ci, "rate {rate} vs {tail}");
    }
}
