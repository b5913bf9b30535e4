//! Monte Carlo estimate of the Bayes risk `P_{nu0}(reject) + P_{nu1}(accept)`
//! of a test against a pair of mean priors.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::exec::{self, Execution};
use crate::model::{fill_standard_normal, observe, ModelParams, Point, Seed, StreamRng};
use crate::testkit::ConfiguredTest;

use super::orthant::ConditionalPrior;
use super::priors::{AtomSampler, DiscretePrior};

/// A distribution over mean vectors.
pub trait MeanPrior: Sync {
    fn dim(&self) -> usize;
    /// Writes one draw into `out`, which has length [`MeanPrior::dim`].
    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<()>;
}

/// A point mass.
#[derive(Debug, Clone)]
pub struct DiracPrior(pub Point);

impl MeanPrior for DiracPrior {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn draw(&self, _rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(self.0.as_slice());
        Ok(())
    }
}

/// `d` i.i.d. coordinates from a one-dimensional prior, optionally followed
/// by a pinned coordinate.
#[derive(Debug, Clone)]
pub struct ProductPrior {
    sampler: AtomSampler,
    free: usize,
    pinned_last: Option<f64>,
}

impl ProductPrior {
    pub fn new(nu: &DiscretePrior, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        Ok(Self {
            sampler: nu.sampler()?,
            free: d,
            pinned_last: None,
        })
    }

    /// `nu^{(x)(d-1)} (x) delta_R`.
    pub fn shifted(nu: &DiscretePrior, d: usize, radius: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("d", "must be at least 2"));
        }
        Ok(Self {
            sampler: nu.sampler()?,
            free: d - 1,
            pinned_last: Some(radius),
        })
    }
}

impl MeanPrior for ProductPrior {
    fn dim(&self) -> usize {
        self.free + usize::from(self.pinned_last.is_some())
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        for slot in &mut out[..self.free] {
            *slot = self.sampler.draw(rng);
        }
        if let Some(r) = self.pinned_last {
            out[self.free] = r;
        }
        Ok(())
    }
}

impl MeanPrior for ConditionalPrior {
    fn dim(&self) -> usize {
        ConditionalPrior::dim(self)
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        self.draw_into(rng, out).map(|_| ())
    }
}

/// Minimum replicate count per hypothesis.
pub const MIN_BAYES_REPS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesErrorEstimate {
    /// Rejection frequency under `nu0`.
    pub type_one: f64,
    /// Acceptance frequency under `nu1`.
    pub type_two: f64,
    pub total: f64,
    pub reps: u64,
    /// One binomial standard error of `total`.
    pub std_error: f64,
}

impl BayesErrorEstimate {
    /// `3 * std_error`.
    pub fn ci_radius(&self) -> f64 {
        3.0 * self.std_error
    }
}

/// Estimates `P_{nu0}(reject) + P_{nu1}(accept)` with `reps` replicates per
/// prior. Replicate `i` under prior `h` draws from stream `2 i + h` of
/// `master`. `reject` may use the supplied generator for randomised tests.
pub fn bayes_error_estimate<T>(
    reject: T,
    prior0: &dyn MeanPrior,
    prior1: &dyn MeanPrior,
    params: &ModelParams,
    reps: u64,
    master: u64,
    exec: Execution,
) -> Result<BayesErrorEstimate>
where
    T: Fn(&[f64], &mut StreamRng) -> Result<bool> + Sync + Send,
{
    if reps < MIN_BAYES_REPS {
        return Err(invalid("reps", format!("must be at least {MIN_BAYES_REPS}, got {reps}")));
    }
    let d = params.d();
    check_dim(d, prior0.dim())?;
    check_dim(d, prior1.dim())?;
    let sigma = params.sigma();
    let run = |prior: &dyn MeanPrior, h: u64| {
        exec::count(reps, 3 * d, exec, |i, buf| {
            let (mu, rest) = buf.split_at_mut(d);
            let (eps, x) = rest.split_at_mut(d);
            let mut rng = Seed::new(master, 2 * i + h).rng();
            prior.draw(&mut rng, mu)?;
            fill_standard_normal(&mut rng, eps);
            observe(mu, eps, sigma, x);
            let rejected = reject(x, &mut rng)?;
            Ok(if h == 0 { rejected } else { !rejected })
        })
    };
    let errors0 = run(prior0, 0)?;
    let errors1 = run(prior1, 1)?;
    let r = reps as f64;
    let p0 = errors0 as f64 / r;
    let p1 = errors1 as f64 / r;
    Ok(BayesErrorEstimate {
        type_one: p0,
        type_two: p1,
        total: p0 + p1,
        reps,
        std_error: ((p0 * (1.0 - p0) + p1 * (1.0 - p1)) / r).sqrt(),
    })
}

/// [`bayes_error_estimate`] for one of the implemented tests.
pub fn bayes_error_of_test(
    test: &ConfiguredTest,
    prior0: &dyn MeanPrior,
    prior1: &dyn MeanPrior,
    reps: u64,
    master: u64,
    exec: Execution,
) -> Result<BayesErrorEstimate> {
    bayes_error_estimate(
        |x: &[f64], _: &mut StreamRng| test.rejects_slice(x),
        prior0,
        prior1,
        test.params(),
        reps,
        master,
        exec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dirac(d: usize, v: f64) -> DiracPrior {
        DiracPrior(Point::new(vec![v; d]).unwrap())
    }

    #[test]
    fn degenerate_tests() {
        let params = ModelParams::new(3, 10.0).unwrap();
        let (p0, p1) = (dirac(3, 0.0), dirac(3, 1.0));
        let accept = |_: &[f64], _: &mut StreamRng| Ok(false);
        let e = bayes_error_estimate(accept, &p0, &p1, &params, 1000, 1, Execution::Sequential)
            .unwrap();
        assert_eq!((e.type_one, e.type_two, e.total), (0.0, 1.0, 1.0));
        assert_eq!(e.std_error, 0.0);

        let coin = |_: &[f64], rng: &mut StreamRng| Ok(rng.random_bool(0.5));
        let e = bayes_error_estimate(coin, &p0, &p1, &params, 20_000, 2, Execution::Parallel)
            .unwrap();
        assert!((e.total - 1.0).abs() <= e.ci_radius(), "{e:?}");
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let params = ModelParams::new(2, 4.0).unwrap();
        let nu = DiscretePrior::new(vec![(-0.5, 0.3), (0.2, 0.7)]).unwrap();
        let p0 = ProductPrior::new(&nu, 2).unwrap();
        let p1 = ProductPrior::shifted(&nu, 2, 1.0).unwrap();
        let t = |x: &[f64], _: &mut StreamRng| Ok(x[1] > 0.4);
        let a = bayes_error_estimate(t, &p0, &p1, &params, 5000, 9, Execution::Sequential).unwrap();
        let b = bayes_error_estimate(t, &p0, &p1, &params, 5000, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation() {
        let params = ModelParams::new(3, 1.0).unwrap();
        let t = |_: &[f64], _: &mut StreamRng| Ok(true);
        assert!(bayes_error_estimate(t, &dirac(3, 0.0), &dirac(3, 0.0), &params, 999, 0, Execution::Sequential).is_err());
        assert!(bayes_error_estimate(t, &dirac(2, 0.0), &dirac(3, 0.0), &params, 1000, 0, Execution::Sequential).is_err());
    }

    #[test]
    fn product_prior_draws() {
        let nu = DiscretePrior::new(vec![(-1.0, 0.5), (2.0, 0.5)]).unwrap();
        let p = ProductPrior::shifted(&nu, 4, 7.0).unwrap();
        let mut out = [0.0; 4];
        p.draw(&mut Seed::new(0, 0).rng(), &mut out).unwrap();
        assert_eq!(out[3], 7.0);
        assert!(out[..3].iter().all(|&z| z == -1.0 || z == 2.0));
    }
}
