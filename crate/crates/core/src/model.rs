//! The Gaussian sequence model, seeded sampling and the concentration
//! thresholds every test is calibrated with.

use std::ops::Index;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Random generator used for every replicate stream.
pub type StreamRng = ChaCha8Rng;

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("point", "needs at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(invalid("point", format!("coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn zeros(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    /// `scale * e_i` in dimension `d` (zero-based `i`).
    pub fn basis(d: usize, i: usize, scale: f64) -> Result<Self> {
        if i >= d {
            return Err(invalid("basis index", format!("{i} out of range for d = {d}")));
        }
        let mut v = vec![0.0; d];
        v[i] = scale;
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Dimension `d` and variance scaling `n` (noise variance `1/n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    d: usize,
    n: f64,
}

impl ModelParams {
    pub fn new(d: usize, n: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(invalid("n", format!("must be positive and finite, got {n}")));
        }
        Ok(Self { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// Noise standard deviation `1/sqrt(n)`.
    pub fn sigma(&self) -> f64 {
        1.0 / self.n.sqrt()
    }
}

/// Identifies one random stream: a master seed and a replicate index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
    pub stream: u64,
}

impl Seed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }

    /// A new master seed derived from this one and `tag`, for independent
    /// sub-experiments.
    pub fn derive_master(master: u64, tag: u64) -> u64 {
        splitmix64(master ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fills `out` with standard normal draws from `rng`.
pub fn fill_standard_normal(rng: &mut StreamRng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// `mu + sigma * eps`, written into `out`. Every sampling path goes through
/// here so that replayed streams give bitwise-equal observations.
pub(crate) fn observe(mu: &[f64], eps: &[f64], sigma: f64, out: &mut [f64]) {
    for ((o, m), e) in out.iter_mut().zip(mu).zip(eps) {
        *o = m + sigma * e;
    }
}

/// Draws `X = mu + eps / sqrt(n)` with `eps` taken from `seed`'s stream.
pub fn sample(params: &ModelParams, mu: &Point, seed: Seed) -> Result<Point> {
    check_dim(params.d(), mu.dim())?;
    let mut eps = vec![0.0; params.d()];
    fill_standard_normal(&mut seed.rng(), &mut eps);
    let mut x = vec![0.0; params.d()];
    observe(mu.as_slice(), &eps, params.sigma(), &mut x);
    Point::new(x)
}

fn check_unit_open(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, 1), got {x}")))
    }
}

/// `ln(1/x)` for `x` in `(0, 1)`.
pub fn log_inverse(x: f64) -> Result<f64> {
    check_unit_open("x", x)?;
    Ok(-x.ln())
}

/// `sigma * sqrt(2 ln(1/delta))`: a centred Gaussian with standard deviation
/// `sigma` exceeds it with probability at most `delta`.
pub fn gaussian_tail_threshold(sigma: f64, delta: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    Ok(sigma * (2.0 * log_inverse(delta)?).sqrt())
}

fn chisq_inputs(d: usize, lambda: f64, delta: f64) -> Result<f64> {
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    log_inverse(delta)
}

/// Upper deviation bound for a noncentral chi-square with `d` degrees of
/// freedom and noncentrality `lambda`, exceeded with probability at most
/// `delta`.
pub fn chisq_upper_threshold(d: usize, lambda: f64, delta: f64) -> Result<f64> {
    let v = chisq_inputs(d, lambda, delta)?;
    let d = d as f64;
    Ok(d + lambda + 2.0 * ((d + 2.0 * lambda) * v).sqrt() + 2.0 * v)
}

/// Lower deviation bound, undershot with probability at most `delta`.
/// Not clamped: a negative value is a vacuous but valid bound.
pub fn chisq_lower_threshold(d: usize, lambda: f64, delta: f64) -> Result<f64> {
    let v = chisq_inputs(d, lambda, delta)?;
    let d = d as f64;
    Ok(d + lambda - 2.0 * ((d + 2.0 * lambda) * v).sqrt())
}

/// Two-sided bounds on `sqrt(a + b^2) - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqrtGap {
    pub lower: f64,
    pub value: f64,
    /// `a / (2b)`, or `+inf` when `b <= 0`.
    pub upper: f64,
}

/// `a / (2 sqrt(a + b^2)) <= sqrt(a + b^2) - b <= a / (2b)` for `a > 0`.
pub fn sqrt_gap_bounds(a: f64, b: f64) -> Result<SqrtGap> {
    if !(a.is_finite() && a > 0.0) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    if !b.is_finite() {
        return Err(invalid("b", "must be finite"));
    }
    let root = (a + b * b).sqrt();
    // rationalised form avoids cancellation when b is large and positive
    let value = if b > 0.0 { a / (root + b) } else { root - b };
    let upper = if b > 0.0 { a / (2.0 * b) } else { f64::INFINITY };
    Ok(SqrtGap {
        lower: a / (2.0 * root),
        value,
        upper,
    })
}

/// Lower bound on `b - sqrt(b^2 - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqrtGapLower {
    pub lower: f64,
    pub value: f64,
}

/// `a / (2b) <= b - sqrt(b^2 - a)` for `b > 0` and `a <= b^2`.
pub fn sqrt_gap_lower(a: f64, b: f64) -> Result<SqrtGapLower> {
    if !(b.is_finite() && b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    if !a.is_finite() || a > b * b {
        return Err(invalid("a", format!("must satisfy a <= b^2, got a = {a}, b = {b}")));
    }
    Ok(SqrtGapLower {
        lower: a / (2.0 * b),
        value: a / (b + (b * b - a).sqrt()),
    })
}
