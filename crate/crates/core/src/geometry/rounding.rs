//! Sampled certification of local rounding for a boundary patch written as
//! the graph of `f: B_{d-1}(0, r) -> [0, inf)` with `f(0) = 0`.
//!
//! The sufficient condition checked is `grad f(0) = 0` and, at every sampled
//! `x != 0`, eigenvalues of the Hessian within `[0, 1/R]`. Passing is a
//! certificate of testing, not a proof.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::norm;

const EIGEN_TOL: f64 = 1e-8;
const GRADIENT_TOL: f64 = 1e-8;

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A boundary patch as a graph over the open ball of radius `patch_radius`
/// in `R^dim`.
pub struct BoundaryGraph {
    dim: usize,
    patch_radius: f64,
    f: ScalarFn,
    grad: Option<VectorFn>,
    hess: Option<MatrixFn>,
}

impl std::fmt::Debug for BoundaryGraph {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("BoundaryGraph")
            .field("dim", &self.dim)
            .field("patch_radius", &self.patch_radius)
            .field("analytic_gradient", &self.grad.is_some())
            .field("analytic_hessian", &self.hess.is_some())
            .finish()
    }
}

impl BoundaryGraph {
    pub fn new(
        dim: usize,
        patch_radius: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(patch_radius.is_finite() && patch_radius > 0.0) {
            return Err(invalid("patch radius", format!("must be positive, got {patch_radius}")));
        }
        let f0 = f(&vec![0.0; dim]);
        if f0.abs() > 1e-12 {
            return Err(invalid("f", format!("must vanish at the origin, f(0) = {f0}")));
        }
        Ok(Self {
            dim,
            patch_radius,
            f: Box::new(f),
            grad: None,
            hess: None,
        })
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(g));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Box::new(h));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patch_radius(&self) -> f64 {
        self.patch_radius
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// `f == 0`: a flat (half-space) boundary.
    pub fn flat(dim: usize, patch_radius: f64) -> Result<Self> {
        Ok(Self::new(dim, patch_radius, |_| 0.0)?
            .with_gradient(move |x| vec![0.0; x.len()])
            .with_hessian(move |x| DMatrix::zeros(x.len(), x.len())))
    }

    /// `f(x) = |x|^2 / (2R)`, Hessian `I / R` everywhere.
    pub fn paraboloid(dim: usize, radius: f64, patch_radius: f64) -> Result<Self> {
        Ok(Self::new(dim, patch_radius, move |x| norm(x).powi(2) / (2.0 * radius))?
            .with_gradient(move |x| x.iter().map(|v| v / radius).collect())
            .with_hessian(move |x| DMatrix::identity(x.len(), x.len()) / radius))
    }

    /// Lower boundary of the ball of radius `R` centred at `(0, R)`:
    /// `f(x) = R - sqrt(R^2 - |x|^2)`, requires `patch_radius < R`.
    pub fn spherical_cap(dim: usize, radius: f64, patch_radius: f64) -> Result<Self> {
        if !(patch_radius < radius) {
            return Err(invalid("patch radius", "must be smaller than the cap radius"));
        }
        let r2 = radius * radius;
        Ok(Self::new(dim, patch_radius, move |x| {
            let s = norm(x).powi(2);
            // R - sqrt(R^2 - s) without cancellation
            s / (radius + (r2 - s).sqrt())
        })?
        .with_gradient(move |x| {
            let w = (r2 - norm(x).powi(2)).sqrt();
            x.iter().map(|v| v / w).collect()
        })
        .with_hessian(move |x| {
            let k = x.len();
            let w2 = r2 - norm(x).powi(2);
            let w = w2.sqrt();
            let xv = DMatrix::from_column_slice(k, 1, x);
            DMatrix::identity(k, k) / w + (&xv * xv.transpose()) / (w2 * w)
        }))
    }
}

/// How Hessians were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianSource {
    Analytic,
    /// Central differences of the analytic gradient.
    GradientDifferences,
    /// Second differences of `f`.
    ValueDifferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Gradient at the origin is not zero.
    Gradient,
    /// Smallest eigenvalue below zero.
    Convexity,
    /// Largest eigenvalue above `1/R`.
    Curvature,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub point: Vec<f64>,
    /// Offending eigenvalue, or the gradient norm for [`ViolationKind::Gradient`].
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundingCertificate {
    pub ok: bool,
    pub radius: f64,
    pub samples: usize,
    pub hessian: HessianSource,
    pub violations: Vec<Violation>,
    /// Largest eigenvalue seen over all samples.
    pub max_eigenvalue: f64,
    /// Whether `f(x) <= R - sqrt(R^2 - |x|^2)` held at every sample, the
    /// conclusion the Hessian condition is sufficient for.
    pub graph_below_ball: bool,
}

/// Checks the local rounding condition against radius `radius` at `samples`
/// low-discrepancy points of the punctured patch.
pub fn check_local_rounding(
    g: &BoundaryGraph,
    radius: f64,
    samples: usize,
) -> Result<RoundingCertificate> {
    if !(radius > 0.0) {
        return Err(invalid("R", format!("must be positive, got {radius}")));
    }
    let origin = vec![0.0; g.dim];
    let mut violations = Vec::new();

    let grad0 = gradient(g, &origin)?;
    let gnorm = norm(&grad0);
    if gnorm > GRADIENT_TOL {
        violations.push(Violation {
            kind: ViolationKind::Gradient,
            point: origin.clone(),
            value: gnorm,
        });
    }

    let source = match (&g.hess, &g.grad) {
        (Some(_), _) => HessianSource::Analytic,
        (None, Some(_)) => HessianSource::GradientDifferences,
        (None, None) => HessianSource::ValueDifferences,
    };
    let upper = 1.0 / radius + EIGEN_TOL;
    let mut max_eigenvalue = f64::NEG_INFINITY;
    let mut graph_below_ball = true;
    for x in halton_ball_points(g.dim, g.patch_radius, samples) {
        let h = hessian(g, &x)?;
        let sym = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues;
        let lo = eig.min();
        let hi = eig.max();
        max_eigenvalue = max_eigenvalue.max(hi);
        if lo < -EIGEN_TOL {
            violations.push(Violation {
                kind: ViolationKind::Convexity,
                point: x.clone(),
                value: lo,
            });
        }
        if hi > upper {
            violations.push(Violation {
                kind: ViolationKind::Curvature,
                point: x.clone(),
                value: hi,
            });
        }
        let s = norm(&x).powi(2);
        if s < radius * radius {
            let cap = s / (radius + (radius * radius - s).sqrt());
            if finite(&x, g.value(&x))? > cap * (1.0 + 1e-12) + 1e-15 {
                graph_below_ball = false;
            }
        } else {
            graph_below_ball = false;
        }
    }
    Ok(RoundingCertificate {
        ok: violations.is_empty(),
        radius,
        samples,
        hessian: source,
        violations,
        max_eigenvalue,
        graph_below_ball,
    })
}

fn finite(x: &[f64], v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluator { point: x.to_vec() })
    }
}

fn eval(g: &BoundaryGraph, x: &[f64]) -> Result<f64> {
    finite(x, g.value(x))
}

fn gradient(g: &BoundaryGraph, x: &[f64]) -> Result<Vec<f64>> {
    let out = match &g.grad {
        Some(grad) => grad(x),
        None => {
            let h = f64::EPSILON.cbrt() * (1.0 + norm(x));
            let mut out = vec![0.0; x.len()];
            let mut y = x.to_vec();
            for i in 0..x.len() {
                y[i] = x[i] + h;
                let fp = eval(g, &y)?;
                y[i] = x[i] - h;
                let fm = eval(g, &y)?;
                y[i] = x[i];
                out[i] = (fp - fm) / (2.0 * h);
            }
            out
        }
    };
    if out.len() != x.len() || out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluator { point: x.to_vec() });
    }
    Ok(out)
}

fn hessian(g: &BoundaryGraph, x: &[f64]) -> Result<DMatrix<f64>> {
    let k = x.len();
    let h = match (&g.hess, &g.grad) {
        (Some(hess), _) => hess(x),
        (None, Some(_)) => {
            let step = f64::EPSILON.cbrt() * (1.0 + norm(x));
            let mut m = DMatrix::zeros(k, k);
            let mut y = x.to_vec();
            for j in 0..k {
                y[j] = x[j] + step;
                let gp = gradient(g, &y)?;
                y[j] = x[j] - step;
                let gm = gradient(g, &y)?;
                y[j] = x[j];
                for i in 0..k {
                    m[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
                }
            }
            m
        }
        (None, None) => {
            let step = f64::EPSILON.sqrt().sqrt() * (1.0 + norm(x));
            let f0 = eval(g, x)?;
            let mut m = DMatrix::zeros(k, k);
            let mut y = x.to_vec();
            for i in 0..k {
                y[i] = x[i] + step;
                let fp = eval(g, &y)?;
                y[i] = x[i] - step;
                let fm = eval(g, &y)?;
                y[i] = x[i];
                m[(i, i)] = (fp - 2.0 * f0 + fm) / (step * step);
                for j in 0..i {
                    let mut corner = |si: f64, sj: f64| -> Result<f64> {
                        y[i] = x[i] + si * step;
                        y[j] = x[j] + sj * step;
                        let v = eval(g, &y);
                        y[i] = x[i];
                        y[j] = x[j];
                        v
                    };
                    let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                        + corner(-1.0, -1.0)?)
                        / (4.0 * step * step);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        }
    };
    if h.nrows() != k || h.ncols() != k || h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluator { point: x.to_vec() });
    }
    Ok(h)
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// First `count` points of a Halton sequence on `[-r, r]^dim` that fall in
/// the open ball of radius `r` minus the origin.
fn halton_ball_points(dim: usize, r: f64, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let x: Vec<f64> = (0..dim)
            .map(|k| {
                let base = PRIMES.get(k).copied().unwrap_or_else(|| nth_prime(k));
                r * (2.0 * radical_inverse(i, base) - 1.0)
            })
            .collect();
        let nx = norm(&x);
        if nx > 0.0 && nx < r {
            out.push(x);
        }
        i += 1;
    }
    out
}

fn nth_prime(k: usize) -> u64 {
    let mut found = 0;
    let mut c = 1u64;
    loop {
        c += 1;
        if (2..c).take_while(|p| p * p <= c).all(|p| c % p != 0) {
            if found == k {
                return c;
            }
            found += 1;
        }
    }
}
