//! Finitely supported priors on the line and the moment-matching pair.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::StreamRng;

/// A probability measure with finitely many atoms `(location, weight)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorRepr", into = "PriorRepr")]
pub struct DiscretePrior {
    atoms: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorRepr {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<PriorRepr> for DiscretePrior {
    type Error = Error;

    fn try_from(r: PriorRepr) -> Result<Self> {
        DiscretePrior::new(r.atoms)
    }
}

impl From<DiscretePrior> for PriorRepr {
    fn from(p: DiscretePrior) -> Self {
        PriorRepr { atoms: p.atoms }
    }
}

impl DiscretePrior {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("prior", "needs at least one atom"));
        }
        for &(loc, w) in &atoms {
            if !loc.is_finite() {
                return Err(invalid("prior", format!("atom location {loc} is not finite")));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(invalid("prior", format!("atom weight {w} is negative or not finite")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("prior", format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(loc: f64) -> Result<Self> {
        Self::new(vec![(loc, 1.0)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Total weight on atoms located exactly at `loc`.
    pub fn mass_at(&self, loc: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == loc).map(|a| a.1).sum()
    }

    /// `sum_i w_i z_i^k`.
    pub fn moment(&self, k: u32) -> f64 {
        self.atoms.iter().map(|&(z, w)| w * z.powi(k as i32)).sum()
    }

    pub fn support_range(&self) -> (f64, f64) {
        let lo = self.atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
        let hi = self.atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn sampler(&self) -> Result<AtomSampler> {
        let index = WeightedIndex::new(self.atoms.iter().map(|a| a.1))
            .map_err(|e| invalid("prior", e.to_string()))?;
        Ok(AtomSampler {
            locations: self.atoms.iter().map(|a| a.0).collect(),
            index,
        })
    }
}

/// Draws atom indices of a [`DiscretePrior`].
#[derive(Debug, Clone)]
pub struct AtomSampler {
    locations: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl AtomSampler {
    pub fn draw_index(&self, rng: &mut StreamRng) -> usize {
        self.index.sample(rng)
    }

    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        self.locations[self.draw_index(rng)]
    }
}

/// `|moment_k(nu1) - moment_k(nu0)|` for `k = 0..=max_k`.
pub fn moment_gaps(nu0: &DiscretePrior, nu1: &DiscretePrior, max_k: u32) -> Vec<f64> {
    (0..=max_k)
        .map(|k| (nu1.moment(k) - nu0.moment(k)).abs())
        .collect()
}

/// Moment gaps of the rescaled measures `z -> z / scale`.
pub fn scaled_moment_gaps(
    nu0: &DiscretePrior,
    nu1: &DiscretePrior,
    max_k: u32,
    scale: f64,
) -> Vec<f64> {
    let rescale = |p: &DiscretePrior| DiscretePrior {
        atoms: p.atoms.iter().map(|&(z, w)| (z / scale, w)).collect(),
    };
    moment_gaps(&rescale(nu0), &rescale(nu1), max_k)
}

/// Default number of grid nodes for [`construct_moment_priors`].
pub const DEFAULT_GRID: usize = 512;
/// Default moment tolerance for [`construct_moment_priors`].
pub const DEFAULT_MOMENT_TOL: f64 = 1e-8;

/// Chebyshev polynomial `T_k(s)` by the three-term recurrence, valid on and
/// slightly beyond `[-1, 1]`.
fn chebyshev(k: usize, s: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, s);
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let next = 2.0 * s * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Builds priors `(nu0, nu1)` that share their first `m` moments, with
/// `nu0` supported on `[-b, 0]` and `nu1` on `[-b, 0]` plus an atom at
/// `u = b / (4 m^2)` carrying at least half the mass.
///
/// A linear program over Chebyshev-Lobatto nodes of `[-b, 0]` maximises the
/// mass at `u` subject to moment equality (in a Chebyshev basis). The LP's
/// optimal support then fixes exact weights: a signed measure on `m + 2`
/// points that annihilates all polynomials of degree `m` is unique up to
/// scale, with weights `1 / prod_{k != j} (x_j - x_k)`.
///
/// `tol` bounds the moment gaps of the priors rescaled to `[-1, 1/(4m^2)]`.
pub fn construct_moment_priors(
    m: usize,
    b: f64,
    grid: usize,
    tol: f64,
) -> Result<(DiscretePrior, DiscretePrior)> {
    if m == 0 {
        return Err(invalid("M", "must be at least 1"));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(invalid("b", format!("must be positive, got {b}")));
    }
    if grid < m + 2 {
        return Err(invalid("grid", format!("needs at least M + 2 = {} nodes", m + 2)));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let u = b / (4.0 * (m * m) as f64);
    let to_cheb = |z: f64| 2.0 * z / b + 1.0;
    let nodes: Vec<f64> = (0..grid)
        .map(|j| {
            let c = (std::f64::consts::PI * j as f64 / (grid - 1) as f64).cos();
            -0.5 * b * (1.0 - c)
        })
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let p: Vec<_> = nodes.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let q: Vec<_> = nodes.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let w = lp.add_var(1.0, (0.0, 1.0));
    lp.add_constraint(p.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    let mut unit: Vec<_> = q.iter().map(|&v| (v, 1.0)).collect();
    unit.push((w, 1.0));
    lp.add_constraint(unit, ComparisonOp::Eq, 1.0);
    let su = to_cheb(u);
    for k in 1..=m {
        let mut row = Vec::with_capacity(2 * grid + 1);
        for (i, &z) in nodes.iter().enumerate() {
            let t = chebyshev(k, to_cheb(z));
            row.push((p[i], t));
            row.push((q[i], -t));
        }
        row.push((w, -chebyshev(k, su)));
        lp.add_constraint(row, ComparisonOp::Eq, 0.0);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::PriorConstruction(format!("{e}; retry with a denser grid")))?;

    let mut support: Vec<(f64, f64)> = nodes
        .iter()
        .enumerate()
        .map(|(i, &z)| (z, sol[p[i]] - sol[q[i]]))
        .filter(|&(_, s)| s.abs() > 1e-10)
        .collect();
    if support.len() != m + 1 {
        return Err(Error::PriorConstruction(format!(
            "LP basis has {} active nodes, expected M + 1 = {}",
            support.len(),
            m + 1
        )));
    }
    support.push((u, -sol[w]));

    // exact annihilating weights on the LP support
    let pts: Vec<f64> = support.iter().map(|s| s.0).collect();
    let mut lambda: Vec<f64> = (0..pts.len())
        .map(|j| {
            let prod: f64 = (0..pts.len())
                .filter(|&k| k != j)
                .map(|k| (pts[j] - pts[k]) / b)
                .product();
            1.0 / prod
        })
        .collect();
    // orient so that the atom at u is on the nu1 side (positive)
    if *lambda.last().expect("support is nonempty") < 0.0 {
        lambda.iter_mut().for_each(|l| *l = -*l);
    }
    // LP signs are (nu0 - nu1); the polished measure is (nu1 - nu0)
    for (l, s) in lambda.iter().zip(&support) {
        if l * s.1 > 0.0 {
            return Err(Error::PriorConstruction(
                "exact weights disagree in sign with the LP solution".into(),
            ));
        }
    }
    let scale: f64 = lambda.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
    let mut nu0 = Vec::new();
    let mut nu1 = Vec::new();
    for (&z, &l) in pts.iter().zip(&lambda) {
        if l < 0.0 {
            nu0.push((z, -l / scale));
        } else {
            nu1.push((z, l / scale));
        }
    }
    let nu0 = DiscretePrior::new(renormalize(nu0))?;
    let nu1 = DiscretePrior::new(renormalize(nu1))?;

    let gaps = scaled_moment_gaps(&nu0, &nu1, m as u32, b);
    let worst = gaps.iter().cloned().fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::PriorConstruction(format!(
            "moment gap {worst:e} exceeds tolerance {tol:e}"
        )));
    }
    let mass = nu1.mass_at(u);
    if mass < 0.5 - tol {
        return Err(Error::PriorConstruction(format!(
            "mass {mass} at u is below 1/2"
        )));
    }
    Ok((nu0, nu1))
}

/// Divides by the (compensated) total so weights sum to one within rounding.
fn renormalize(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    atoms.iter_mut().for_each(|a| a.1 /= total);
    atoms
}
