//! Closed convex null hypotheses with projection and distance oracles.
//!
//! Half-spaces, orthants and balls have closed-form projections. A body
//! inflated by a ball projects through its base; intersections are handled
//! with Dykstra's algorithm.

mod rounding;

pub use rounding::{
    check_local_rounding, BoundaryGraph, HessianSource, RoundingCertificate, Violation,
    ViolationKind,
};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::model::{dist, dot, Point};

/// Default tolerance and iteration budget for Dykstra projections.
pub const DYKSTRA_TOL: f64 = 1e-9;
pub const DYKSTRA_MAX_ITER: usize = 100_000;

/// A closed convex subset of `R^d`.
///
/// Use the constructors, which check the invariants (unit normals, positive
/// radii, matching dimensions, a witness inside every intersection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BodyRepr", into = "BodyRepr")]
pub enum ConvexBody {
    /// `{x : <normal, x> <= offset}`.
    HalfSpace { normal: Point, offset: f64 },
    /// `(-inf, 0]^dim`.
    Orthant { dim: usize },
    Ball { center: Point, radius: f64 },
    /// `base + B(0, radius)`.
    Inflated { base: Box<ConvexBody>, radius: f64 },
    Intersection { bodies: Vec<ConvexBody>, witness: Point },
}

impl ConvexBody {
    pub fn half_space(normal: Point, offset: f64) -> Result<Self> {
        let body = ConvexBody::HalfSpace { normal, offset };
        body.validate()?;
        Ok(body)
    }

    /// `R^{d-1} x (-inf, 0]`.
    pub fn canonical_half_space(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        Self::half_space(Point::basis(d, d - 1, 1.0)?, 0.0)
    }

    pub fn orthant(dim: usize) -> Result<Self> {
        let body = ConvexBody::Orthant { dim };
        body.validate()?;
        Ok(body)
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        let body = ConvexBody::Ball { center, radius };
        body.validate()?;
        Ok(body)
    }

    pub fn inflated(base: ConvexBody, radius: f64) -> Result<Self> {
        let body = ConvexBody::Inflated {
            base: Box::new(base),
            radius,
        };
        body.validate()?;
        Ok(body)
    }

    pub fn intersection(bodies: Vec<ConvexBody>, witness: Point) -> Result<Self> {
        let body = ConvexBody::Intersection { bodies, witness };
        body.validate()?;
        Ok(body)
    }

    /// Checks the invariants listed on the type, recursively.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::HalfSpace { normal, offset } => {
                if ((normal.norm() - 1.0).abs()) > 1e-12 {
                    return Err(invalid(
                        "normal",
                        format!("must have unit norm, has {}", normal.norm()),
                    ));
                }
                if !offset.is_finite() {
                    return Err(invalid("offset", "must be finite"));
                }
            }
            ConvexBody::Orthant { dim } => {
                if *dim == 0 {
                    return Err(invalid("d", "must be at least 1"));
                }
            }
            ConvexBody::Ball { radius, .. } => check_radius("radius", *radius)?,
            ConvexBody::Inflated { base, radius } => {
                check_radius("R", *radius)?;
                base.validate()?;
            }
            ConvexBody::Intersection { bodies, witness } => {
                if bodies.is_empty() {
                    return Err(invalid("bodies", "intersection needs at least one body"));
                }
                for b in bodies {
                    b.validate()?;
                    check_dim(witness.dim(), b.dim())?;
                    let gap = b.distance_slice(witness.as_slice())?;
                    if gap > 1e-9 * (1.0 + witness.norm()) {
                        return Err(invalid(
                            "witness",
                            format!("lies at distance {gap:e} from a member body"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::HalfSpace { normal, .. } => normal.dim(),
            ConvexBody::Orthant { dim } => *dim,
            ConvexBody::Ball { center, .. } => center.dim(),
            ConvexBody::Inflated { base, .. } => base.dim(),
            ConvexBody::Intersection { witness, .. } => witness.dim(),
        }
    }

    /// Short variant name as used in JSON.
    pub fn variant_name(&self) -> &'static str {
        match self {
            ConvexBody::HalfSpace { .. } => "halfspace",
            ConvexBody::Orthant { .. } => "orthant",
            ConvexBody::Ball { .. } => "ball",
            ConvexBody::Inflated { .. } => "inflated",
            ConvexBody::Intersection { .. } => "intersection",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bodies always serialize")
    }

    pub fn project(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.dim())?;
        let mut out = vec![0.0; x.dim()];
        self.project_into(x.as_slice(), &mut out)?;
        Point::new(out)
    }

    /// `||x - project(x)||`.
    pub fn distance(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        self.distance_slice(x.as_slice())
    }

    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.distance(x)? <= tol)
    }

    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ConvexBody::HalfSpace { normal, offset } => {
                let n = normal.as_slice();
                let excess = (dot(n, x) - offset).max(0.0);
                for ((o, xi), ni) in out.iter_mut().zip(x).zip(n) {
                    *o = xi - excess * ni;
                }
            }
            ConvexBody::Orthant { .. } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi.min(0.0);
                }
            }
            ConvexBody::Ball { center, radius } => {
                let c = center.as_slice();
                let r = dist(x, c);
                if r <= *radius {
                    out.copy_from_slice(x);
                } else {
                    let s = radius / r;
                    for ((o, xi), ci) in out.iter_mut().zip(x).zip(c) {
                        *o = ci + s * (xi - ci);
                    }
                }
            }
            ConvexBody::Inflated { base, radius } => {
                base.project_into(x, out)?;
                let gap = dist(x, out);
                if gap <= *radius {
                    out.copy_from_slice(x);
                } else {
                    // move from x towards its base projection by gap - R
                    let t = (gap - radius) / gap;
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = xi - t * (xi - *o);
                    }
                }
            }
            ConvexBody::Intersection { bodies, .. } => {
                let p = dykstra_slice(bodies, x, DYKSTRA_TOL, DYKSTRA_MAX_ITER)?;
                out.copy_from_slice(&p);
            }
        }
        Ok(())
    }

    pub(crate) fn distance_slice(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            ConvexBody::HalfSpace { normal, offset } => {
                (dot(normal.as_slice(), x) - offset).max(0.0)
            }
            ConvexBody::Orthant { .. } => x
                .iter()
                .map(|v| v.max(0.0) * v.max(0.0))
                .sum::<f64>()
                .sqrt(),
            ConvexBody::Ball { center, radius } => (dist(x, center.as_slice()) - radius).max(0.0),
            ConvexBody::Inflated { .. } | ConvexBody::Intersection { .. } => {
                let mut p = vec![0.0; x.len()];
                self.project_into(x, &mut p)?;
                dist(x, &p)
            }
        })
    }

    /// A boundary point together with a unit outward normal there; the
    /// canonical null mean for type-I stress and the direction along which
    /// alternatives move away.
    pub fn extremal_boundary(&self) -> Result<(Point, Point)> {
        match self {
            ConvexBody::HalfSpace { normal, offset } => {
                let p = normal.as_slice().iter().map(|v| v * offset).collect();
                Ok((Point::new(p)?, normal.clone()))
            }
            ConvexBody::Orthant { dim } => Ok((Point::zeros(*dim)?, Point::basis(*dim, 0, 1.0)?)),
            ConvexBody::Ball { center, radius } => {
                let mut p = center.as_slice().to_vec();
                p[0] += radius;
                Ok((Point::new(p)?, Point::basis(center.dim(), 0, 1.0)?))
            }
            ConvexBody::Inflated { base, radius } => {
                let (p, n) = base.extremal_boundary()?;
                let q = p
                    .as_slice()
                    .iter()
                    .zip(n.as_slice())
                    .map(|(a, b)| a + radius * b)
                    .collect();
                Ok((Point::new(q)?, n))
            }
            ConvexBody::Intersection { .. } => Err(Error::Unsupported(
                "intersections have no canonical boundary point; pass an explicit mean".into(),
            )),
        }
    }

    /// True for orthants and inflated orthants.
    pub fn is_orthant_based(&self) -> bool {
        match self {
            ConvexBody::Orthant { .. } => true,
            ConvexBody::Inflated { base, .. } => base.is_orthant_based(),
            _ => false,
        }
    }
}

fn check_radius(name: &'static str, r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {r}")))
    }
}

pub fn project(body: &ConvexBody, x: &Point) -> Result<Point> {
    body.project(x)
}

pub fn distance(body: &ConvexBody, x: &Point) -> Result<f64> {
    body.distance(x)
}

/// `dist(x, base + B(0, R)) = max(dist(x, base) - R, 0)`.
pub fn inflated_distance(base: &ConvexBody, radius: f64, x: &Point) -> Result<f64> {
    check_radius("R", radius)?;
    Ok((base.distance(x)? - radius).max(0.0))
}

/// Canonical boundary point of `body` (see [`ConvexBody::extremal_boundary`]).
pub fn worst_null_point(body: &ConvexBody) -> Result<Point> {
    Ok(body.extremal_boundary()?.0)
}

/// Projects `x` onto the intersection of `bodies` with Dykstra's algorithm.
///
/// Stops once a full sweep moves the iterate by less than `tol` and the
/// iterate is within `tol` of every body.
pub fn dykstra_project(
    bodies: &[ConvexBody],
    x: &Point,
    tol: f64,
    max_iter: usize,
) -> Result<Point> {
    if bodies.is_empty() {
        return Err(invalid("bodies", "need at least one body"));
    }
    for b in bodies {
        check_dim(b.dim(), x.dim())?;
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    Point::new(dykstra_slice(bodies, x.as_slice(), tol, max_iter)?)
}

fn dykstra_slice(bodies: &[ConvexBody], x: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let d = x.len();
    let mut y = x.to_vec();
    let mut increments = vec![vec![0.0; d]; bodies.len()];
    let mut shifted = vec![0.0; d];
    let mut proj = vec![0.0; d];
    let mut prev = vec![0.0; d];
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        prev.copy_from_slice(&y);
        for (body, inc) in bodies.iter().zip(increments.iter_mut()) {
            for k in 0..d {
                shifted[k] = y[k] + inc[k];
            }
            body.project_into(&shifted, &mut proj)?;
            for k in 0..d {
                inc[k] = shifted[k] - proj[k];
                y[k] = proj[k];
            }
        }
        change = dist(&prev, &y);
        if change < tol {
            let mut feasible = true;
            for b in bodies {
                if b.distance_slice(&y)? > tol {
                    feasible = false;
                    break;
                }
            }
            if feasible {
                return Ok(y);
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        change,
    })
}

/// JSON shape of a body. Half-spaces and balls accept a bare `d` as
/// shorthand for the canonical half-space and the origin-centred ball.
#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
enum BodyRepr {
    Halfspace {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        normal: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        #[serde(default)]
        offset: f64,
    },
    Orthant {
        d: usize,
    },
    Ball {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        radius: f64,
    },
    Inflated {
        base: Box<BodyRepr>,
        #[serde(rename = "R")]
        radius: f64,
    },
    Intersection {
        bodies: Vec<BodyRepr>,
        witness: Vec<f64>,
    },
}

impl TryFrom<BodyRepr> for ConvexBody {
    type Error = Error;

    fn try_from(repr: BodyRepr) -> Result<Self> {
        match repr {
            BodyRepr::Halfspace { normal, d, offset } => match (normal, d) {
                (Some(n), None) => ConvexBody::half_space(Point::new(n)?, offset),
                (None, Some(d)) => {
                    ConvexBody::half_space(Point::basis(d, d.saturating_sub(1), 1.0)?, offset)
                }
                (Some(n), Some(d)) => {
                    check_dim(d, n.len())?;
                    ConvexBody::half_space(Point::new(n)?, offset)
                }
                (None, None) => Err(Error::Parse("halfspace needs `normal` or `d`".into())),
            },
            BodyRepr::Orthant { d } => ConvexBody::orthant(d),
            BodyRepr::Ball { center, d, radius } => {
                let center = match (center, d) {
                    (Some(c), None) => Point::new(c)?,
                    (None, Some(d)) => Point::zeros(d)?,
                    (Some(c), Some(d)) => {
                        check_dim(d, c.len())?;
                        Point::new(c)?
                    }
                    (None, None) => return Err(Error::Parse("ball needs `center` or `d`".into())),
                };
                ConvexBody::ball(center, radius)
            }
            BodyRepr::Inflated { base, radius } => {
                ConvexBody::inflated(ConvexBody::try_from(*base)?, radius)
            }
            BodyRepr::Intersection { bodies, witness } => {
                let bodies = bodies
                    .into_iter()
                    .map(ConvexBody::try_from)
                    .collect::<Result<Vec<_>>>()?;
                ConvexBody::intersection(bodies, Point::new(witness)?)
            }
        }
    }
}

impl From<ConvexBody> for BodyRepr {
    fn from(body: ConvexBody) -> Self {
        match body {
            ConvexBody::HalfSpace { normal, offset } => BodyRepr::Halfspace {
                normal: Some(normal.into_vec()),
                d: None,
                offset,
            },
            ConvexBody::Orthant { dim } => BodyRepr::Orthant { d: dim },
            ConvexBody::Ball { center, radius } => BodyRepr::Ball {
                center: Some(center.into_vec()),
                d: None,
                radius,
            },
            ConvexBody::Inflated { base, radius } => BodyRepr::Inflated {
                base: Box::new((*base).into()),
                radius,
            },
            ConvexBody::Intersection { bodies, witness } => BodyRepr::Intersection {
                bodies: bodies.into_iter().map(Into::into).collect(),
                witness: witness.into_vec(),
            },
        }
    }
}
