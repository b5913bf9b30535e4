//! The four tests and the separation radius at which each is guaranteed to
//! keep its type-II error below `beta`.
//!
//! | test       | statistic              | threshold                                        |
//! |------------|------------------------|--------------------------------------------------|
//! | half-space | `<normal, X> - offset` | `sqrt(2 v_delta / n)`                            |
//! | plug-in    | `dist(X, C)`           | `sqrt(d/n + 2 sqrt(d v_delta)/n + 2 v_delta/n)`  |
//! | rounded    | `dist(X, C)`           | see [`rounded_threshold`]                        |
//! | ball       | `|X - z|^2 - R^2`      | see [`ball_threshold`]                           |
//!
//! Here `v_x = ln(1/x)` and `delta = min(alpha, beta)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::ConvexBody;
use crate::model::{dist, dot, log_inverse, ModelParams, Point};

/// Outcome of one test application. `reject` iff `statistic >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub reject: bool,
    pub statistic: f64,
    pub threshold: f64,
}

impl TestOutcome {
    pub fn decide(statistic: f64, threshold: f64) -> Self {
        Self {
            reject: statistic >= threshold,
            statistic,
            threshold,
        }
    }
}

/// Type-I level `alpha` and type-II level `beta`, both in `(0, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    alpha: f64,
    beta: f64,
}

impl Levels {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 0.5) {
                return Err(invalid(name, format!("must lie in (0, 1/2), got {v}")));
            }
        }
        Ok(Self { alpha, beta })
    }

    /// `alpha = beta = eta / 2`.
    pub fn from_eta(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid("eta", format!("must lie in (0, 1), got {eta}")));
        }
        Self::new(eta / 2.0, eta / 2.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `min(alpha, beta)`.
    pub fn delta(&self) -> f64 {
        self.alpha.min(self.beta)
    }

    /// `alpha + beta`.
    pub fn eta(&self) -> f64 {
        self.alpha + self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    HalfSpace,
    PlugIn,
    Rounded,
    Ball,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        TestKind::HalfSpace,
        TestKind::PlugIn,
        TestKind::Rounded,
        TestKind::Ball,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::HalfSpace => "half-space",
            TestKind::PlugIn => "plug-in",
            TestKind::Rounded => "rounded",
            TestKind::Ball => "ball",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "half-space" | "halfspace" => Ok(TestKind::HalfSpace),
            "plug-in" | "plugin" => Ok(TestKind::PlugIn),
            "rounded" => Ok(TestKind::Rounded),
            "ball" => Ok(TestKind::Ball),
            other => Err(Error::Parse(format!(
                "unknown test kind `{other}` (expected half-space, plug-in, rounded or ball)"
            ))),
        }
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

/// `sqrt(2 v_delta / n)`.
pub fn halfspace_threshold(n: f64, delta: f64) -> Result<f64> {
    check_positive("n", n)?;
    Ok((2.0 * log_inverse(delta)? / n).sqrt())
}

/// `tau_delta = d/n + (2/n) sqrt(d v_delta) + (2/n) v_delta`, the squared
/// plug-in threshold.
pub fn plugin_tau(d: usize, n: f64, delta: f64) -> Result<f64> {
    check_positive("n", n)?;
    let v = log_inverse(delta)?;
    let d = d as f64;
    Ok(d / n + 2.0 / n * (d * v).sqrt() + 2.0 / n * v)
}

/// `sqrt(2 v_{alpha/4} / n) + d/(2nR) + (2/(nR)) sqrt(d v_{alpha/2}) + v_{alpha/2}/(nR)`.
/// `radius` may be infinite (a flat boundary).
pub fn rounded_threshold(d: usize, n: f64, radius: f64, alpha: f64) -> Result<f64> {
    check_positive("n", n)?;
    check_positive("R", radius)?;
    let v4 = log_inverse(alpha / 4.0)?;
    let v2 = log_inverse(alpha / 2.0)?;
    let d = d as f64;
    let nr = n * radius;
    Ok((2.0 * v4 / n).sqrt() + d / (2.0 * nr) + 2.0 / nr * (d * v2).sqrt() + v2 / nr)
}

/// `d/n + 2 sqrt((d/n^2 + 2R^2/n) v_alpha) + 2 v_alpha / n`.
pub fn ball_threshold(d: usize, n: f64, radius: f64, alpha: f64) -> Result<f64> {
    check_positive("n", n)?;
    check_positive("R", radius)?;
    let v = log_inverse(alpha)?;
    let d = d as f64;
    Ok(d / n + 2.0 * ((d / (n * n) + 2.0 * radius * radius / n) * v).sqrt() + 2.0 * v / n)
}

/// Whether `d >= ln(2 / eta)`, under which the ball test's type-II bound is
/// monotone in `|mu|`.
pub fn ball_side_condition(d: usize, eta: f64) -> bool {
    d as f64 >= (2.0 / eta).ln()
}

pub fn halfspace_test(params: &ModelParams, x: &Point, levels: &Levels) -> Result<TestOutcome> {
    check_dim(params.d(), x.dim())?;
    let tau = halfspace_threshold(params.n(), levels.delta())?;
    Ok(TestOutcome::decide(x[x.dim() - 1], tau))
}

pub fn plugin_test(
    body: &ConvexBody,
    params: &ModelParams,
    x: &Point,
    levels: &Levels,
) -> Result<TestOutcome> {
    check_dim(params.d(), x.dim())?;
    let tau = plugin_tau(params.d(), params.n(), levels.delta())?;
    Ok(TestOutcome::decide(body.distance(x)?, tau.sqrt()))
}

pub fn rounded_test(
    body: &ConvexBody,
    radius: f64,
    params: &ModelParams,
    x: &Point,
    alpha: f64,
) -> Result<TestOutcome> {
    check_dim(params.d(), x.dim())?;
    let tau = rounded_threshold(params.d(), params.n(), radius, alpha)?;
    Ok(TestOutcome::decide(body.distance(x)?, tau))
}

pub fn ball_test(
    center: &Point,
    radius: f64,
    params: &ModelParams,
    x: &Point,
    alpha: f64,
) -> Result<TestOutcome> {
    check_dim(params.d(), x.dim())?;
    check_dim(params.d(), center.dim())?;
    let tau = ball_threshold(params.d(), params.n(), radius, alpha)?;
    let r = dist(x.as_slice(), center.as_slice());
    Ok(TestOutcome::decide(r * r - radius * radius, tau))
}

/// Which expression of the ball upper bound attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallBranch {
    /// `d^{1/4} / sqrt(n)` scaling, small radii.
    QuarterPower,
    /// `sqrt(d) / (nR)` scaling, large radii.
    LargeRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteedSeparation {
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<BallBranch>,
}

/// Both expressions of the ball upper bound at levels `(alpha, beta)`. With
/// `alpha = beta = eta/2` these are
/// `2 sqrt2 d^{1/4} sqrt(v/n) + 3 sqrt(2v/n)` and
/// `2 sqrt(d) sqrt(v) / (nR + 2 sqrt(n v)) + 3 sqrt(2v/n)`, `v = v_{eta/2}`.
pub fn ball_upper_branches(d: usize, n: f64, radius: f64, levels: &Levels) -> Result<(f64, f64)> {
    check_positive("n", n)?;
    check_positive("R", radius)?;
    let sa = log_inverse(levels.alpha())?.sqrt();
    let sb = log_inverse(levels.beta())?.sqrt();
    let d = d as f64;
    let tail = (2.0 / n).sqrt() * (sa + 2.0 * sb);
    let quarter = 2f64.sqrt() * d.powf(0.25) / n.sqrt() * (sa + sb) + tail;
    let large = d.sqrt() / (n * radius + 2.0 * n.sqrt() * sa) * (sa + sb) + tail;
    Ok((quarter, large))
}

/// Radius at which the test of kind `kind` has type-II error at most `beta`.
/// `radius` is the rounding radius (rounded test) or the ball radius (ball
/// test) and is ignored otherwise.
pub fn guaranteed_separation(
    kind: TestKind,
    params: &ModelParams,
    radius: Option<f64>,
    levels: &Levels,
) -> Result<GuaranteedSeparation> {
    let (d, n) = (params.d(), params.n());
    let need_radius = || radius.ok_or_else(|| invalid("R", format!("required by the {kind} test")));
    let plain = |rho| GuaranteedSeparation { rho, branch: None };
    Ok(match kind {
        TestKind::HalfSpace => plain(2.0 * halfspace_threshold(n, levels.delta())?),
        TestKind::PlugIn => plain(2.0 * plugin_tau(d, n, levels.delta())?.sqrt()),
        TestKind::Rounded => {
            let tau = rounded_threshold(d, n, need_radius()?, levels.alpha())?;
            plain(tau + (2.0 * log_inverse(levels.beta())? / n).sqrt())
        }
        TestKind::Ball => {
            let (quarter, large) = ball_upper_branches(d, n, need_radius()?, levels)?;
            if quarter <= large {
                GuaranteedSeparation {
                    rho: quarter,
                    branch: Some(BallBranch::QuarterPower),
                }
            } else {
                GuaranteedSeparation {
                    rho: large,
                    branch: Some(BallBranch::LargeRadius),
                }
            }
        }
    })
}

/// A test bound to a body, model and levels, with its threshold computed
/// once. This is what the Monte Carlo code evaluates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfiguredTest {
    kind: TestKind,
    body: ConvexBody,
    params: ModelParams,
    levels: Levels,
    radius: Option<f64>,
    threshold: f64,
}

impl ConfiguredTest {
    /// `radius` overrides the rounding radius of the rounded test; when it
    /// is `None` it is read from the body (ball radius, inflation radius, or
    /// infinity for a half-space).
    pub fn new(
        kind: TestKind,
        body: ConvexBody,
        params: ModelParams,
        levels: Levels,
        radius: Option<f64>,
    ) -> Result<Self> {
        check_dim(params.d(), body.dim())?;
        let (n, d) = (params.n(), params.d());
        let (radius, threshold) = match kind {
            TestKind::HalfSpace => {
                if !matches!(body, ConvexBody::HalfSpace { .. }) {
                    return Err(Error::Unsupported(format!(
                        "the half-space test needs a half-space body, got {}",
                        body.variant_name()
                    )));
                }
                (None, halfspace_threshold(n, levels.delta())?)
            }
            TestKind::PlugIn => (None, plugin_tau(d, n, levels.delta())?.sqrt()),
            TestKind::Rounded => {
                let r = match radius {
                    Some(r) => r,
                    None => natural_rounding_radius(&body)?,
                };
                (Some(r), rounded_threshold(d, n, r, levels.alpha())?)
            }
            TestKind::Ball => {
                let ConvexBody::Ball { radius: r, .. } = &body else {
                    return Err(Error::Unsupported(format!(
                        "the ball test needs a ball body, got {}",
                        body.variant_name()
                    )));
                };
                (Some(*r), ball_threshold(d, n, *r, levels.alpha())?)
            }
        };
        Ok(Self {
            kind,
            body,
            params,
            levels,
            radius,
            threshold,
        })
    }

    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn levels(&self) -> &Levels {
        &self.levels
    }

    /// Rounding radius (rounded test) or ball radius (ball test).
    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub(crate) fn statistic_slice(&self, x: &[f64]) -> Result<f64> {
        match (&self.kind, &self.body) {
            (TestKind::HalfSpace, ConvexBody::HalfSpace { normal, offset }) => {
                Ok(dot(normal.as_slice(), x) - offset)
            }
            (TestKind::Ball, ConvexBody::Ball { center, radius }) => {
                let r = dist(x, center.as_slice());
                Ok(r * r - radius * radius)
            }
            _ => self.body.distance_slice(x),
        }
    }

    pub(crate) fn rejects_slice(&self, x: &[f64]) -> Result<bool> {
        Ok(self.statistic_slice(x)? >= self.threshold)
    }

    pub fn outcome(&self, x: &Point) -> Result<TestOutcome> {
        check_dim(self.params.d(), x.dim())?;
        Ok(TestOutcome::decide(
            self.statistic_slice(x.as_slice())?,
            self.threshold,
        ))
    }

    pub fn guaranteed_separation(&self) -> Result<GuaranteedSeparation> {
        guaranteed_separation(self.kind, &self.params, self.radius, &self.levels)
    }
}

fn natural_rounding_radius(body: &ConvexBody) -> Result<f64> {
    match body {
        ConvexBody::HalfSpace { .. } => Ok(f64::INFINITY),
        ConvexBody::Ball { radius, .. } | ConvexBody::Inflated { radius, .. } => Ok(*radius),
        other => Err(Error::Unsupported(format!(
            "no rounding radius known for a {} body; pass one explicitly",
            other.variant_name()
        ))),
    }
}
