//! Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_intervals: 4000,
        }
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub evaluations: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        finite &= f1.is_finite() && f2.is_finite();
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    if !finite {
        return Err(Error::Quadrature(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok((value, error))
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest
/// error estimate until the total estimate falls below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<Quadrature> {
    integrate_pieces(f, &[a, b], spec)
}

/// [`integrate`] over `[breaks[0], breaks[last]]` with the adaptive search
/// started from the given partition. Features narrower than a starting
/// segment can be missed by both rules alike, so integrands with narrow
/// peaks need breakpoints at the scale of the peak.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], spec: &QuadSpec) -> Result<Quadrature> {
    if breaks.len() < 2 {
        return Err(invalid("interval", "need at least two breakpoints"));
    }
    if breaks.iter().any(|x| !x.is_finite()) || breaks.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid(
            "interval",
            format!("breakpoints must be finite and increasing, got [{}, {}]", breaks[0], breaks[breaks.len() - 1]),
        ));
    }
    if !(spec.abs_tol >= 0.0 && spec.rel_tol >= 0.0 && spec.max_intervals >= breaks.len() - 1) {
        return Err(invalid("quadrature spec", "tolerances must be nonnegative and the budget cover the partition"));
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        let (value, error) = gauss_kronrod(&f, w[0], w[1])?;
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }
    let mut evaluations = 15 * heap.len();
    loop {
        let total = compensated_sum(heap.iter().map(|s| s.value));
        let err = compensated_sum(heap.iter().map(|s| s.error));
        if err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(Quadrature {
                value: total,
                error: err,
                intervals: heap.len(),
                evaluations,
            });
        }
        if heap.len() >= spec.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} above tolerance after {} intervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature(format!(
                "interval [{}, {}] cannot be subdivided further",
                worst.a, worst.b
            )));
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gauss_kronrod(&f, lo, hi)?;
            heap.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
            });
        }
        evaluations += 30;
    }
}
