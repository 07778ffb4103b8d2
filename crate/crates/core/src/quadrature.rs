//! Globally adaptive Gauss–Kronrod (7, 15) quadrature of complex integrands.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

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

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureControl {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureControl {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: C64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: C64,
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

fn gauss_kronrod<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * w;
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).norm(),
    }
}

/// `∫_a^b f(x) dx`, bisecting the worst interval until the summed error
/// estimate drops below `control.abs_tol`.
pub fn integrate<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, control: &QuadratureControl) -> Result<QuadratureResult> {
    if a == b {
        return Ok(QuadratureResult { value: C64::new(0.0, 0.0), error: 0.0, intervals: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut heap = BinaryHeap::new();
    let first = gauss_kronrod(&mut f, lo, hi);
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);

    loop {
        if error <= control.abs_tol {
            // the running sum can cancel badly after a huge first estimate
            error = heap.iter().map(|s| s.error).sum();
            if error <= control.abs_tol {
                break;
            }
        }
        if heap.len() >= control.max_intervals {
            return Err(Error::Quadrature { estimate: error, requested: control.abs_tol });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature { estimate: error, requested: control.abs_tol });
        }
        let left = gauss_kronrod(&mut f, worst.a, mid);
        let right = gauss_kronrod(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // recompute from the pieces to avoid drift from incremental updates
    let value: C64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadratureResult { value: value * sign, error, intervals: heap.len() })
}

/// Integrates over consecutive breakpoints, splitting the tolerance evenly.
pub fn integrate_piecewise<F: FnMut(f64) -> C64>(
    mut f: F,
    breakpoints: &[f64],
    control: &QuadratureControl,
) -> Result<QuadratureResult> {
    let pieces = breakpoints.len().saturating_sub(1).max(1);
    let sub = QuadratureControl { abs_tol: control.abs_tol / pieces as f64, ..*control };
    let mut out = QuadratureResult { value: C64::new(0.0, 0.0), error: 0.0, intervals: 0 };
    for w in breakpoints.windows(2) {
        let r = integrate(&mut f, w[0], w[1], &sub)?;
        out.value += r.value;
        out.error += r.error;
        out.intervals += r.intervals;
    }
    Ok(out)
}
