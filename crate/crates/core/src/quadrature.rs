//! Globally adaptive Gauss–Kronrod (7, 15) quadrature on a finite interval.

// Node and weight tables keep their published digits.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
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

// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<F> {
    pub value: F,
    pub error: F,
    pub intervals: usize,
}

fn gk15<F: Scalar, G: Fn(F) -> F>(f: &G, a: F, b: F) -> (F, F) {
    let center = (a + b) / lit(2.0);
    let half = (b - a) / lit(2.0);
    let fc = f(center);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * lit(WG[j / 2]);
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Piece<F> {
    a: F,
    b: F,
    value: F,
    error: F,
}

impl<F: Scalar> PartialEq for Piece<F> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<F: Scalar> Eq for Piece<F> {}
impl<F: Scalar> PartialOrd for Piece<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Scalar> Ord for Piece<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Integrates `f` over `[a, b]`, bisecting the piece with the largest error estimate until the
/// total estimate drops below `max(abs_tol, rel_tol·|I|)` or `max_intervals` is reached.
pub fn integrate_adaptive<F, G>(
    f: G,
    a: F,
    b: F,
    abs_tol: F,
    rel_tol: F,
    max_intervals: usize,
) -> Result<Integral<F>>
where
    F: Scalar,
    G: Fn(F) -> F,
{
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let target = |v: F| abs_tol.max(rel_tol * v.abs());
    while total_err > target(total) && heap.len() < max_intervals {
        let worst = heap.pop().expect("heap is never empty");
        let mid = (worst.a + worst.b) / lit(2.0);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed the drift of the running totals
    let value: F = heap.iter().map(|p| p.value).sum();
    let error: F = heap.iter().map(|p| p.error).sum();
    if !value.is_finite() || error > target(value) {
        return Err(Error::QuadratureFailure {
            estimate: error.to_f64().unwrap_or(f64::NAN),
            tol: target(value).to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Integral { value, error, intervals: heap.len() })
}
