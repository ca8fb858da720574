//! Adaptive Gauss-Kronrod quadrature on finite panels.
//!
//! The improper integrals over the modular parameter are assembled in
//! `green` and `madelung` from finite panels: a fixed boundary-layer panel
//! near `v = 0`, an adaptive stretch up to `split_v`, and geometric panels
//! `[V, 2V]` beyond it until the analytic tail majorant falls below the
//! requested tolerance.

use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

use crate::error::{MadelungError, Result};
use crate::util::KahanSum;

/// Controls for the improper-integral quadratures over `(0, inf)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Lower cutoff; 0 is allowed whenever the integrand is integrable.
    pub eps_lower: f64,
    /// Where the geometric tail policy takes over. At least 1.
    pub split_v: f64,
    /// Absolute tolerance.
    pub abs_tol: f64,
    /// Relative tolerance.
    pub rel_tol: f64,
    /// Panel-subdivision budget per finite integral.
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            eps_lower: 0.0,
            split_v: 1.0,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_subdivisions: 400,
        }
    }
}

impl QuadratureConfig {
    /// A looser preset for bulk evaluations such as potential grids.
    pub fn fast() -> Self {
        QuadratureConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_subdivisions: 200,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_lower.is_finite() && self.eps_lower >= 0.0) {
            return Err(MadelungError::Domain(
                "eps_lower must be nonnegative".into(),
            ));
        }
        if !(self.split_v.is_finite() && self.split_v >= 1.0) {
            return Err(MadelungError::Domain("split_v must be at least 1".into()));
        }
        for (name, t) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(t.is_finite() && t > 0.0 && t < 1.0) {
                return Err(MadelungError::Domain(format!(
                    "{name} must lie in (0, 1), got {t}"
                )));
            }
        }
        if self.max_subdivisions == 0 {
            return Err(MadelungError::Domain(
                "max_subdivisions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Value and error estimate of one finite integral.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadOutcome {
    pub value: f64,
    pub error: f64,
}

// 15-point Kronrod abscissae / weights and the embedded 7-point Gauss
// weights (QUADPACK dqk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_119,
    0.417_959_183_673_469_4,
];

/// One 15-point Gauss-Kronrod panel. Returns (kronrod, error_estimate,
/// integral of |f|).
fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);

    let mut fv = [0.0f64; 15];
    fv[7] = f_center;
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;
    let mut res_abs = kronrod.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[14 - j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let raw_err = ((kronrod - gauss) * half).abs();
    res_abs *= half.abs();
    res_asc *= half.abs();

    // QUADPACK error rescaling.
    let mut err = raw_err;
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if floor > err {
        err = floor;
    }
    (kronrod * half, err, res_abs)
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.lo == other.lo
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Worst error first; break ties on the left endpoint so the
        // subdivision sequence is deterministic.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Adaptive Gauss-Kronrod integration of `f` over `[lo, hi]`.
///
/// Splits the worst panel until the summed error estimate satisfies
/// `max(abs_tol, rel_tol * |value|)` or the subdivision budget runs out,
/// in which case an accuracy error carrying the best estimate is returned.
pub(crate) fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadOutcome> {
    if hi <= lo || !(hi - lo).is_finite() {
        return Ok(QuadOutcome {
            value: 0.0,
            error: 0.0,
        });
    }
    let (value, error, resabs) = gk15(f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        lo,
        hi,
        value,
        error,
        resabs,
    });
    let mut total_value = value;
    let mut total_error = error;
    let mut total_resabs = resabs;
    let mut splits = 0usize;

    // Tolerances below the accumulated-roundoff floor are unreachable.
    let target = |val: f64, res: f64| {
        abs_tol
            .max(rel_tol * val.abs())
            .max(50.0 * f64::EPSILON * res)
    };

    while total_error > target(total_value, total_resabs) {
        if splits >= max_subdivisions {
            let (v, e) = heap_totals(&heap);
            return Err(MadelungError::Accuracy {
                value: v,
                error_estimate: e,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Panel at floating-point resolution; accept its estimate.
            let (v, e) = heap_totals(&heap);
            return Ok(QuadOutcome {
                value: v + worst.value,
                error: e + worst.error,
            });
        }
        let (lv, le, lr) = gk15(f, worst.lo, mid);
        let (rv, re, rr) = gk15(f, mid, worst.hi);
        total_value += lv + rv - worst.value;
        total_error += le + re - worst.error;
        total_resabs += lr + rr - worst.resabs;
        heap.push(Panel {
            lo: worst.lo,
            hi: mid,
            value: lv,
            error: le,
            resabs: lr,
        });
        heap.push(Panel {
            lo: mid,
            hi: worst.hi,
            value: rv,
            error: re,
            resabs: rr,
        });
        splits += 1;
    }

    let (v, e) = heap_totals(&heap);
    Ok(QuadOutcome { value: v, error: e })
}

/// Recompute totals with compensated summation in a fixed order.
fn heap_totals(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut v = KahanSum::new();
    let mut e = KahanSum::new();
    for p in panels {
        v.add(p.value);
        e.add(p.error);
    }
    (v.value(), e.value())
}
