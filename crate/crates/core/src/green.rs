//! The fundamental solution `Psi` of the Laplacian on the n-torus:
//! the defining improper integral of `1 - Theta`, the exact closed forms
//! in one and two dimensions, conditionally convergent Fourier partial
//! sums under several arrangements, and the Mellin-transform lattice zeta
//! function `E(x, s)`.
//!
//! `Psi` solves `Laplacian(Psi) = delta - 1/|T|` with zero mean over the
//! cell, `|T| = (2a)^n`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{MadelungError, Result};
use crate::lattice::{one_minus_big_theta, TorusPoint};
use crate::quad::{adaptive_gk, QuadOutcome, QuadratureConfig};
use crate::special::{jacobi_theta, tail_bound, ThetaArg, ThetaKind};

/// Fixed first panel next to `v = 0`; off-lattice the integrand is flat
/// there (`Theta -> 0` faster than any power), so no finer seeding is
/// needed.
const BOUNDARY_PANEL: f64 = 1e-3;

/// How a Green-function value is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Integrates to zero over the fundamental cell.
    ZeroMean,
    /// Known only up to an additive constant.
    UpToConstant,
}

/// A value of the fundamental solution together with its normalization.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GreenValue {
    pub value: f64,
    pub normalization: Normalization,
    /// The constant that was added to reach zero mean, when one was.
    pub additive_const: Option<f64>,
    pub error_estimate: f64,
}

/// Arrangements for the conditionally convergent Fourier series of `Psi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    /// Symmetric truncation over `max_l |k_l| <= cutoff`, any dimension.
    ExpandingCubes,
    /// Two axis sums first, then quadrant rows; two dimensions only.
    AxisThenQuadrant,
    /// The geometrically convergent one-variable resummation; two
    /// dimensions only. Serves as the planar oracle.
    Resummed1d,
}

/// Integral of `v^{s/2-1} (1 - Theta(x|v))` over `(0, inf)`: the lattice
/// zeta function `E(x, s)` for real `s > 0`.
///
/// Assembly: an exact power-law piece on `[eps_lower, delta]` (the `1`),
/// an adaptive piece for `-Theta` on the same range, an adaptive stretch
/// to `split_v`, then geometric panels until the tail majorant built from
/// [`tail_bound`] drops below the error budget.
fn mellin_integral(
    x: &TorusPoint,
    s: f64,
    cfg: &QuadratureConfig,
    abs_budget: f64,
) -> Result<QuadOutcome> {
    cfg.validate()?;
    if !(s.is_finite() && s > 0.0) {
        return Err(MadelungError::Domain(format!(
            "Mellin exponent s must be positive, got {s}"
        )));
    }
    if x.is_lattice_point() {
        return Err(MadelungError::Singularity(
            "the fundamental solution diverges at lattice points".into(),
        ));
    }
    let n = x.dim();
    let a = x.half_period();
    let theta_tol = 1e-15;
    let p = s / 2.0 - 1.0;
    let share = abs_budget / 4.0;

    let mut value = 0.0;
    let mut error = 0.0;

    let lo = cfg.eps_lower;
    let delta = BOUNDARY_PANEL;
    if lo < delta {
        // Exact integral of v^{s/2-1} * 1.
        value += (delta.powf(s / 2.0) - lo.powf(s / 2.0)) * 2.0 / s;
        // Adaptive integral of v^{s/2-1} * (-Theta); vanishes to all
        // orders at v = 0 for off-lattice x.
        let f = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let one_minus = one_minus_big_theta(x, v, theta_tol).unwrap_or(f64::NAN);
            let theta = 1.0 - one_minus;
            if theta == 0.0 {
                0.0
            } else {
                -v.powf(p) * theta
            }
        };
        let out = adaptive_gk(&f, lo, delta, share, cfg.rel_tol, cfg.max_subdivisions)?;
        value += out.value;
        error += out.error;
    }

    let start = lo.max(delta);
    let integrand = |v: f64| {
        let w = one_minus_big_theta(x, v, theta_tol).unwrap_or(f64::NAN);
        if p == 0.0 {
            w
        } else {
            v.powf(p) * w
        }
    };
    if start < cfg.split_v {
        let out = adaptive_gk(
            &integrand,
            start,
            cfg.split_v,
            share,
            cfg.rel_tol,
            cfg.max_subdivisions,
        )?;
        value += out.value;
        error += out.error;
    }

    // Geometric tail. B(v) <= B(V) exp(-c (v - V)) with c = pi^2/a^2, so
    // integral_V^inf v^p B(v) dv <= 2 B(V) V^p / c once V >= 2p/c. The
    // cutoff V_max is pushed until the integrated bound drops below a
    // tenth of the absolute budget.
    let c = PI * PI / (a * a);
    let cutoff_budget = abs_budget / 10.0;
    let mut v_lo = cfg.split_v.max(start);
    let majorant = |big_v: f64| -> f64 {
        let b = tail_bound(n, a, big_v).unwrap_or(f64::INFINITY);
        2.0 * b * big_v.powf(p) / c
    };
    let mut guard = 0usize;
    while (p > 0.0 && v_lo < 2.0 * p / c) || majorant(v_lo) > cutoff_budget {
        let out = adaptive_gk(
            &integrand,
            v_lo,
            2.0 * v_lo,
            share / 8.0,
            cfg.rel_tol,
            cfg.max_subdivisions,
        )?;
        value += out.value;
        error += out.error;
        v_lo *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(MadelungError::Accuracy {
                value,
                error_estimate: error + majorant(v_lo),
            });
        }
    }
    error += majorant(v_lo);

    Ok(QuadOutcome { value, error })
}

/// The lattice zeta function `E(x, s)` for real `s > 0`;
/// `E(x, 2) = |T| Psi(x)`.
pub fn epstein_mellin(x: &TorusPoint, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(mellin_integral(x, s, cfg, cfg.abs_tol)?.value)
}

/// Zero-mean `Psi(x)` by adaptive quadrature of `1 - Theta` over
/// `(0, inf)`. Fails with a singularity error at lattice points and with
/// an accuracy error when the quadrature budget is exhausted.
pub fn psi_integral(x: &TorusPoint, cfg: &QuadratureConfig) -> Result<GreenValue> {
    let cell = (2.0 * x.half_period()).powi(x.dim() as i32);
    let out = mellin_integral(x, 2.0, cfg, cfg.abs_tol * cell)?;
    let value = out.value / cell;
    let error = out.error / cell;
    Ok(GreenValue {
        value,
        normalization: Normalization::ZeroMean,
        additive_const: None,
        error_estimate: error,
    })
}

/// Exact one-dimensional fundamental solution
/// `Psi(x1) = -a/6 + x1/2 - x1^2/(4a)` on `[0, 2a]`, zero mean and
/// periodic at the endpoints. Arguments outside the cell are reduced.
pub fn psi_1d(x1: f64, a: f64) -> Result<GreenValue> {
    if !(a.is_finite() && a > 0.0) {
        return Err(MadelungError::Domain(format!(
            "half-period a must be positive, got {a}"
        )));
    }
    if !x1.is_finite() {
        return Err(MadelungError::Domain("coordinate must be finite".into()));
    }
    let period = 2.0 * a;
    let mut r = x1 - period * (x1 / period).floor();
    if r < 0.0 {
        r += period;
    }
    let value = -a / 6.0 + r / 2.0 - r * r / (4.0 * a);
    Ok(GreenValue {
        value,
        normalization: Normalization::ZeroMean,
        additive_const: None,
        error_estimate: 0.0,
    })
}

// Zero-mean constants for the planar closed form, keyed by the bits of a.
static PLANAR_CONSTANT: Mutex<Vec<(u64, f64, f64)>> = Mutex::new(Vec::new());

fn planar_raw(x: &TorusPoint) -> Result<f64> {
    let a = x.half_period();
    let c = x.coords();
    let w = Complex64::new(PI * c[0] / (2.0 * a), PI * c[1] / (2.0 * a));
    let t1 = jacobi_theta(ThetaKind::One, &ThetaArg::new(w, 1.0, 1e-15)?)?;
    Ok(t1.norm().ln() / (2.0 * PI) - c[1] * c[1] / (8.0 * a * a))
}

/// Closed-form planar fundamental solution
/// `Psi(x1, x2) = (1/2pi) log|theta1(pi(x1+i x2)/(2a) | i)| - x2^2/(8a^2)`,
/// up to an additive constant. With [`Normalization::ZeroMean`] the
/// constant is fixed once per `a` by matching [`psi_integral`] at the cell
/// center and cached thereafter.
pub fn psi_2d_closed(x: &TorusPoint, normalization: Normalization) -> Result<GreenValue> {
    if x.dim() != 2 {
        return Err(MadelungError::Unsupported(format!(
            "psi_2d_closed needs a two-dimensional point, got n={}",
            x.dim()
        )));
    }
    if x.is_lattice_point() {
        return Err(MadelungError::Singularity(
            "the fundamental solution diverges at lattice points".into(),
        ));
    }
    let raw = planar_raw(x)?;
    match normalization {
        Normalization::UpToConstant => Ok(GreenValue {
            value: raw,
            normalization,
            additive_const: None,
            error_estimate: 0.0,
        }),
        Normalization::ZeroMean => {
            let a = x.half_period();
            let key = a.to_bits();
            let mut cache = PLANAR_CONSTANT.lock().expect("planar constant cache");
            let (constant, err) = match cache.iter().find(|e| e.0 == key) {
                Some(&(_, c, e)) => (c, e),
                None => {
                    let center = TorusPoint::new(&[a, a], a)?;
                    let cfg = QuadratureConfig {
                        abs_tol: 1e-13,
                        rel_tol: 1e-13,
                        max_subdivisions: 800,
                        ..QuadratureConfig::default()
                    };
                    let reference = psi_integral(&center, &cfg)?;
                    let c = reference.value - planar_raw(&center)?;
                    cache.push((key, c, reference.error_estimate));
                    (c, reference.error_estimate)
                }
            };
            Ok(GreenValue {
                value: raw + constant,
                normalization,
                additive_const: Some(constant),
                error_estimate: err,
            })
        }
    }
}

/// Partial sum of the Fourier series of `Psi` under the given arrangement.
///
/// `expanding-cubes` truncates symmetrically in the max norm and works in
/// any dimension; `axis-then-quadrant` accumulates the two axis series
/// first and then quadrant rows (planar only); `resummed-1d` is the
/// one-variable resummation whose terms decay like `exp(-pi k min(x2,
/// 2a-x2)/a)` (planar only) and is exactly zero-mean in the limit.
pub fn psi_fourier_partial(x: &TorusPoint, cutoff: usize, arrangement: Arrangement) -> Result<f64> {
    if cutoff == 0 {
        return Ok(0.0);
    }
    let n = x.dim();
    let a = x.half_period();
    let cell = (2.0 * a).powi(n as i32);
    let prefactor = -a * a / (PI * PI * cell);
    match arrangement {
        Arrangement::ExpandingCubes => {
            let width = 2 * cutoff + 1;
            let points = (width as f64).powi(n as i32);
            if points > 2.5e8 {
                return Err(MadelungError::Domain(format!(
                    "expanding-cubes cutoff {cutoff} in dimension {n} needs {points:.1e} terms"
                )));
            }
            let p = cutoff as i64;
            let mut idx = vec![-p; n];
            let mut sum = crate::util::KahanSum::new();
            loop {
                let k2: i64 = idx.iter().map(|&k| k * k).sum();
                if k2 != 0 {
                    let phase: f64 = idx
                        .iter()
                        .zip(x.coords())
                        .map(|(&k, &xi)| k as f64 * xi)
                        .sum::<f64>()
                        * PI
                        / a;
                    sum.add(phase.cos() / k2 as f64);
                }
                let mut l = 0;
                loop {
                    if l == n {
                        return Ok(prefactor * sum.value());
                    }
                    idx[l] += 1;
                    if idx[l] <= p {
                        break;
                    }
                    idx[l] = -p;
                    l += 1;
                }
            }
        }
        Arrangement::AxisThenQuadrant => {
            if n != 2 {
                return Err(MadelungError::Unsupported(
                    "axis-then-quadrant arrangement is defined for n = 2 only".into(),
                ));
            }
            let (x1, x2) = (x.coords()[0], x.coords()[1]);
            let p = cutoff as i64;
            let mut sum = crate::util::KahanSum::new();
            for k in 1..=p {
                let kf = k as f64;
                sum.add(2.0 * (PI * kf * x1 / a).cos() / (kf * kf));
            }
            for k in 1..=p {
                let kf = k as f64;
                sum.add(2.0 * (PI * kf * x2 / a).cos() / (kf * kf));
            }
            for k1 in 1..=p {
                for k2 in -p..=p {
                    if k2 == 0 {
                        continue;
                    }
                    let k2n = (k1 * k1 + k2 * k2) as f64;
                    let phase = PI * (k1 as f64 * x1 + k2 as f64 * x2) / a;
                    sum.add(2.0 * phase.cos() / k2n);
                }
            }
            Ok(prefactor * sum.value())
        }
        Arrangement::Resummed1d => {
            if n != 2 {
                return Err(MadelungError::Unsupported(
                    "resummed-1d arrangement is defined for n = 2 only".into(),
                ));
            }
            if x.is_lattice_point() {
                return Err(MadelungError::Singularity(
                    "resummed-1d series diverges at lattice points".into(),
                ));
            }
            // Resum along the axis that keeps the terms decaying; the
            // roles of the variables are interchangeable.
            let (x1, x2) = (x.coords()[0], x.coords()[1]);
            let (u, w) = if x2 == 0.0 { (x2, x1) } else { (x1, x2) };
            let mut sum = crate::util::KahanSum::new();
            for k in 1..=cutoff {
                let kf = k as f64;
                let big_a = PI * kf * (a - w).abs() / a;
                let big_b = PI * kf;
                // cosh(A)/sinh(B) without overflow.
                let ratio = (big_a - big_b).exp() * (1.0 + (-2.0 * big_a).exp())
                    / (1.0 - (-2.0 * big_b).exp());
                sum.add((PI * kf * u / a).cos() * ratio / kf);
            }
            let poly = -1.0 / 12.0 + w / (4.0 * a) - w * w / (8.0 * a * a);
            Ok(-sum.value() / (2.0 * PI) + poly)
        }
    }
}
