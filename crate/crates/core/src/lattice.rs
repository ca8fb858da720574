//! The n-dimensional theta function `Theta(x|v)` on the flat torus
//! `R^n / (2a Z)^n`, with the cancellation-controlled `1 - Theta` used by
//! the Green-function integrals, a heat-equation residual diagnostic, and
//! the collapsed alternating cell sum.
//!
//! `Theta` is always evaluated as the product of one-dimensional theta3
//! factors,
//!
//! ```text
//! Theta(x|v) = prod_l theta3( pi x_l / (2a) | i pi v / a^2 ),
//! ```
//!
//! never as the n-dimensional lattice sum, which costs O(K^n) instead of
//! O(n K). The lattice-sum form survives only in test oracles.

use std::f64::consts::PI;

use crate::error::{MadelungError, Result};
use crate::special;

/// Relative snap tolerance for canonical coordinate reduction.
const SNAP_REL: f64 = 1e-12;

/// A point of the flat torus with hypercubic period lattice `(2a Z)^n`.
///
/// Coordinates are stored canonically reduced to `[0, 2a)`, with
/// coordinates within `1e-12 * a` of the lattice snapped to zero so that
/// singularity detection stays deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint {
    coords: Vec<f64>,
    a: f64,
    on_lattice: bool,
}

impl TorusPoint {
    pub fn new(coords: &[f64], a: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(MadelungError::Domain(
                "torus point needs dimension n >= 1".into(),
            ));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(MadelungError::Domain(format!(
                "half-period a must be positive, got {a}"
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(MadelungError::Domain(
                "torus coordinates must be finite".into(),
            ));
        }
        let period = 2.0 * a;
        let snap = SNAP_REL * a;
        let reduced: Vec<f64> = coords
            .iter()
            .map(|&c| {
                let mut r = c - period * (c / period).floor();
                if r < 0.0 {
                    r += period;
                }
                if r < snap || period - r < snap {
                    r = 0.0;
                }
                r
            })
            .collect();
        let on_lattice = reduced.iter().all(|&r| r == 0.0);
        Ok(TorusPoint {
            coords: reduced,
            a,
            on_lattice,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn half_period(&self) -> f64 {
        self.a
    }

    /// Canonically reduced coordinates, each in `[0, 2a)`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_lattice_point(&self) -> bool {
        self.on_lattice
    }

    /// The point displaced by `delta`, re-reduced.
    pub fn displaced(&self, delta: &[f64]) -> Result<TorusPoint> {
        if delta.len() != self.coords.len() {
            return Err(MadelungError::Domain(format!(
                "displacement dimension {} does not match point dimension {}",
                delta.len(),
                self.coords.len()
            )));
        }
        let moved: Vec<f64> = self.coords.iter().zip(delta).map(|(c, d)| c + d).collect();
        TorusPoint::new(&moved, self.a)
    }

    /// Geodesic distance on the torus (per-axis wrap to `<= a`).
    pub fn distance_to(&self, other: &TorusPoint) -> f64 {
        assert_eq!(
            self.dim(),
            other.dim(),
            "torus points of different dimension"
        );
        assert!(
            (self.a - other.a).abs() <= f64::EPSILON * self.a.abs(),
            "torus points with different half-periods"
        );
        let period = 2.0 * self.a;
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&p, &q)| {
                let d = (p - q).abs();
                let d = d.min(period - d);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance to the nearest lattice point.
    pub fn distance_to_lattice(&self) -> f64 {
        let period = 2.0 * self.a;
        self.coords
            .iter()
            .map(|&p| {
                let d = p.min(period - p);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// theta3 at real argument `w` with modular parameter `i*u`, branch-stable
/// for all `u > 0`. The `u < 1` branch sums the Gaussian (heat-kernel)
/// image series `u^{-1/2} sum_m exp(-(w - pi m)^2/(pi u))`.
fn theta3_real(w: f64, u: f64, tol: f64) -> f64 {
    if u >= 1.0 {
        let mut s = 1.0;
        for k in 1..250 {
            let kf = k as f64;
            s += 2.0 * (-PI * u * kf * kf).exp() * (2.0 * kf * w).cos();
            let kn = kf + 1.0;
            if 2.0 * (-PI * u * kn * kn).exp() < tol * (s.abs() + tol) {
                break;
            }
        }
        s
    } else {
        let m0 = (w / PI).round();
        let mut s = (-(w - PI * m0).powi(2) / (PI * u)).exp();
        for j in 1..250 {
            let jf = j as f64;
            let up = (-(w - PI * (m0 + jf)).powi(2) / (PI * u)).exp();
            let down = (-(w - PI * (m0 - jf)).powi(2) / (PI * u)).exp();
            s += up + down;
            if up + down < tol * (s + tol) {
                break;
            }
        }
        s / u.sqrt()
    }
}

/// theta3(w|iu) - 1 for `u >= 1`, summed without the leading 1.
fn theta3_real_tail(w: f64, u: f64, tol: f64) -> f64 {
    debug_assert!(u >= 1.0);
    let mut s = 0.0;
    for k in 1..250 {
        let kf = k as f64;
        s += 2.0 * (-PI * u * kf * kf).exp() * (2.0 * kf * w).cos();
        let kn = kf + 1.0;
        if 2.0 * (-PI * u * kn * kn).exp() < tol * (s.abs() + tol) {
            break;
        }
    }
    s
}

fn check_v(v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(MadelungError::Domain(format!(
            "modular parameter v must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// The n-dimensional theta function `Theta(x|v)`, strictly positive.
pub fn big_theta(x: &TorusPoint, v: f64, tol: f64) -> Result<f64> {
    check_v(v)?;
    let a = x.half_period();
    let u = PI * v / (a * a);
    let mut prod = 1.0;
    for &c in x.coords() {
        prod *= theta3_real(PI * c / (2.0 * a), u, tol);
    }
    Ok(prod)
}

/// `1 - Theta(x|v)` with cancellation control.
///
/// Below `v = a^2/pi` (one-dimensional parameter `u < 1`) the direct
/// `1 - product` form is safe because `Theta` is far from 1. Above it,
/// each factor is written `1 + delta_l` with `delta_l = theta3 - 1`
/// summed without its leading term, and
/// `1 - prod(1 + delta_l) = -expm1(sum log1p(delta_l))`, which never
/// subtracts two near-1 quantities.
pub fn one_minus_big_theta(x: &TorusPoint, v: f64, tol: f64) -> Result<f64> {
    check_v(v)?;
    let a = x.half_period();
    let u = PI * v / (a * a);
    if u < 1.0 {
        return Ok(1.0 - big_theta(x, v, tol)?);
    }
    let mut log_sum = 0.0;
    for &c in x.coords() {
        let delta = theta3_real_tail(PI * c / (2.0 * a), u, tol);
        log_sum += delta.ln_1p();
    }
    Ok(-log_sum.exp_m1())
}

/// Central finite-difference residual of the heat equation
/// `(Laplacian - d/dv) Theta = 0` at `(x, v)`. Diagnostic only; the
/// residual is `O(h^2)` as `h -> 0`.
pub fn heat_residual(x: &TorusPoint, v: f64, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0 && v > h) {
        return Err(MadelungError::Domain(format!(
            "heat_residual needs v > h > 0, got v={v}, h={h}"
        )));
    }
    if x.distance_to_lattice() < 3.0 * h {
        return Err(MadelungError::Domain(
            "heat_residual needs x at least 3h away from lattice points".into(),
        ));
    }
    let tol = 1e-15;
    let n = x.dim();
    let center = big_theta(x, v, tol)?;
    let mut laplacian = 0.0;
    for l in 0..n {
        let mut delta = vec![0.0; n];
        delta[l] = h;
        let plus = big_theta(&x.displaced(&delta)?, v, tol)?;
        delta[l] = -h;
        let minus = big_theta(&x.displaced(&delta)?, v, tol)?;
        laplacian += (plus + minus - 2.0 * center) / (h * h);
    }
    let dv = (big_theta(x, v + h, tol)? - big_theta(x, v - h, tol)?) / (2.0 * h);
    Ok(laplacian - dv)
}

/// The alternating sum `sum_{k in {0,1}^n} (-1)^{|k|} Theta(a k | v)`,
/// evaluated through its binomial collapse
/// `(theta3(0|i pi v/a^2) - theta4(0|i pi v/a^2))^n`. Nonnegative.
pub fn alternating_cell_sum(n: usize, v: f64, a: f64, tol: f64) -> Result<f64> {
    if n < 1 {
        return Err(MadelungError::Domain(
            "alternating_cell_sum needs n >= 1".into(),
        ));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(MadelungError::Domain(format!(
            "half-period a must be positive, got {a}"
        )));
    }
    check_v(v)?;
    let u = PI * v / (a * a);
    let diff = special::theta3_minus_theta4_zero(u, tol)?;
    Ok(diff.powi(n as i32))
}
