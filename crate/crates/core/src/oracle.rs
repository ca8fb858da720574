//! Independent validation of the finite-part Madelung constants.
//!
//! Two routes that never touch the theta-integral machinery:
//!
//! * naive partial sums of the defining conditionally convergent lattice
//!   series, reported shell by shell so their order dependence is
//!   observable, and
//! * an Ewald split of the same series into a real-space incomplete-gamma
//!   sum and a reciprocal-space Gaussian sum, both absolutely convergent,
//!   with a built-in splitting-invariance self-check.
//!
//! The Ewald identity used here, for `s = n - 2`, sites `q_j` at `a c_j`
//! and lattice `2a Z^n` (lengths in units of `a`):
//!
//! ```text
//! S = sum'_{L,j} q_j |2L + c_j|^{-s}
//!   = sum'_{L,j} q_j Q(s/2, pi b r^2) / r^s                    (real)
//!   + pi^{s/2-1} 2^{2-n} / Gamma(s/2)
//!       * sum_{m != 0} S(m) exp(-pi |m|^2/(4b)) / |m|^2        (recip)
//!   - 2 pi^{s/2} b^{s/2} / (s Gamma(s/2))                      (self)
//! ```
//!
//! with `r = |2L + c_j|`, structure factor
//! `S(m) = sum_j q_j cos(pi m . c_j)`, `Q` the regularized upper
//! incomplete gamma, and `b` the splitting parameter. The Madelung
//! constant is `alpha(n) * S` with `alpha(n)` the n-Coulomb coefficient.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::crystal::{charge_sites, CrystalFamily, CrystalSpec};
use crate::error::{MadelungError, Result};
use crate::madelung::{MadelungResult, Method};
use crate::quad::QuadratureConfig;
use crate::special::gamma_half_integer;
use crate::util::KahanSum;

/// How the naive lattice sum is ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingKind {
    /// Shells `max_l |k_l| = r`, r = 1, 2, ...
    ExpandingCubes,
    /// Shells `r - 1 < |k|_2 <= r`, r = 1, 2, ...
    ExpandingSpheres,
}

/// Ordering plus the largest shell radius to accumulate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SumOrdering {
    pub kind: OrderingKind,
    pub radius_max: f64,
}

/// Coefficient of the n-dimensional Coulomb potential on the unit charge,
/// `alpha(n) = Gamma(n/2) / ((n/2 - 1) pi^{n/2-1} a^{n-2})`.
pub fn alpha_coefficient(n: usize, a: f64) -> Result<f64> {
    if n < 3 {
        return Err(MadelungError::Domain(format!(
            "alpha(n) requires n >= 3 (n-Coulomb decay), got {n}"
        )));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(MadelungError::Domain(format!(
            "half-period a must be positive, got {a}"
        )));
    }
    let nf = n as f64;
    Ok(gamma_half_integer(n as u32)
        / ((nf / 2.0 - 1.0) * PI.powf(nf / 2.0 - 1.0) * a.powi(n as i32 - 2)))
}

/// Running partial sums of the defining Madelung lattice series under the
/// given shell ordering, one entry per integer shell radius. The sequence
/// is the diagnostic for the missing arrangement property; the value
/// authority is [`ewald_madelung`].
pub fn naive_partial_sums(spec: &CrystalSpec, ordering: &SumOrdering) -> Result<Vec<(f64, f64)>> {
    if spec.n < 3 {
        return Err(MadelungError::Unsupported(
            "the naive lattice sum is ill-defined for n <= 2: no ordering of the planar series \
             converges to a horizon-free value"
                .into(),
        ));
    }
    if !(ordering.radius_max.is_finite() && ordering.radius_max >= 0.0) {
        return Err(MadelungError::Domain(
            "radius_max must be nonnegative".into(),
        ));
    }
    if ordering.radius_max > 200.0 {
        return Err(MadelungError::Domain(format!(
            "radius_max is capped at 200, got {}",
            ordering.radius_max
        )));
    }
    let rmax = ordering.radius_max.floor() as i64;
    if rmax == 0 {
        return Ok(Vec::new());
    }
    let width = 2 * rmax + 1;
    if (width as f64).powi(spec.n as i32) > 1.5e9 {
        return Err(MadelungError::Domain(format!(
            "shell enumeration of ({width})^{} points is too large",
            spec.n
        )));
    }

    let n = spec.n;
    let alpha = alpha_coefficient(n, spec.a)?;
    let power = (2.0 - n as f64) / 2.0; // |k|^{2-n} = (k.k)^power
    let mut shells = vec![KahanSum::new(); rmax as usize];
    let mut idx = vec![-rmax; n];
    loop {
        let k2: i64 = idx.iter().map(|&k| k * k).sum();
        if k2 != 0 {
            let shell = match ordering.kind {
                OrderingKind::ExpandingCubes => idx.iter().map(|&k| k.abs()).max().unwrap(),
                OrderingKind::ExpandingSpheres => (k2 as f64).sqrt().ceil() as i64,
            };
            if shell <= rmax {
                let weight = match spec.family {
                    CrystalFamily::NaCl => {
                        let parity: i64 = idx.iter().sum();
                        if parity % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    CrystalFamily::CsCl => {
                        let evens = idx.iter().filter(|&&k| k % 2 == 0).count();
                        if evens == n {
                            1.0
                        } else if evens == 0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                };
                if weight != 0.0 {
                    shells[(shell - 1) as usize].add(weight * (k2 as f64).powf(power));
                }
            }
        }
        // Odometer over [-rmax, rmax]^n.
        let mut l = 0;
        loop {
            if l == n {
                let mut out = Vec::with_capacity(rmax as usize);
                let mut running = KahanSum::new();
                for (i, shell) in shells.iter().enumerate() {
                    running.add(shell.value());
                    out.push(((i + 1) as f64, alpha * running.value()));
                }
                return Ok(out);
            }
            idx[l] += 1;
            if idx[l] <= rmax {
                break;
            }
            idx[l] = -rmax;
            l += 1;
        }
    }
}

/// Regularized upper incomplete gamma Q(s/2, x) for integer `s >= 1`,
/// built from erfc and the upward recurrence
/// `Q(a+1, x) = Q(a, x) + x^a e^{-x} / Gamma(a+1)`.
fn upper_gamma_reg_half(s: u32, x: f64) -> f64 {
    debug_assert!(s >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    let (mut a, mut q) = if s % 2 == 1 {
        (0.5, libm::erfc(x.sqrt()))
    } else {
        (1.0, (-x).exp())
    };
    let mut gamma_a = if s % 2 == 1 { PI.sqrt() } else { 1.0 };
    while 2.0 * a + 0.5 < s as f64 + 0.5 {
        // gamma(a+1) = a gamma(a)
        q += x.powf(a) * (-x).exp() / (gamma_a * a);
        gamma_a *= a;
        a += 1.0;
    }
    q
}

/// Dimensionless Ewald evaluation of the defining sum at splitting `b`.
fn ewald_sum(spec: &CrystalSpec, b: f64) -> f64 {
    let n = spec.n;
    let s = (n - 2) as u32;
    let sf = s as f64;
    let gamma_s2 = gamma_half_integer(s);
    // Cutoffs: both sums decay like exp(-x); 45 + 3n keeps every dropped
    // term below ~1e-19 relative.
    let x_cut = 45.0 + 3.0 * n as f64;

    // Cell sites in units of a.
    let sites: Vec<(Vec<f64>, f64)> = charge_sites(spec)
        .iter()
        .map(|(p, q)| (p.coords().iter().map(|c| c / spec.a).collect(), *q as f64))
        .collect();

    // Real space: charges at 2L + c_j.
    let rho_max = (x_cut / (PI * b)).sqrt();
    let lmax = (rho_max / 2.0).ceil() as i64 + 1;
    let mut real = KahanSum::new();
    let mut idx = vec![-lmax; n];
    'outer: loop {
        for (c, q) in &sites {
            let r2: f64 = idx
                .iter()
                .zip(c)
                .map(|(&l, &cj)| {
                    let t = 2.0 * l as f64 + cj;
                    t * t
                })
                .sum();
            if r2 == 0.0 {
                continue; // origin charge's self term
            }
            let x = PI * b * r2;
            if x > x_cut {
                continue;
            }
            real.add(q * upper_gamma_reg_half(s, x) / r2.powf(sf / 2.0));
        }
        let mut l = 0;
        loop {
            if l == n {
                break 'outer;
            }
            idx[l] += 1;
            if idx[l] <= lmax {
                break;
            }
            idx[l] = -lmax;
            l += 1;
        }
    }

    // Reciprocal space.
    let m_max = (4.0 * b * x_cut / PI).sqrt().ceil() as i64;
    let recip_pref = PI.powf(sf / 2.0 - 1.0) * 2f64.powi(2 - n as i32) / gamma_s2;
    let mut recip = KahanSum::new();
    let mut midx = vec![-m_max; n];
    'router: loop {
        let m2: i64 = midx.iter().map(|&m| m * m).sum();
        if m2 != 0 {
            let w = PI * m2 as f64 / (4.0 * b);
            if w <= x_cut {
                let mut structure = 0.0;
                for (c, q) in &sites {
                    let phase: f64 = midx
                        .iter()
                        .zip(c)
                        .map(|(&m, &cj)| m as f64 * cj)
                        .sum::<f64>()
                        * PI;
                    structure += q * phase.cos();
                }
                if structure != 0.0 {
                    recip.add(recip_pref * structure * (-w).exp() / m2 as f64);
                }
            }
        }
        let mut l = 0;
        loop {
            if l == n {
                break 'router;
            }
            midx[l] += 1;
            if midx[l] <= m_max {
                break;
            }
            midx[l] = -m_max;
            l += 1;
        }
    }

    let self_term = 2.0 * PI.powf(sf / 2.0) * b.powf(sf / 2.0) / (sf * gamma_s2);
    real.value() + recip.value() - self_term
}

/// Madelung constant by Ewald summation: real-space complementary-error
/// (incomplete-gamma) sum plus reciprocal-space Gaussian sum plus self
/// term. Independent of the splitting parameter; evaluated at two
/// splittings as a self-check and tagged `ewald-oracle`.
pub fn ewald_madelung(
    spec: &CrystalSpec,
    splitting: f64,
    _cfg: &QuadratureConfig,
) -> Result<MadelungResult> {
    if spec.n < 3 {
        return Err(MadelungError::Unsupported(
            "the Ewald oracle is defined for n >= 3".into(),
        ));
    }
    if !(splitting.is_finite() && splitting > 0.0) {
        return Err(MadelungError::Domain(format!(
            "Ewald splitting parameter must be positive, got {splitting}"
        )));
    }
    let alpha = alpha_coefficient(spec.n, spec.a)?;
    let s1 = ewald_sum(spec, splitting);
    let s2 = ewald_sum(spec, splitting * 1.37);
    let value = alpha * s1;
    let drift = alpha * (s1 - s2).abs();
    if drift > 1e-10 * value.abs().max(1.0) {
        return Err(MadelungError::SelfCheck(format!(
            "Ewald splitting invariance violated: values at b and 1.37b differ by {drift:e}"
        )));
    }
    Ok(MadelungResult {
        spec: *spec,
        method: Method::EwaldOracle,
        value,
        eps: None,
        error_estimate: drift.max(1e-14 * value.abs()),
    })
}
