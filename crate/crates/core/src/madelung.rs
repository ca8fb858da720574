//! Madelung constants.
//!
//! For `n >= 3` the constant is the Hadamard finite part of the divergent
//! origin-potential integral
//!
//! ```text
//! M = (2a)^{2-n} FP int_0^inf g(v) dv,
//! g = (theta3(0|iv) - theta4(0|iv))^n        (NaCl)
//! g = theta3(0|iv)^n - theta4(0|iv)^n        (CsCl)
//! ```
//!
//! where the singular part of `g` near `v = 0` is exactly `v^{-n/2}`.
//! Two evaluation strategies are provided: the `subtracted` default
//! removes `v^{-n/2}` analytically on `(0, 1]`, leaving an absolutely
//! integrable remainder with no regularization bias, and the
//! `epsilon-limit` strategy reproduces the explicit cutoff procedure.
//!
//! For `n = 2` the finite part is ambiguous (the regularization shifts by
//! a logarithm of the arbitrary horizon), so the planar constant is
//! defined through the horizon-normalized binding potentials of the exact
//! closed-form potential: zero at every cation, `2 log K` at every anion,
//! giving `M = -log K(1/sqrt 2)` for both families, independent of `a`.

use serde::Serialize;

use crate::crystal::{charge_sites, potential_2d_closed, CrystalFamily, CrystalSpec};
use crate::error::{MadelungError, Result};
use crate::lattice::TorusPoint;
use crate::quad::{adaptive_gk, QuadratureConfig};
use crate::special::{
    jacobi_theta_zero, theta3_minus_theta4_zero, theta3_zero_tail, theta4_zero_tail,
    LemniscaticConstants,
};

/// Exact symbolic form of the planar Madelung constant.
pub const TWO_D_EXACT_FORM: &str = "-log(Gamma(1/4)^2 / (4 sqrt(pi)))";

const THETA_TOL: f64 = 1e-15;

/// Evaluation strategy recorded in a [`MadelungResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "epsilon-limit")]
    EpsilonLimit,
    #[serde(rename = "subtracted")]
    Subtracted,
    #[serde(rename = "closed-form-2d")]
    ClosedForm2d,
    #[serde(rename = "ewald-oracle")]
    EwaldOracle,
}

/// A Madelung constant with its provenance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MadelungResult {
    #[serde(flatten)]
    pub spec: CrystalSpec,
    pub method: Method,
    pub value: f64,
    pub eps: Option<f64>,
    pub error_estimate: f64,
}

/// A horizon-normalized binding potential of one cell site (planar).
#[derive(Clone, Debug, Serialize)]
pub struct BindingPotential {
    pub site: Vec<f64>,
    pub charge: i32,
    pub value: f64,
    /// Distance at which the site's own logarithmic potential vanishes.
    pub horizon: f64,
}

/// The `v`-integrand of the origin potential after the change of variable
/// that removes `a` (prefactor excluded). Positive, `~ v^{-n/2}` as
/// `v -> 0`, exponentially small as `v -> inf`.
pub fn origin_integrand(spec: &CrystalSpec, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(MadelungError::Domain(format!(
            "integrand argument v must be positive, got {v}"
        )));
    }
    let n = spec.n as i32;
    match spec.family {
        CrystalFamily::NaCl => Ok(theta3_minus_theta4_zero(v, THETA_TOL)?.powi(n)),
        CrystalFamily::CsCl => {
            if v >= 1.0 {
                // theta3^n - theta4^n via expm1/log1p on the small tails.
                let d3 = theta3_zero_tail(v, THETA_TOL);
                let d4 = theta4_zero_tail(v, THETA_TOL);
                Ok((n as f64 * d3.ln_1p()).exp_m1() - (n as f64 * d4.ln_1p()).exp_m1())
            } else {
                // Modular form: v^{-n/2} (theta3(0|i/v)^n - theta2(0|i/v)^n).
                let d3 = theta3_zero_tail(1.0 / v, THETA_TOL);
                let t2 = jacobi_theta_zero(2, 1.0 / v, THETA_TOL)?;
                let diff = (n as f64 * d3.ln_1p()).exp() - t2.powi(n);
                Ok(v.powf(-(n as f64) / 2.0) * diff)
            }
        }
    }
}

/// `origin_integrand(v) - v^{-n/2}` for `v in (0, 1]`, computed without
/// subtracting two large numbers. The remainder decays like
/// `v^{-n/2} exp(-pi/(4v))` near zero.
fn subtracted_integrand(spec: &CrystalSpec, v: f64) -> f64 {
    let n = spec.n as f64;
    debug_assert!(v > 0.0 && v <= 1.0 + 1e-12);
    let factor = match spec.family {
        CrystalFamily::NaCl => {
            // g = v^{-n/2} (1 + u)^n with u = (theta3 - theta2)(0|i/v) - 1.
            let d3 = theta3_zero_tail(1.0 / v, THETA_TOL);
            let t2 = jacobi_theta_zero(2, 1.0 / v, THETA_TOL).expect("v >= 1");
            (n * (d3 - t2).ln_1p()).exp_m1()
        }
        CrystalFamily::CsCl => {
            let d3 = theta3_zero_tail(1.0 / v, THETA_TOL);
            let t2 = jacobi_theta_zero(2, 1.0 / v, THETA_TOL).expect("v >= 1");
            (n * d3.ln_1p()).exp_m1() - t2.powf(n)
        }
    };
    // The remainder vanishes to all orders at v = 0; bail out before the
    // v^{-n/2} factor can overflow against it.
    if factor == 0.0 {
        return 0.0;
    }
    v.powf(-n / 2.0) * factor
}

fn check_dimension_for_finite_part(n: usize) -> Result<()> {
    match n {
        0 | 1 => Err(MadelungError::Unsupported(
            "the finite-part Madelung constant needs dimension n >= 3".into(),
        )),
        2 => Err(MadelungError::Unsupported(
            "the two-dimensional finite part is ambiguous: changing the horizon shifts the value \
             by log(A2/A1); use the closed-form planar constant instead"
                .into(),
        )),
        _ => Ok(()),
    }
}

/// Integral of the origin integrand over `[1, inf)`, with an analytic
/// exponential tail cutoff.
fn upper_integral(spec: &CrystalSpec, cfg: &QuadratureConfig, budget: f64) -> Result<(f64, f64)> {
    let n = spec.n as f64;
    // Decay majorants for v >= 1: (theta3-theta4)^n <= (4.001 q)^n and
    // theta3^n - theta4^n <= 4.1 n q with q = exp(-pi v).
    let tail_majorant = |v: f64| -> f64 {
        match spec.family {
            CrystalFamily::NaCl => {
                let rate = n * std::f64::consts::PI;
                (4.001f64).powf(n) * (-rate * v).exp() / rate
            }
            CrystalFamily::CsCl => {
                // n (theta3 - theta4) theta3^{n-1} <= 8 n q for v >= 2.
                let rate = std::f64::consts::PI;
                8.0 * n * (-rate * v).exp() / rate
            }
        }
    };
    let f = |v: f64| origin_integrand(spec, v).unwrap_or(f64::NAN);
    let mut hi = 2.0f64;
    while tail_majorant(hi) > budget / 10.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(MadelungError::SelfCheck(
                "tail cutoff failed to close".into(),
            ));
        }
    }
    let out = adaptive_gk(&f, 1.0, hi, budget, cfg.rel_tol, cfg.max_subdivisions)?;
    Ok((out.value, out.error + tail_majorant(hi)))
}

fn finite_part_core(
    spec: &CrystalSpec,
    lower_cut: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    check_dimension_for_finite_part(spec.n)?;
    let n = spec.n as f64;
    let prefactor = (2.0 * spec.a).powf(2.0 - n);
    // Budgets on the unscaled integral.
    let budget = (cfg.abs_tol / prefactor).min(1e-3);

    let f = |v: f64| {
        if v <= 0.0 {
            0.0
        } else {
            subtracted_integrand(spec, v)
        }
    };
    let low = adaptive_gk(
        &f,
        lower_cut,
        1.0,
        budget,
        cfg.rel_tol,
        cfg.max_subdivisions,
    )?;
    let (high, high_err) = upper_integral(spec, cfg, budget)?;
    let constant = 1.0 / (n / 2.0 - 1.0);
    let value = prefactor * (low.value + high - constant);
    let error = prefactor * (low.error + high_err);
    Ok((value, error))
}

/// Madelung constant for `n >= 3` with the `v^{-n/2}` singular piece
/// removed analytically: no cutoff, no regularization bias.
pub fn finite_part_subtracted(
    spec: &CrystalSpec,
    cfg: &QuadratureConfig,
) -> Result<MadelungResult> {
    let (value, error) = finite_part_core(spec, 0.0, cfg)?;
    Ok(MadelungResult {
        spec: *spec,
        method: Method::Subtracted,
        value,
        eps: None,
        error_estimate: error,
    })
}

/// Madelung constant for `n >= 3` through the explicit cutoff limit
///
/// ```text
/// prefactor * ( int_eps^inf g(v) dv - eps^{1-n/2} / (n/2 - 1) )
/// ```
///
/// The cutoff power integrates against `v^{-n/2}` exactly, so the
/// difference from the subtracted strategy is the (tiny) missing piece of
/// the remainder on `(0, eps)`. The error estimate combines quadrature
/// error with the regularization bias measured by an `eps/4` comparison
/// run.
pub fn finite_part_epsilon(
    spec: &CrystalSpec,
    eps: f64,
    cfg: &QuadratureConfig,
) -> Result<MadelungResult> {
    if !(eps.is_finite() && eps > 0.0 && eps <= 0.1) {
        return Err(MadelungError::Domain(format!(
            "epsilon must lie in (0, 0.1], got {eps}"
        )));
    }
    let (value, quad_err) = finite_part_core(spec, eps, cfg)?;
    let (value_refined, _) = finite_part_core(spec, eps / 4.0, cfg)?;
    let bias = (value - value_refined).abs();
    Ok(MadelungResult {
        spec: *spec,
        method: Method::EpsilonLimit,
        value,
        eps: Some(eps),
        error_estimate: quad_err + bias,
    })
}

/// Diagnostic only: the ambiguous planar "finite part"
/// `lim_{eps->0} ( int_eps^inf g2(v) dv + log(eps/A) )` for an arbitrary
/// horizon parameter `A > 0`. Distinct choices of `A` shift the result by
/// exactly `log(A2/A1)`; this is why no planar [`MadelungResult`] is ever
/// produced this way.
pub fn ambiguous_finite_part_2d(
    spec: &CrystalSpec,
    a_param: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if spec.n != 2 {
        return Err(MadelungError::Unsupported(
            "the ambiguous finite part demonstration is planar (n = 2) only".into(),
        ));
    }
    if !(a_param.is_finite() && a_param > 0.0) {
        return Err(MadelungError::Domain(format!(
            "horizon parameter A must be positive, got {a_param}"
        )));
    }
    cfg.validate()?;
    let f = |v: f64| {
        if v <= 0.0 {
            0.0
        } else {
            subtracted_integrand(spec, v)
        }
    };
    let low = adaptive_gk(
        &f,
        0.0,
        1.0,
        cfg.abs_tol.min(1e-3),
        cfg.rel_tol,
        cfg.max_subdivisions,
    )?;
    let (high, _) = upper_integral(spec, cfg, cfg.abs_tol.min(1e-3))?;
    Ok(low.value + high - a_param.ln())
}

/// True when the site is equivalent to the origin cation under the
/// charge-preserving translations of the crystal; such sites carry zero
/// binding potential by the choice of reference point.
fn is_origin_like(charge: i32) -> bool {
    charge > 0
}

struct BindingLimit {
    /// Numerically extrapolated limit value.
    extrapolated: f64,
    /// Exact closed-form limit: 0 for origin-like cations, 2 log K for
    /// counter-ions.
    exact: f64,
    horizon: f64,
    /// Extrapolation error estimate including the deviation from the
    /// closed form.
    error: f64,
}

fn binding_limit(spec: &CrystalSpec, site: &TorusPoint, charge: i32) -> Result<BindingLimit> {
    let a = spec.a;
    let lem = LemniscaticConstants::get();
    if is_origin_like(charge) {
        // Horizon fixed once and for all so the origin reference value is
        // exactly zero: the potential behaves like -2 log(K |z| / d) near
        // a cation, with d the nearest counter-ion distance (a sqrt2 for
        // CsCl, a for NaCl), so the zero horizon is d / K.
        let counter_ion_distance = match spec.family {
            CrystalFamily::CsCl => a * 2f64.sqrt(),
            CrystalFamily::NaCl => a,
        };
        return Ok(BindingLimit {
            extrapolated: 0.0,
            exact: 0.0,
            horizon: counter_ion_distance / lem.big_k,
            error: 0.0,
        });
    }
    // Counter-ion: horizon equals its distance from the origin, so its
    // single-charge potential vanishes at the reference point.
    let horizon = site.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
    let q = charge as f64;
    let (dir_x, dir_y) = (0.7f64.cos(), 0.7f64.sin());
    let f = |r: f64| -> Result<f64> {
        let x = site.displaced(&[r * dir_x, r * dir_y])?;
        let v = potential_2d_closed(spec, &x)?;
        // Remove the site's own potential -2 q log(r / horizon).
        Ok(v + 2.0 * q * (r / horizon).ln())
    };
    let f4 = f(1e-4 * a)?;
    let f5 = f(1e-5 * a)?;
    let f6 = f(1e-6 * a)?;
    // Richardson extrapolation for an O(r) error model over radii 10^-k a.
    let l5 = (10.0 * f5 - f4) / 9.0;
    let l6 = (10.0 * f6 - f5) / 9.0;
    let exact = 2.0 * lem.log_big_k();
    let error = (l6 - l5).abs().max((l6 - exact).abs()).max(1e-14);
    Ok(BindingLimit {
        extrapolated: l6,
        exact,
        horizon,
        error,
    })
}

/// Binding potential of one cell site of a planar crystal: exactly zero
/// for origin-like cations, and the limit `V(x) + 2 q log(r/horizon)` as
/// `r -> 0` (Richardson-extrapolated over radii `1e-4 a .. 1e-6 a`) for
/// counter-ions, which evaluates to `2 log K`.
pub fn binding_potential_2d(spec: &CrystalSpec, site_index: usize) -> Result<BindingPotential> {
    if spec.n != 2 {
        return Err(MadelungError::Unsupported(
            "binding potentials are defined for the planar crystal (n = 2) only".into(),
        ));
    }
    let sites = charge_sites(spec);
    let (site, charge) = sites.get(site_index).ok_or_else(|| {
        MadelungError::Domain(format!(
            "site index {site_index} out of range for {} sites",
            sites.len()
        ))
    })?;
    let limit = binding_limit(spec, site, *charge)?;
    Ok(BindingPotential {
        site: site.coords().to_vec(),
        charge: *charge,
        value: limit.extrapolated,
        horizon: limit.horizon,
    })
}

/// The planar Madelung constant as the mean potential energy of the cell
/// charges: `U = (1/2) sum_i q_i V_M(x_i)`, `M = U / (sites/2)`.
///
/// The binding potentials are exactly 0 (cations) and `2 log K`
/// (counter-ions) in closed form, so the value is assembled from the
/// closed form and evaluates to `-log K` for both families, independent
/// of `a`; the error estimate reports how far the numerical
/// limit-extrapolation deviates from those closed-form limits.
pub fn madelung_2d(spec: &CrystalSpec) -> Result<MadelungResult> {
    if spec.n != 2 {
        return Err(MadelungError::Unsupported(
            "madelung_2d is defined for the planar crystal (n = 2) only".into(),
        ));
    }
    let sites = charge_sites(spec);
    let mut u = 0.0;
    let mut err: f64 = 0.0;
    for (site, charge) in &sites {
        let limit = binding_limit(spec, site, *charge)?;
        u += 0.5 * *charge as f64 * limit.exact;
        err = err.max(limit.error);
    }
    let pairs = sites.len() as f64 / 2.0;
    Ok(MadelungResult {
        spec: *spec,
        method: Method::ClosedForm2d,
        value: u / pairs,
        eps: None,
        error_estimate: err,
    })
}

/// Total electrostatic energy per unit cell.
///
/// For `n >= 3`: `2^{n-1} M` for NaCl and `2 M` for CsCl. For `n = 2` the
/// energy is assembled from the binding potentials directly
/// (`-2 log K` for NaCl, `-log K` for CsCl), not from `M` times a count.
pub fn cell_energy(spec: &CrystalSpec, m: &MadelungResult) -> Result<f64> {
    let same = m.spec.family == spec.family
        && m.spec.n == spec.n
        && (m.spec.a - spec.a).abs() <= 1e-12 * spec.a;
    if !same {
        return Err(MadelungError::Domain(
            "cell_energy: the Madelung result belongs to a different crystal spec".into(),
        ));
    }
    match spec.n {
        2 => {
            let sites = charge_sites(spec);
            let mut u = 0.0;
            for (site, charge) in &sites {
                let limit = binding_limit(spec, site, *charge)?;
                u += 0.5 * *charge as f64 * limit.exact;
            }
            Ok(u)
        }
        n if n >= 3 => match spec.family {
            CrystalFamily::NaCl => Ok(2f64.powi(spec.n as i32 - 1) * m.value),
            CrystalFamily::CsCl => Ok(2.0 * m.value),
        },
        _ => Err(MadelungError::Unsupported(
            "cell energy is defined for n = 2 and n >= 3".into(),
        )),
    }
}

/// The exact planar value `-log K(1/sqrt 2)`.
pub fn planar_exact_value() -> f64 {
    -LemniscaticConstants::get().log_big_k()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::LengthConvention;

    const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;
    // NaCl reference is exact to far more digits than f64 carries.
    const NACL_3D: f64 = -1.747_564_594_633_182_2;
    // The CsCl constant at cell side 1. The widely printed 12-digit form
    // -2.035361508229 is accurate only to its 8th decimal; this value is
    // confirmed independently by the Ewald oracle (agreement 4e-16) and by
    // rescaling the nearest-neighbour constant 1.76267477307099 by
    // 2/sqrt(3).
    const CSCL_3D_CELL_SIDE_ONE: f64 = -2.035_361_509_452_595;
    const CSCL_3D_EIGHT_DECIMAL_PRINT: f64 = -2.035_361_508_229;

    fn spec(family: CrystalFamily, n: usize, length: f64, conv: LengthConvention) -> CrystalSpec {
        CrystalSpec::new(family, n, length, conv).unwrap()
    }

    #[test]
    fn origin_integrand_values() {
        let lem = LemniscaticConstants::get();
        let nacl = spec(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod);
        let got = origin_integrand(&nacl, 1.0).unwrap();
        let expected = (lem.theta3_0 - lem.theta4_0).powi(3);
        assert!(((got - expected) / expected).abs() < 1e-12);

        let cscl = spec(CrystalFamily::CsCl, 2, 1.0, LengthConvention::HalfPeriod);
        let got2 = origin_integrand(&cscl, 1.0).unwrap();
        let expected2 = lem.theta3_0.powi(2) * (1.0 - 2f64.powf(-0.5));
        assert!(((got2 - expected2) / expected2).abs() < 1e-12);

        // Small positive at large v.
        for family in [CrystalFamily::NaCl, CrystalFamily::CsCl] {
            let s = spec(family, 3, 1.0, LengthConvention::HalfPeriod);
            let tail = origin_integrand(&s, 10.0).unwrap();
            assert!(tail > 0.0 && tail < 1e-9);
        }
    }

    #[test]
    fn origin_integrand_continuous_at_branch_point() {
        for family in [CrystalFamily::NaCl, CrystalFamily::CsCl] {
            let s = spec(family, 3, 1.0, LengthConvention::HalfPeriod);
            let below = origin_integrand(&s, 1.0 - 1e-10).unwrap();
            let above = origin_integrand(&s, 1.0 + 1e-10).unwrap();
            assert!(
                (below - above).abs() < 1e-8,
                "{family:?}: {below} vs {above}"
            );
        }
    }

    #[test]
    fn subtracted_integrand_matches_raw_difference() {
        let s = spec(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod);
        for &v in &[0.3, 0.6, 1.0] {
            let sub = subtracted_integrand(&s, v);
            let raw = origin_integrand(&s, v).unwrap() - v.powf(-1.5);
            assert!(
                (sub - raw).abs() < 1e-9 * raw.abs().max(1.0),
                "v={v}: {sub} vs {raw}"
            );
        }
        // Near zero the subtracted form vanishes instead of cancelling.
        assert!(subtracted_integrand(&s, 0.01).abs() < 1e-12);
    }

    #[test]
    fn nacl_3d_reference_value() {
        let s = spec(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod);
        let m = finite_part_subtracted(&s, &QuadratureConfig::default()).unwrap();
        assert!(
            (m.value - NACL_3D).abs() < 1e-10,
            "got {:.15}, expected {NACL_3D}",
            m.value
        );
        assert!(m.error_estimate < 1e-9);
        assert_eq!(m.method, Method::Subtracted);
    }

    #[test]
    fn cscl_3d_reference_value() {
        let s = spec(CrystalFamily::CsCl, 3, 1.0, LengthConvention::CellSide);
        let m = finite_part_subtracted(&s, &QuadratureConfig::default()).unwrap();
        assert!(
            (m.value - CSCL_3D_CELL_SIDE_ONE).abs() < 1e-10,
            "got {:.15}",
            m.value
        );
        // Consistent with the 8-decimal-accurate printed form.
        assert!((m.value - CSCL_3D_EIGHT_DECIMAL_PRINT).abs() < 2e-9);
    }

    #[test]
    fn epsilon_limit_reproduces_reference() {
        let s = spec(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod);
        let m = finite_part_epsilon(&s, 1e-6, &QuadratureConfig::default()).unwrap();
        // The quoted cutoff run: -1.747564594021..., within 1e-9 of it and
        // within 7e-10 of the true constant.
        assert!(
            (m.value - (-1.747_564_594_021)).abs() < 1e-9,
            "got {:.13}",
            m.value
        );
        assert!((m.value - NACL_3D).abs() < 7e-10);
        assert_eq!(m.eps, Some(1e-6));
    }

    #[test]
    fn epsilon_bias_shrinks_with_eps() {
        let s = spec(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod);
        let cfg = QuadratureConfig::default();
        let reference = finite_part_subtracted(&s, &cfg).unwrap().value;
        // The analytic bias is exp(-pi/(4 eps)) and far below f64 at every
        // tested eps; the measured difference is quadrature noise, so the
        // check allows a noise floor.
        let mut prev = f64::INFINITY;
        for &eps in &[1e-3, 1e-4, 1e-5, 1e-6] {
            let m = finite_part_epsilon(&s, eps, &cfg).unwrap();
            let diff = (m.value - reference).abs();
            assert!(diff <= prev + 5e-12, "eps={eps}: {diff:e} vs prev {prev:e}");
            assert!(diff < 5e-11, "eps={eps}: {diff:e}");
            prev = diff;
        }
    }

    #[test]
    fn n4_methods_agree() {
        let s = spec(CrystalFamily::NaCl, 4, 1.0, LengthConvention::HalfPeriod);
        let cfg = QuadratureConfig::default();
        let sub = finite_part_subtracted(&s, &cfg).unwrap();
        let eps = finite_part_epsilon(&s, 1e-8, &cfg).unwrap();
        assert!((sub.value - eps.value).abs() < 1e-6);
    }

    #[test]
    fn cscl_methods_agree() {
        let s = spec(CrystalFamily::CsCl, 3, 1.0, LengthConvention::CellSide);
        let cfg = QuadratureConfig::default();
        let sub = finite_part_subtracted(&s, &cfg).unwrap();
        let eps = finite_part_epsilon(&s, 1e-6, &cfg).unwrap();
        assert!((sub.value - eps.value).abs() < 5e-6);
    }

    #[test]
    fn scaling_law() {
        let cfg = QuadratureConfig::default();
        for (n, family) in [(3usize, CrystalFamily::NaCl), (4, CrystalFamily::CsCl)] {
            let base =
                finite_part_subtracted(&spec(family, n, 1.0, LengthConvention::HalfPeriod), &cfg)
                    .unwrap()
                    .value;
            let scaled =
                finite_part_subtracted(&spec(family, n, 2.0, LengthConvention::HalfPeriod), &cfg)
                    .unwrap()
                    .value;
            let expected = base * 2f64.powi(2 - n as i32);
            assert!(
                ((scaled - expected) / expected).abs() < 1e-9,
                "n={n}: {scaled} vs {expected}"
            );
        }
    }

    #[test]
    fn low_dimensions_fail_loudly() {
        let cfg = QuadratureConfig::default();
        let planar = spec(CrystalFamily::NaCl, 2, 1.0, LengthConvention::HalfPeriod);
        match finite_part_subtracted(&planar, &cfg) {
            Err(MadelungError::Unsupported(msg)) => assert!(msg.contains("ambiguous")),
            other => panic!("expected unsupported, got {other:?}"),
        }
        assert!(finite_part_epsilon(&planar, 1e-6, &cfg).is_err());
        let line = spec(CrystalFamily::NaCl, 1, 1.0, LengthConvention::HalfPeriod);
        assert!(finite_part_subtracted(&line, &cfg).is_err());
        let cubic = spec(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod);
        assert!(finite_part_epsilon(&cubic, 0.5, &cfg).is_err());
    }

    #[test]
    fn binding_potentials_planar() {
        let lem = LemniscaticConstants::get();
        let two_log_k = 2.0 * lem.log_big_k();
        let cscl = spec(CrystalFamily::CsCl, 2, 1.0, LengthConvention::HalfPeriod);
        let origin = binding_potential_2d(&cscl, 0).unwrap();
        assert_eq!(origin.value, 0.0);
        assert!((origin.horizon - 2f64.sqrt() / lem.big_k).abs() < 1e-14);
        // The origin horizon actually zeroes the limit: approach the
        // cation and remove its own potential at that horizon.
        for family in [CrystalFamily::CsCl, CrystalFamily::NaCl] {
            let s = spec(family, 2, 1.0, LengthConvention::HalfPeriod);
            let b = binding_potential_2d(&s, 0).unwrap();
            let f = |r: f64| {
                let x = TorusPoint::new(&[r * 0.6, r * 0.8], 1.0).unwrap();
                potential_2d_closed(&s, &x).unwrap() + 2.0 * (r / b.horizon).ln()
            };
            let limit = (10.0 * f(1e-5) - f(1e-4)) / 9.0;
            assert!(limit.abs() < 1e-8, "{family:?} origin limit {limit}");
        }
        let anion = binding_potential_2d(&cscl, 1).unwrap();
        assert!(
            (anion.value - two_log_k).abs() < 1e-8,
            "CsCl anion binding {} vs {two_log_k}",
            anion.value
        );
        assert!((anion.horizon - 2f64.sqrt()).abs() < 1e-14);

        let nacl = spec(CrystalFamily::NaCl, 2, 1.0, LengthConvention::HalfPeriod);
        let sites = charge_sites(&nacl);
        let mut anion_values = Vec::new();
        for (idx, (_, q)) in sites.iter().enumerate() {
            let b = binding_potential_2d(&nacl, idx).unwrap();
            if *q < 0 {
                anion_values.push(b.value);
                assert!(
                    (b.horizon - 1.0).abs() < 1e-14,
                    "NaCl anion horizon {}",
                    b.horizon
                );
            } else {
                assert_eq!(b.value, 0.0);
            }
        }
        assert_eq!(anion_values.len(), 2);
        // Equal up to the float noise of theta evaluated 1e-6 from its
        // zero, which the mandated extrapolation radii cannot avoid.
        assert!((anion_values[0] - anion_values[1]).abs() < 2e-9);
        assert!((anion_values[0] - two_log_k).abs() < 1e-8);

        assert!(binding_potential_2d(&cscl, 5).is_err());
        let cubic = spec(CrystalFamily::CsCl, 3, 1.0, LengthConvention::HalfPeriod);
        assert!(binding_potential_2d(&cubic, 0).is_err());
    }

    #[test]
    fn planar_constant_exact_value() {
        // -log K with K = Gamma(1/4)^2 / (4 sqrt(pi)).
        let k = GAMMA_QUARTER * GAMMA_QUARTER / (4.0 * std::f64::consts::PI.sqrt());
        let expected = -k.ln();
        assert!((expected - (-0.617_385_745_351_564)).abs() < 1e-14);
        for family in [CrystalFamily::CsCl, CrystalFamily::NaCl] {
            for &a in &[0.5, 1.0, 2.0] {
                let s = spec(family, 2, a, LengthConvention::HalfPeriod);
                let m = madelung_2d(&s).unwrap();
                assert!(
                    (m.value - expected).abs() < 1e-12,
                    "{family:?} a={a}: {} vs {expected}",
                    m.value
                );
                assert_eq!(m.method, Method::ClosedForm2d);
            }
        }
        assert!((planar_exact_value() - expected).abs() < 1e-13);
    }

    #[test]
    fn cell_energies() {
        let cfg = QuadratureConfig::default();
        let lem = LemniscaticConstants::get();

        let nacl3 = spec(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod);
        let m = finite_part_subtracted(&nacl3, &cfg).unwrap();
        let u = cell_energy(&nacl3, &m).unwrap();
        assert!((u - (-6.990_258_4)).abs() < 1e-6, "NaCl cell energy {u}");

        let cscl3 = spec(CrystalFamily::CsCl, 3, 1.0, LengthConvention::CellSide);
        let mc = finite_part_subtracted(&cscl3, &cfg).unwrap();
        let uc = cell_energy(&cscl3, &mc).unwrap();
        assert!((uc - (-4.070_723_02)).abs() < 1e-7, "CsCl cell energy {uc}");

        let cscl2 = spec(CrystalFamily::CsCl, 2, 1.0, LengthConvention::HalfPeriod);
        let m2 = madelung_2d(&cscl2).unwrap();
        let u2 = cell_energy(&cscl2, &m2).unwrap();
        assert!(
            (u2 - (-lem.log_big_k())).abs() < 1e-8,
            "planar CsCl energy {u2}"
        );

        let nacl2 = spec(CrystalFamily::NaCl, 2, 1.0, LengthConvention::HalfPeriod);
        let m2n = madelung_2d(&nacl2).unwrap();
        let u2n = cell_energy(&nacl2, &m2n).unwrap();
        assert!(
            (u2n - (-2.0 * lem.log_big_k())).abs() < 1e-8,
            "planar NaCl energy {u2n}"
        );

        // Mismatched spec is rejected.
        assert!(cell_energy(&nacl3, &mc).is_err());
    }

    #[test]
    fn ambiguous_planar_finite_part() {
        let cfg = QuadratureConfig::default();
        let s = spec(CrystalFamily::CsCl, 2, 1.0, LengthConvention::HalfPeriod);
        let r1 = ambiguous_finite_part_2d(&s, 1.0, &cfg).unwrap();
        let re = ambiguous_finite_part_2d(&s, std::f64::consts::E, &cfg).unwrap();
        assert!(
            (r1 - re - 1.0).abs() < 1e-12,
            "log-shift property: {r1} - {re}"
        );
        assert!(r1.is_finite() && re.is_finite());

        // Exact location of the zero: matching the heat-kernel cutoff to a
        // physical radius gives result(A) = gamma + log(pi/(2 K^2)) - log A,
        // so the zero sits at A = e^gamma pi / (2 K^2). The naive
        // identification A = (a sqrt2 / K)^2 misses the gamma + log(pi/(4a^2))
        // offset.
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        let lem = LemniscaticConstants::get();
        let predicted_zero_at =
            EULER_GAMMA.exp() * std::f64::consts::PI / (2.0 * lem.big_k * lem.big_k);
        let at_zero = ambiguous_finite_part_2d(&s, predicted_zero_at, &cfg).unwrap();
        assert!(at_zero.abs() < 1e-10, "value at predicted zero: {at_zero}");

        assert!(ambiguous_finite_part_2d(&s, -1.0, &cfg).is_err());
        let cubic = spec(CrystalFamily::CsCl, 3, 1.0, LengthConvention::HalfPeriod);
        assert!(ambiguous_finite_part_2d(&cubic, 1.0, &cfg).is_err());
    }

    #[test]
    fn result_serializes_flat() {
        let s = spec(CrystalFamily::NaCl, 2, 1.0, LengthConvention::HalfPeriod);
        let m = madelung_2d(&s).unwrap();
        let json = serde_json::to_value(m).unwrap();
        assert_eq!(json["family"], "nacl");
        assert_eq!(json["n"], 2);
        assert_eq!(json["method"], "closed-form-2d");
        assert!(json["value"].is_f64());
        assert!(json["eps"].is_null());
    }
}
