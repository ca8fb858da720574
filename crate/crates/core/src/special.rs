//! One-dimensional Jacobi theta functions with purely imaginary modular
//! parameter `i*v`, their zero-argument values and derivative, the
//! lemniscatic constants at `v = 1`, and the exponential-integral tail
//! bound used to truncate improper integrals over the modular parameter.
//!
//! Conventions: nome `q = exp(-pi*v)`, and
//!
//! ```text
//! theta1(z) = 2 sum_{k>=0} (-1)^k q^{(k+1/2)^2} sin((2k+1) z)
//! theta2(z) = 2 sum_{k>=0}        q^{(k+1/2)^2} cos((2k+1) z)
//! theta3(z) = 1 + 2 sum_{k>=1}        q^{k^2} cos(2 k z)
//! theta4(z) = 1 + 2 sum_{k>=1} (-1)^k q^{k^2} cos(2 k z)
//! ```
//!
//! For `v < 1` the imaginary modular transformation is applied so the
//! series that is actually summed always has modular parameter `>= 1`:
//!
//! ```text
//! theta1(z | iv) = -i v^{-1/2} exp(-z^2/(pi v)) theta1(i z / v | i/v)
//! theta2(z | iv) =    v^{-1/2} exp(-z^2/(pi v)) theta4(i z / v | i/v)
//! theta3(z | iv) =    v^{-1/2} exp(-z^2/(pi v)) theta3(i z / v | i/v)
//! theta4(z | iv) =    v^{-1/2} exp(-z^2/(pi v)) theta2(i z / v | i/v)
//! ```

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{MadelungError, Result};

/// Default series-truncation tolerance: double-precision working accuracy
/// with margin.
pub const DEFAULT_TOL: f64 = 1e-14;

const MAX_SERIES_TERMS: usize = 500;

/// Which of the four classical theta functions to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaKind {
    One,
    Two,
    Three,
    Four,
}

impl ThetaKind {
    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            1 => Ok(ThetaKind::One),
            2 => Ok(ThetaKind::Two),
            3 => Ok(ThetaKind::Three),
            4 => Ok(ThetaKind::Four),
            _ => Err(MadelungError::Domain(format!(
                "theta kind must be 1..=4, got {k}"
            ))),
        }
    }
}

/// Argument bundle for [`jacobi_theta`]: complex argument `z`, modular
/// parameter `i*v` with `v > 0`, and the series-truncation tolerance.
#[derive(Clone, Copy, Debug)]
pub struct ThetaArg {
    pub z: Complex64,
    pub v: f64,
    pub tol: f64,
}

impl ThetaArg {
    pub fn new(z: Complex64, v: f64, tol: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(MadelungError::Domain(format!(
                "theta modular parameter v must be positive and finite, got {v}"
            )));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(MadelungError::Domain(format!(
                "theta tolerance must be positive, got {tol}"
            )));
        }
        Ok(ThetaArg { z, v, tol })
    }

    pub fn real(x: f64, v: f64, tol: f64) -> Result<Self> {
        Self::new(Complex64::new(x, 0.0), v, tol)
    }
}

/// Truncation rule shared by all series here: stop once the bound on the
/// next term drops below `tol * (|partial| + tol)`. The additive `tol`
/// keeps the loop finite near zeros of theta1.
fn converged(next_term_bound: f64, partial_magnitude: f64, tol: f64) -> bool {
    next_term_bound < tol * (partial_magnitude + tol)
}

fn series_overrun(what: &str) -> MadelungError {
    MadelungError::SelfCheck(format!(
        "{what} failed to converge within {MAX_SERIES_TERMS} terms"
    ))
}

/// Jacobi theta function of the given kind at complex argument `arg.z`
/// and modular parameter `i * arg.v`.
pub fn jacobi_theta(kind: ThetaKind, arg: &ThetaArg) -> Result<Complex64> {
    ThetaArg::new(arg.z, arg.v, arg.tol)?;
    if arg.v >= 1.0 {
        return theta_series(kind, arg.z, arg.v, arg.tol);
    }
    // Modular transform to parameter 1/v >= 1. The real part is first
    // reduced to |Re z| <= pi/4 through the period-pi and half-period
    // shift identities; this keeps every exponent of the transformed
    // series nonpositive. Without the reduction a representable value
    // would be reached only as the product of an overflowing series and
    // an underflowing prefactor.
    let v = arg.v;
    let mut kind = kind;
    let mut z = arg.z;
    let mut front = Complex64::new(1.0, 0.0);
    let shifts = (z.re / PI).round();
    z -= shifts * PI;
    if matches!(kind, ThetaKind::One | ThetaKind::Two) && (shifts as i64) % 2 != 0 {
        front = -front;
    }
    if z.re.abs() > PI / 4.0 {
        let s = z.re.signum();
        z -= s * PI / 2.0;
        // theta1(a + pi/2) =  theta2(a)    theta1(a - pi/2) = -theta2(a)
        // theta2(a + pi/2) = -theta1(a)    theta2(a - pi/2) =  theta1(a)
        // theta3(a +- pi/2) = theta4(a)    theta4(a +- pi/2) = theta3(a)
        let (swapped, factor) = match (kind, s > 0.0) {
            (ThetaKind::One, true) => (ThetaKind::Two, 1.0),
            (ThetaKind::One, false) => (ThetaKind::Two, -1.0),
            (ThetaKind::Two, true) => (ThetaKind::One, -1.0),
            (ThetaKind::Two, false) => (ThetaKind::One, 1.0),
            (ThetaKind::Three, _) => (ThetaKind::Four, 1.0),
            (ThetaKind::Four, _) => (ThetaKind::Three, 1.0),
        };
        kind = swapped;
        front *= factor;
    }
    let zp = Complex64::new(-z.im / v, z.re / v); // i z / v
    let pref = (-z * z / (PI * v)).exp() / v.sqrt();
    let (mapped, extra) = match kind {
        ThetaKind::One => (ThetaKind::One, Complex64::new(0.0, -1.0)),
        ThetaKind::Two => (ThetaKind::Four, Complex64::new(1.0, 0.0)),
        ThetaKind::Three => (ThetaKind::Three, Complex64::new(1.0, 0.0)),
        ThetaKind::Four => (ThetaKind::Two, Complex64::new(1.0, 0.0)),
    };
    let inner = theta_series(mapped, zp, 1.0 / v, arg.tol)?;
    Ok(front * extra * pref * inner)
}

/// Direct q-series. Each term `q^{m} trig(l z)` is evaluated as a pair of
/// complex exponentials with the q-power folded into the exponent, so a
/// vanishing magnitude never multiplies an overflowing trig factor.
fn theta_series(kind: ThetaKind, z: Complex64, v: f64, tol: f64) -> Result<Complex64> {
    let im = z.im.abs();
    let i = Complex64::new(0.0, 1.0);
    // exp(c + i l z) + sign * exp(c - i l z)
    let exp_pair = |c: f64, l: f64, sign: f64| {
        (Complex64::new(c, 0.0) + i * l * z).exp()
            + sign * (Complex64::new(c, 0.0) - i * l * z).exp()
    };
    match kind {
        ThetaKind::Three | ThetaKind::Four => {
            let mut sum = Complex64::new(1.0, 0.0);
            for k in 1..=MAX_SERIES_TERMS {
                let kf = k as f64;
                let sign = if kind == ThetaKind::Four && k % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                // 2 q^{k^2} cos(2 k z)
                sum += sign * exp_pair(-PI * v * kf * kf, 2.0 * kf, 1.0);
                let kn = kf + 1.0;
                let bound = 2.0 * (-PI * v * kn * kn + 2.0 * kn * im).exp();
                if converged(bound, sum.norm(), tol) {
                    return Ok(sum);
                }
            }
            Err(series_overrun("theta3/theta4 series"))
        }
        ThetaKind::One | ThetaKind::Two => {
            let mut sum = Complex64::new(0.0, 0.0);
            for k in 0..=MAX_SERIES_TERMS {
                let kh = k as f64 + 0.5;
                let c = -PI * v * kh * kh;
                let l = 2.0 * k as f64 + 1.0;
                let term = match kind {
                    // 2 q^{(k+1/2)^2} sin((2k+1) z), sign-alternating
                    ThetaKind::One => {
                        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                        sign * i * exp_pair(c, l, -1.0)
                    }
                    // 2 q^{(k+1/2)^2} cos((2k+1) z)
                    _ => exp_pair(c, l, 1.0),
                };
                sum += term;
                let kn = kh + 1.0;
                let bound = 2.0 * (-PI * v * kn * kn + (2.0 * kn + 1.0) * im).exp();
                if converged(bound, sum.norm(), tol) {
                    return Ok(sum);
                }
            }
            Err(series_overrun("theta1/theta2 series"))
        }
    }
}

/// Fast real-valued path for `theta_k(0 | i v)`, kinds 2, 3, 4.
///
/// For `v < 1` the zero-argument modular transform
/// `theta3 -> theta3`, `theta2 <-> theta4` is applied with the
/// `v^{-1/2}` prefactor, so the summed series always has parameter
/// `1/v >= 1`.
pub fn jacobi_theta_zero(kind: u8, v: f64, tol: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(MadelungError::Domain(format!(
            "theta modular parameter v must be positive and finite, got {v}"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(MadelungError::Domain(format!(
            "theta tolerance must be positive, got {tol}"
        )));
    }
    if v < 1.0 {
        let mapped = match kind {
            2 => 4,
            3 => 3,
            4 => 2,
            _ => {
                return Err(MadelungError::Domain(format!(
                    "jacobi_theta_zero supports kinds 2, 3, 4; got {kind}"
                )))
            }
        };
        return Ok(jacobi_theta_zero(mapped, 1.0 / v, tol)? / v.sqrt());
    }
    match kind {
        3 => Ok(1.0 + theta3_zero_tail(v, tol)),
        4 => Ok(1.0 + theta4_zero_tail(v, tol)),
        2 => {
            let mut sum = 0.0;
            for k in 0..=MAX_SERIES_TERMS {
                let kh = k as f64 + 0.5;
                sum += 2.0 * (-PI * v * kh * kh).exp();
                let kn = kh + 1.0;
                if converged(2.0 * (-PI * v * kn * kn).exp(), sum, tol) {
                    return Ok(sum);
                }
            }
            Err(series_overrun("theta2 zero series"))
        }
        _ => Err(MadelungError::Domain(format!(
            "jacobi_theta_zero supports kinds 2, 3, 4; got {kind}"
        ))),
    }
}

/// `theta3(0 | iv) - 1` for `v >= 1`, summed without the leading 1 so the
/// result stays accurate when it is far below machine epsilon.
pub(crate) fn theta3_zero_tail(v: f64, tol: f64) -> f64 {
    debug_assert!(v >= 1.0);
    let mut sum = 0.0;
    for k in 1..=MAX_SERIES_TERMS {
        let kf = k as f64;
        sum += 2.0 * (-PI * v * kf * kf).exp();
        let kn = kf + 1.0;
        if converged(2.0 * (-PI * v * kn * kn).exp(), sum.abs(), tol) {
            break;
        }
    }
    sum
}

/// `theta4(0 | iv) - 1` for `v >= 1`.
pub(crate) fn theta4_zero_tail(v: f64, tol: f64) -> f64 {
    debug_assert!(v >= 1.0);
    let mut sum = 0.0;
    for k in 1..=MAX_SERIES_TERMS {
        let kf = k as f64;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        sum += sign * 2.0 * (-PI * v * kf * kf).exp();
        let kn = kf + 1.0;
        if converged(2.0 * (-PI * v * kn * kn).exp(), sum.abs(), tol) {
            break;
        }
    }
    sum
}

/// `theta3(0|iv) - theta4(0|iv)`, free of cancellation on both branches.
///
/// For `v >= 1` the difference collapses to the odd-index series
/// `4 (q + q^9 + q^25 + ...)`; for `v < 1` it becomes
/// `v^{-1/2} (theta3(0|i/v) - theta2(0|i/v))`, a difference of a value
/// near 1 and a value near 0.
pub(crate) fn theta3_minus_theta4_zero(v: f64, tol: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(MadelungError::Domain(format!(
            "theta modular parameter v must be positive and finite, got {v}"
        )));
    }
    if v >= 1.0 {
        let mut sum = 0.0;
        for j in 0..=MAX_SERIES_TERMS {
            let k = (2 * j + 1) as f64;
            sum += 4.0 * (-PI * v * k * k).exp();
            let kn = k + 2.0;
            if converged(4.0 * (-PI * v * kn * kn).exp(), sum, tol) {
                return Ok(sum);
            }
        }
        Err(series_overrun("theta3-theta4 odd series"))
    } else {
        let t3 = jacobi_theta_zero(3, 1.0 / v, tol)?;
        let t2 = jacobi_theta_zero(2, 1.0 / v, tol)?;
        Ok((t3 - t2) / v.sqrt())
    }
}

/// Derivative `theta1'(0 | iv)` by the term-wise differentiated q-series.
/// For `v < 1` the transform `theta1'(0|iv) = v^{-3/2} theta1'(0|i/v)`
/// keeps the summed parameter at least 1.
pub fn theta1_prime_zero(v: f64, tol: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(MadelungError::Domain(format!(
            "theta modular parameter v must be positive and finite, got {v}"
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(MadelungError::Domain(format!(
            "theta tolerance must be positive, got {tol}"
        )));
    }
    if v < 1.0 {
        return Ok(theta1_prime_zero(1.0 / v, tol)? / (v * v.sqrt()));
    }
    let mut sum = 0.0;
    for k in 0..=MAX_SERIES_TERMS {
        let kh = k as f64 + 0.5;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        sum += sign * 2.0 * (2.0 * k as f64 + 1.0) * (-PI * v * kh * kh).exp();
        let kn = kh + 1.0;
        let bound = 2.0 * (2.0 * k as f64 + 3.0) * (-PI * v * kn * kn).exp();
        if converged(bound, sum.abs(), tol) {
            return Ok(sum);
        }
    }
    Err(series_overrun("theta1' series"))
}

/// Gamma(m/2) for positive integer m.
pub(crate) fn gamma_half_integer(m: u32) -> f64 {
    assert!(m >= 1, "gamma_half_integer needs m >= 1");
    if m.is_multiple_of(2) {
        // Gamma(k) = (k-1)!
        let k = m / 2;
        let mut g = 1.0;
        for i in 2..k {
            g *= i as f64;
        }
        g
    } else {
        // Gamma(1/2 + j) = sqrt(pi) (2j-1)!! / 2^j
        let j = (m - 1) / 2;
        let mut g = PI.sqrt();
        for i in 0..j {
            g *= (2 * i + 1) as f64 / 2.0;
        }
        g
    }
}

/// Rigorous upper bound on `|1 - Theta(x|v)|`, uniform in `x`, for the
/// n-dimensional theta function with half-period `a`:
///
/// ```text
/// 2 n exp(-pi^2 v / a^2) + pi^{n/2}/Gamma(n/2) * E_{1-n/2}(pi^2 v / a^2)
/// ```
///
/// The exponential integral is evaluated by its leading asymptotic form
/// `E_nu(z) ~ exp(-z)/z` with an explicit factor-2 safety margin; the
/// bound only gates truncation and never enters reported values. Certified
/// for `v >= 1`.
pub fn tail_bound(n: usize, a: f64, v: f64) -> Result<f64> {
    if n < 1 {
        return Err(MadelungError::Domain(
            "tail_bound needs dimension n >= 1".into(),
        ));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(MadelungError::Domain(format!(
            "half-period a must be positive, got {a}"
        )));
    }
    if !(v.is_finite() && v >= 1.0) {
        return Err(MadelungError::Domain(format!(
            "tail_bound is certified only for v >= 1, got {v}"
        )));
    }
    let z = PI * PI * v / (a * a);
    let first = 2.0 * n as f64 * (-z).exp();
    let coeff = PI.powf(n as f64 / 2.0) / gamma_half_integer(n as u32);
    let second = coeff * 2.0 * (-z).exp() / z;
    Ok(first + second)
}

/// Theta zero-values and derived constants on the lemniscatic lattice
/// (modular parameter exactly `i`), where every quantity reduces to
/// Gamma(1/4) expressions.
#[derive(Clone, Copy, Debug)]
pub struct LemniscaticConstants {
    /// theta3(0|i)
    pub theta3_0: f64,
    /// theta2(0|i) = 2^{-1/4} theta3(0|i)
    pub theta2_0: f64,
    /// theta4(0|i) = theta2(0|i)
    pub theta4_0: f64,
    /// theta1'(0|i) = theta2 theta3 theta4 = 2^{-1/2} theta3^3
    pub theta1p_0: f64,
    /// Complete elliptic integral K(1/sqrt(2)) = pi theta3(0|i)^2 / 2
    pub big_k: f64,
}

static LEMNISCATIC: OnceLock<LemniscaticConstants> = OnceLock::new();

impl LemniscaticConstants {
    pub fn compute() -> Self {
        let tol = 1e-16;
        let theta3_0 = jacobi_theta_zero(3, 1.0, tol).expect("theta3(0|i)");
        let theta2_0 = jacobi_theta_zero(2, 1.0, tol).expect("theta2(0|i)");
        let theta4_0 = jacobi_theta_zero(4, 1.0, tol).expect("theta4(0|i)");
        let theta1p_0 = theta1_prime_zero(1.0, tol).expect("theta1'(0|i)");
        let big_k = PI * theta3_0 * theta3_0 / 2.0;
        LemniscaticConstants {
            theta3_0,
            theta2_0,
            theta4_0,
            theta1p_0,
            big_k,
        }
    }

    pub fn get() -> &'static LemniscaticConstants {
        LEMNISCATIC.get_or_init(LemniscaticConstants::compute)
    }

    /// log K, the magnitude of the planar Madelung constant.
    pub fn log_big_k(&self) -> f64 {
        self.big_k.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Gamma(1/4), the only external constant the lemniscatic identities need.
    const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;

    fn theta3_zero_direct(v: f64) -> f64 {
        // Independent of the production path: plain series, no modular
        // transform, converges for every v > 0.
        let mut s = 1.0;
        for k in 1..400 {
            let kf = k as f64;
            s += 2.0 * (-PI * v * kf * kf).exp();
        }
        s
    }

    #[test]
    fn theta3_zero_matches_gamma_quarter_closed_form() {
        let expected = GAMMA_QUARTER / (2.0_f64.sqrt() * PI.powf(0.75));
        let got = jacobi_theta_zero(3, 1.0, 1e-15).unwrap();
        assert!(
            ((got - expected) / expected).abs() < 1e-14,
            "got {got}, expected {expected}"
        );
        // Cross-check against the direct q-series.
        assert!((got - theta3_zero_direct(1.0)).abs() < 1e-15);
    }

    #[test]
    fn lemniscatic_identities() {
        let c = LemniscaticConstants::get();
        let quarter = 2.0_f64.powf(-0.25);
        assert!(((c.theta2_0 - quarter * c.theta3_0) / c.theta3_0).abs() < 1e-13);
        assert!(((c.theta4_0 - quarter * c.theta3_0) / c.theta3_0).abs() < 1e-13);
        assert!(((c.theta2_0 - c.theta4_0) / c.theta3_0).abs() < 1e-14);
        let jacobi = c.theta2_0 * c.theta3_0 * c.theta4_0;
        assert!(((c.theta1p_0 - jacobi) / jacobi).abs() < 1e-13);
        let cube = c.theta3_0.powi(3) / 2.0_f64.sqrt();
        assert!(((c.theta1p_0 - cube) / cube).abs() < 1e-13);
        let k_reference = GAMMA_QUARTER * GAMMA_QUARTER / (4.0 * PI.sqrt());
        assert!(((c.big_k - k_reference) / k_reference).abs() < 1e-13);
    }

    #[test]
    fn theta3_zero_large_v_is_one_plus_leading_term() {
        let got = jacobi_theta_zero(3, 50.0, 1e-15).unwrap();
        // Only the k = 0, +-1 terms survive: 1 + 2 exp(-50 pi) = 1 to f64.
        assert_eq!(got, 1.0 + 2.0 * (-50.0 * PI).exp());
        assert!((got - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta4_equals_scaled_theta3_at_v_one() {
        let t3 = jacobi_theta_zero(3, 1.0, 1e-15).unwrap();
        let t4 = jacobi_theta_zero(4, 1.0, 1e-15).unwrap();
        assert!((t4 - 2.0_f64.powf(-0.25) * t3).abs() < 1e-14);
        let t2 = jacobi_theta_zero(2, 1.0, 1e-15).unwrap();
        assert!((t2 - t4).abs() < 1e-14);
    }

    #[test]
    fn theta3_zero_small_v_asymptotics() {
        // theta3(0|i*0.01) = 10 * theta3(0|i*100); the correction is far
        // below double precision.
        let got = jacobi_theta_zero(3, 0.01, 1e-15).unwrap();
        assert!(((got - 10.0) / 10.0).abs() < 1e-15);
    }

    #[test]
    fn theta4_zero_small_v_asymptotics() {
        // theta4(0|iv) = (2/sqrt(v)) exp(-pi/(4v)) (1 + O(exp(-2pi/v))).
        let v = 0.01;
        let got = jacobi_theta_zero(4, v, 1e-15).unwrap();
        let expected = 2.0 / v.sqrt() * (-PI / (4.0 * v)).exp();
        assert!(
            ((got - expected) / expected).abs() < 1e-12,
            "got {got:e}, expected {expected:e}"
        );
    }

    #[test]
    fn modular_consistency_against_direct_series() {
        for &v in &[0.1, 0.5, 2.0, 10.0] {
            let fast = jacobi_theta_zero(3, v, 1e-15).unwrap();
            let direct = theta3_zero_direct(v);
            assert!(((fast - direct) / direct).abs() < 1e-13, "v={v}");
            let transformed = theta3_zero_direct(1.0 / v) / v.sqrt();
            assert!(((fast - transformed) / transformed).abs() < 1e-13, "v={v}");
        }
    }

    #[test]
    fn theta1_prime_identity_and_decay() {
        let t1p = theta1_prime_zero(1.0, 1e-15).unwrap();
        let t3 = jacobi_theta_zero(3, 1.0, 1e-15).unwrap();
        let expected = t3.powi(3) / 2.0_f64.sqrt();
        assert!(((t1p - expected) / expected).abs() < 1e-12);
        // Leading term 2 exp(-pi v / 4) at large v.
        let v = 40.0;
        let tail = theta1_prime_zero(v, 1e-15).unwrap();
        let leading = 2.0 * (-PI * v / 4.0).exp();
        assert!(((tail - leading) / leading).abs() < 1e-10);
        assert!(tail < 1e-13);
    }

    #[test]
    fn theta1_prime_modular_transform() {
        let v = 0.37;
        let got = theta1_prime_zero(v, 1e-15).unwrap();
        let expected = theta1_prime_zero(1.0 / v, 1e-15).unwrap() / (v * v.sqrt());
        assert!(((got - expected) / expected).abs() < 1e-14);
    }

    #[test]
    fn complex_theta_matches_zero_argument_path() {
        for &v in &[0.3, 1.0, 4.0] {
            for kind in [ThetaKind::Two, ThetaKind::Three, ThetaKind::Four] {
                let idx = match kind {
                    ThetaKind::Two => 2,
                    ThetaKind::Three => 3,
                    _ => 4,
                };
                let arg = ThetaArg::real(0.0, v, 1e-15).unwrap();
                let z = jacobi_theta(kind, &arg).unwrap();
                let r = jacobi_theta_zero(idx, v, 1e-15).unwrap();
                assert!(
                    (z.re - r).abs() < 1e-13 * r.abs().max(1.0),
                    "kind {idx} v {v}"
                );
                assert!(z.im.abs() < 1e-15 * r.abs().max(1.0));
            }
        }
    }

    #[test]
    fn kinds_three_four_real_for_real_argument() {
        let mut rng = crate::util::SplitMix64::new(0x5eed);
        for _ in 0..50 {
            let x = rng.range(-3.0, 3.0);
            let v = rng.range(0.1, 5.0);
            for kind in [ThetaKind::Three, ThetaKind::Four] {
                let val = jacobi_theta(kind, &ThetaArg::real(x, v, 1e-15).unwrap()).unwrap();
                assert!(
                    val.im.abs() <= 1e-15 * val.norm().max(1e-300),
                    "x={x} v={v}"
                );
            }
        }
    }

    #[test]
    fn periodicity_and_half_period_shift() {
        let mut rng = crate::util::SplitMix64::new(0xabcdef);
        for _ in 0..50 {
            let z = Complex64::new(rng.range(-2.0, 2.0), rng.range(-0.8, 0.8));
            let v = rng.range(0.2, 4.0);
            let t = |kind, zz| jacobi_theta(kind, &ThetaArg::new(zz, v, 1e-15).unwrap()).unwrap();
            let a = t(ThetaKind::Three, z);
            let b = t(ThetaKind::Three, z + PI);
            assert!((a - b).norm() < 1e-13 * a.norm().max(1.0), "z={z} v={v}");
            let c = t(ThetaKind::Three, z + PI / 2.0);
            let d = t(ThetaKind::Four, z);
            assert!((c - d).norm() < 1e-13 * d.norm().max(1.0), "z={z} v={v}");
        }
    }

    #[test]
    fn theta1_transform_consistent_with_direct_series() {
        // For moderate v < 1 the direct series still converges; the
        // transformed path must agree with it.
        let z = Complex64::new(0.7, 0.25);
        for &v in &[0.4, 0.7, 0.95] {
            let fast = jacobi_theta(ThetaKind::One, &ThetaArg::new(z, v, 1e-15).unwrap()).unwrap();
            let direct = theta_series(ThetaKind::One, z, v, 1e-16).unwrap();
            assert!((fast - direct).norm() < 1e-12 * direct.norm(), "v={v}");
        }
    }

    #[test]
    fn transform_with_argument_reduction_matches_direct_series() {
        // Arguments several periods out and on both sides of the half
        // period, every kind, against the raw series as oracle.
        let mut rng = crate::util::SplitMix64::new(0xfeed);
        for _ in 0..120 {
            let z = Complex64::new(rng.range(-7.0, 7.0), rng.range(-0.6, 0.6));
            let v = rng.range(0.3, 0.99);
            for kind in [
                ThetaKind::One,
                ThetaKind::Two,
                ThetaKind::Three,
                ThetaKind::Four,
            ] {
                let fast = jacobi_theta(kind, &ThetaArg::new(z, v, 1e-15).unwrap()).unwrap();
                let direct = theta_series(kind, z, v, 1e-16).unwrap();
                let scale = direct.norm().max(1e-12);
                assert!(
                    (fast - direct).norm() < 1e-11 * scale,
                    "kind {kind:?} z {z} v {v}: {fast} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn tiny_v_real_arguments_stay_finite() {
        // The heat-kernel regime: results are astronomically small or
        // large but must never degrade to NaN or spurious infinities.
        let mut rng = crate::util::SplitMix64::new(0x0dd);
        for _ in 0..80 {
            let x = rng.range(0.0, 2.0 * PI);
            let v = rng.range(1e-6, 0.05);
            for kind in [
                ThetaKind::One,
                ThetaKind::Two,
                ThetaKind::Three,
                ThetaKind::Four,
            ] {
                let val = jacobi_theta(kind, &ThetaArg::real(x, v, 1e-14).unwrap()).unwrap();
                assert!(
                    val.re.is_finite() && val.im.is_finite(),
                    "kind {kind:?} x {x} v {v}: {val}"
                );
            }
            // theta3 cross-checked against its zero-argument counterpart
            // at the lattice point.
            let t3 = jacobi_theta(ThetaKind::Three, &ThetaArg::real(0.0, v, 1e-14).unwrap())
                .unwrap()
                .re;
            let t3z = jacobi_theta_zero(3, v, 1e-14).unwrap();
            assert!(((t3 - t3z) / t3z).abs() < 1e-12);
        }
    }

    #[test]
    fn theta3_minus_theta4_zero_consistent() {
        for &v in &[0.05, 0.3, 1.0, 2.5] {
            let diff = theta3_minus_theta4_zero(v, 1e-15).unwrap();
            let t3 = jacobi_theta_zero(3, v, 1e-15).unwrap();
            let t4 = jacobi_theta_zero(4, v, 1e-15).unwrap();
            assert!(((diff - (t3 - t4)) / diff).abs() < 1e-12, "v={v}");
            assert!(diff > 0.0);
        }
    }

    #[test]
    fn tail_bound_magnitude_and_monotonicity() {
        let b = tail_bound(3, 1.0, 10.0).unwrap();
        // 6 exp(-10 pi^2) plus the exponential-integral term.
        assert!(b > 1e-43 && b < 1e-41, "bound {b:e}");
        let mut prev = f64::INFINITY;
        for &v in &[1.0, 2.0, 5.0, 10.0, 50.0] {
            let bound = tail_bound(2, 1.0, v).unwrap();
            assert!(bound <= prev);
            prev = bound;
        }
        assert!(tail_bound(2, 1.0, 0.5).is_err());
        assert!(tail_bound(2, -1.0, 2.0).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(jacobi_theta_zero(3, -1.0, 1e-14).is_err());
        assert!(jacobi_theta_zero(1, 1.0, 1e-14).is_err());
        assert!(jacobi_theta_zero(3, 1.0, 0.0).is_err());
        assert!(theta1_prime_zero(0.0, 1e-14).is_err());
        assert!(ThetaArg::real(0.0, 0.0, 1e-14).is_err());
    }

    #[test]
    fn gamma_half_integer_values() {
        assert!((gamma_half_integer(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(2) - 1.0).abs() < 1e-15);
        assert!((gamma_half_integer(3) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((gamma_half_integer(4) - 1.0).abs() < 1e-15);
        assert!((gamma_half_integer(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(8) - 6.0).abs() < 1e-15);
    }
}
