//! Charge distributions of NaCl- and CsCl-type hypercubic crystals and
//! the zero-mean electrostatic potential on the torus (Gaussian units),
//! plus sampled potential fields with CSV/JSON serialization.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{MadelungError, Result};
use crate::green::psi_integral;
use crate::lattice::TorusPoint;
use crate::quad::QuadratureConfig;
use crate::special::{jacobi_theta, ThetaArg, ThetaKind};
use crate::util;

/// Proximity (relative to `a`) below which a sample point counts as a
/// charge site; below quadrature resolvability.
const SITE_SNAP_REL: f64 = 1e-9;

/// Crystal family: rock-salt (alternating charges on every cell corner)
/// or caesium-chloride (body-centered counter-ion).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrystalFamily {
    #[serde(rename = "nacl")]
    NaCl,
    #[serde(rename = "cscl")]
    CsCl,
}

impl std::fmt::Display for CrystalFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CrystalFamily::NaCl => write!(f, "nacl"),
            CrystalFamily::CsCl => write!(f, "cscl"),
        }
    }
}

/// Which length the user supplied; everything internal runs on the
/// half-period `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthConvention {
    /// The supplied length is the half-period `a` itself.
    #[serde(rename = "half-period-a")]
    HalfPeriod,
    /// The supplied length is the cell side `2a`.
    #[serde(rename = "cell-side-2a")]
    CellSide,
    /// The supplied length is the nearest-neighbour separation:
    /// `a` for NaCl, `a sqrt(n)` for CsCl.
    #[serde(rename = "nearest-neighbour")]
    NearestNeighbour,
}

/// A hypercubic crystal: family, dimension, and resolved half-period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    pub family: CrystalFamily,
    pub n: usize,
    /// Half-period of the Bravais lattice (cell side is `2a`).
    pub a: f64,
    pub convention: LengthConvention,
}

impl CrystalSpec {
    /// Build a spec, resolving `length` to the half-period according to
    /// the stated convention.
    pub fn new(
        family: CrystalFamily,
        n: usize,
        length: f64,
        convention: LengthConvention,
    ) -> Result<Self> {
        if n < 1 {
            return Err(MadelungError::Domain(
                "crystal dimension must be >= 1".into(),
            ));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(MadelungError::Domain(format!(
                "length parameter must be positive and finite, got {length}"
            )));
        }
        let a = match convention {
            LengthConvention::HalfPeriod => length,
            LengthConvention::CellSide => length / 2.0,
            LengthConvention::NearestNeighbour => match family {
                CrystalFamily::NaCl => length,
                CrystalFamily::CsCl => length / (n as f64).sqrt(),
            },
        };
        Ok(CrystalSpec {
            family,
            n,
            a,
            convention,
        })
    }

    /// Cell measure `|T| = (2a)^n`.
    pub fn cell_volume(&self) -> f64 {
        (2.0 * self.a).powi(self.n as i32)
    }
}

/// The point charges of one fundamental cell. Exactly `2^n` sites with
/// charges `(-1)^{|k|}` at `a k`, `k in {0,1}^n`, for NaCl; the origin
/// cation and the body-center anion for CsCl. Charges always sum to zero.
pub fn charge_sites(spec: &CrystalSpec) -> Vec<(TorusPoint, i32)> {
    let a = spec.a;
    match spec.family {
        CrystalFamily::NaCl => {
            let mut sites = Vec::with_capacity(1 << spec.n);
            for mask in 0u64..(1u64 << spec.n) {
                let coords: Vec<f64> = (0..spec.n)
                    .map(|j| if mask >> j & 1 == 1 { a } else { 0.0 })
                    .collect();
                let charge = if mask.count_ones() % 2 == 1 { -1 } else { 1 };
                sites.push((TorusPoint::new(&coords, a).expect("valid site"), charge));
            }
            sites
        }
        CrystalFamily::CsCl => vec![
            (
                TorusPoint::new(&vec![0.0; spec.n], a).expect("valid site"),
                1,
            ),
            (
                TorusPoint::new(&vec![a; spec.n], a).expect("valid site"),
                -1,
            ),
        ],
    }
}

fn nearest_site_distance(spec: &CrystalSpec, x: &TorusPoint) -> f64 {
    charge_sites(spec)
        .iter()
        .map(|(p, _)| x.distance_to(p))
        .fold(f64::INFINITY, f64::min)
}

fn check_point(spec: &CrystalSpec, x: &TorusPoint) -> Result<()> {
    if x.dim() != spec.n {
        return Err(MadelungError::Domain(format!(
            "point dimension {} does not match crystal dimension {}",
            x.dim(),
            spec.n
        )));
    }
    if (x.half_period() - spec.a).abs() > 1e-12 * spec.a {
        return Err(MadelungError::Domain(
            "point half-period does not match the crystal spec".into(),
        ));
    }
    if nearest_site_distance(spec, x) < SITE_SNAP_REL * spec.a {
        return Err(MadelungError::Singularity(
            "the potential diverges at charge sites".into(),
        ));
    }
    Ok(())
}

/// Zero-mean potential `V(x) = -4 pi sum_i q_i Psi(x - x_i)` by
/// quadrature of the fundamental solution at each charge site.
pub fn potential_integral(
    spec: &CrystalSpec,
    x: &TorusPoint,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_point(spec, x)?;
    let mut sum = util::KahanSum::new();
    for (site, q) in charge_sites(spec) {
        let delta: Vec<f64> = site.coords().iter().map(|c| -c).collect();
        let shifted = x.displaced(&delta)?;
        let psi = psi_integral(&shifted, cfg)?;
        sum.add(q as f64 * psi.value);
    }
    Ok(-4.0 * PI * sum.value())
}

/// Exact zero-mean planar potential in closed form:
///
/// ```text
/// NaCl: V = log | theta2(w|i) theta4(w|i) / (theta1(w|i) theta3(w|i)) |^2
/// CsCl: V = log | theta3(w|i) / theta1(w|i) |^2
/// ```
///
/// with `w = pi (x1 + i x2) / (2a)`. Doubly periodic with period `2a` in
/// each axis.
pub fn potential_2d_closed(spec: &CrystalSpec, x: &TorusPoint) -> Result<f64> {
    if spec.n != 2 {
        return Err(MadelungError::Unsupported(format!(
            "the closed-form potential exists for n = 2 only, got n = {}",
            spec.n
        )));
    }
    check_point(spec, x)?;
    let a = spec.a;
    let c = x.coords();
    let w = Complex64::new(PI * c[0] / (2.0 * a), PI * c[1] / (2.0 * a));
    let arg = ThetaArg::new(w, 1.0, 1e-15)?;
    let t1 = jacobi_theta(ThetaKind::One, &arg)?.norm();
    let t3 = jacobi_theta(ThetaKind::Three, &arg)?.norm();
    match spec.family {
        CrystalFamily::CsCl => Ok(2.0 * (t3 / t1).ln()),
        CrystalFamily::NaCl => {
            let t2 = jacobi_theta(ThetaKind::Two, &arg)?.norm();
            let t4 = jacobi_theta(ThetaKind::Four, &arg)?.norm();
            Ok(2.0 * ((t2 * t4) / (t1 * t3)).ln())
        }
    }
}

/// Classification of one grid sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMask {
    #[serde(rename = "regular")]
    Regular,
    #[serde(rename = "singular-site")]
    SingularSite,
}

impl std::fmt::Display for SampleMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleMask::Regular => write!(f, "regular"),
            SampleMask::SingularSite => write!(f, "singular-site"),
        }
    }
}

/// The potential sampled on a uniform grid over one fundamental cell
/// `[0, 2a)^n`, row-major with the last axis fastest. Samples within
/// `1e-9 a` of a charge site are NaN and flagged `singular-site`.
#[derive(Clone, Debug)]
pub struct PotentialField {
    pub spec: CrystalSpec,
    pub resolution: usize,
    pub samples: Vec<f64>,
    pub mask: Vec<SampleMask>,
}

/// Sample the potential on a `resolution^n` grid. Uses the closed form
/// for `n = 2` and the quadrature path otherwise; evaluation is parallel
/// over samples with a deterministic, order-independent assembly.
pub fn field_grid(
    spec: &CrystalSpec,
    resolution: usize,
    cfg: &QuadratureConfig,
) -> Result<PotentialField> {
    if resolution < 4 {
        return Err(MadelungError::Domain(format!(
            "grid resolution must be at least 4, got {resolution}"
        )));
    }
    let total = (resolution as u64)
        .checked_pow(spec.n as u32)
        .unwrap_or(u64::MAX);
    if total > 1 << 24 {
        return Err(MadelungError::Domain(format!(
            "grid of {total} samples exceeds the supported size"
        )));
    }
    let total = total as usize;
    let step = 2.0 * spec.a / resolution as f64;
    let sites = charge_sites(spec);

    let evaluate = |index: usize| -> Result<(f64, SampleMask)> {
        let mut rem = index;
        let mut coords = vec![0.0; spec.n];
        for j in (0..spec.n).rev() {
            coords[j] = (rem % resolution) as f64 * step;
            rem /= resolution;
        }
        let x = TorusPoint::new(&coords, spec.a)?;
        let near = sites
            .iter()
            .map(|(p, _)| x.distance_to(p))
            .fold(f64::INFINITY, f64::min);
        if near < SITE_SNAP_REL * spec.a {
            return Ok((f64::NAN, SampleMask::SingularSite));
        }
        let value = if spec.n == 2 {
            potential_2d_closed(spec, &x)?
        } else {
            match potential_integral(spec, &x, cfg) {
                Ok(v) => v,
                // Keep the best estimate when the budget ran out.
                Err(MadelungError::Accuracy { value, .. }) => value,
                Err(e) => return Err(e),
            }
        };
        Ok((value, SampleMask::Regular))
    };

    let results = util::par_map(total, evaluate);
    let mut samples = Vec::with_capacity(total);
    let mut mask = Vec::with_capacity(total);
    for r in results {
        let (v, m) = r?;
        samples.push(v);
        mask.push(m);
    }
    Ok(PotentialField {
        spec: *spec,
        resolution,
        samples,
        mask,
    })
}

impl PotentialField {
    /// Mean of the regular samples; tends to zero under refinement.
    pub fn regular_mean(&self) -> f64 {
        let mut sum = util::KahanSum::new();
        let mut count = 0usize;
        for (v, m) in self.samples.iter().zip(&self.mask) {
            if *m == SampleMask::Regular {
                sum.add(*v);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum.value() / count as f64
        }
    }

    pub fn singular_count(&self) -> usize {
        self.mask
            .iter()
            .filter(|m| **m == SampleMask::SingularSite)
            .count()
    }

    /// Grid coordinates of sample `index` (row-major, last axis fastest).
    pub fn coords_of(&self, index: usize) -> Vec<f64> {
        let step = 2.0 * self.spec.a / self.resolution as f64;
        let mut rem = index;
        let mut coords = vec![0.0; self.spec.n];
        for j in (0..self.spec.n).rev() {
            coords[j] = (rem % self.resolution) as f64 * step;
            rem /= self.resolution;
        }
        coords
    }

    /// CSV with columns `x1..xn,V,mask`. Floats are printed in shortest
    /// round-trip form, so re-parsing reproduces the bits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        for j in 1..=self.spec.n {
            write!(out, "x{j},")?;
        }
        writeln!(out, "V,mask")?;
        for (i, (v, m)) in self.samples.iter().zip(&self.mask).enumerate() {
            for c in self.coords_of(i) {
                write!(out, "{c},")?;
            }
            writeln!(out, "{v},{m}")?;
        }
        Ok(())
    }

    /// Parse the CSV produced by [`PotentialField::write_csv`] back into
    /// coordinate rows and values.
    pub fn parse_csv(text: &str) -> Result<Vec<(Vec<f64>, f64, SampleMask)>> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 3 {
                return Err(MadelungError::Domain(format!("malformed CSV row {lineno}")));
            }
            let mask = match fields[fields.len() - 1] {
                "regular" => SampleMask::Regular,
                "singular-site" => SampleMask::SingularSite,
                other => return Err(MadelungError::Domain(format!("unknown mask {other:?}"))),
            };
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| MadelungError::Domain(format!("bad float {s:?} in CSV: {e}")))
            };
            let value = parse(fields[fields.len() - 2])?;
            let coords: Vec<f64> = fields[..fields.len() - 2]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<_>>()?;
            rows.push((coords, value, mask));
        }
        Ok(rows)
    }

    /// JSON envelope with the spec metadata and flat sample array;
    /// singular samples serialize as null.
    pub fn to_json(&self) -> serde_json::Value {
        let samples: Vec<serde_json::Value> = self
            .samples
            .iter()
            .map(|v| {
                if v.is_nan() {
                    serde_json::Value::Null
                } else {
                    serde_json::json!(v)
                }
            })
            .collect();
        serde_json::json!({
            "schema": 1,
            "spec": self.spec,
            "resolution": self.resolution,
            "normalization": "zero-mean",
            "layout": "row-major, last axis fastest",
            "samples": samples,
            "mask": self.mask,
        })
    }
}
