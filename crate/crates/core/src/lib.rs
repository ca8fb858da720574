//! Madelung constants and electrostatic potentials for NaCl- and
//! CsCl-type hypercubic crystals in any dimension, built on Jacobi theta
//! functions and the fundamental solution of the Laplacian on the flat
//! torus.
//!
//! The potential of a periodic point-charge distribution is assembled
//! from the zero-mean Green function `Psi`, itself the time integral of
//! the theta heat kernel. For `n >= 3` the Madelung constant is the
//! Hadamard finite part of a divergent theta integral, evaluated either
//! through an analytic subtraction that removes the `v^{-n/2}`
//! singular piece exactly (the default) or through the explicit
//! `eps -> 0` limit. For `n = 2` that regularization is ambiguous
//! (shifting the horizon shifts the value by a logarithm) and the
//! constant is instead defined through horizon-normalized binding
//! potentials of the exact planar closed form, giving
//! `-log K(1/sqrt 2)` for both families. An independent Ewald-summation
//! oracle and naive partial sums (which expose the order dependence of
//! the defining series) round out the validation surface.
//!
//! # Quick start
//!
//! ```
//! use madelung_core::{CrystalFamily, CrystalSpec, LengthConvention, QuadratureConfig};
//!
//! let spec = CrystalSpec::new(CrystalFamily::NaCl, 3, 1.0, LengthConvention::HalfPeriod).unwrap();
//! let m = madelung_core::finite_part_subtracted(&spec, &QuadratureConfig::default()).unwrap();
//! assert!((m.value + 1.747564594633182).abs() < 1e-10);
//! ```

mod error;
mod util;

pub mod crystal;
pub mod green;
pub mod lattice;
pub mod madelung;
pub mod oracle;
pub mod quad;
pub mod special;
pub mod verify;

pub use crystal::{
    charge_sites, field_grid, potential_2d_closed, potential_integral, CrystalFamily, CrystalSpec,
    LengthConvention, PotentialField, SampleMask,
};
pub use error::{MadelungError, Result};
pub use green::{
    epstein_mellin, psi_1d, psi_2d_closed, psi_fourier_partial, psi_integral, Arrangement,
    GreenValue, Normalization,
};
pub use lattice::{
    alternating_cell_sum, big_theta, heat_residual, one_minus_big_theta, TorusPoint,
};
pub use madelung::{
    ambiguous_finite_part_2d, binding_potential_2d, cell_energy, finite_part_epsilon,
    finite_part_subtracted, madelung_2d, origin_integrand, planar_exact_value, BindingPotential,
    MadelungResult, Method, TWO_D_EXACT_FORM,
};
pub use oracle::{
    alpha_coefficient, ewald_madelung, naive_partial_sums, OrderingKind, SumOrdering,
};
pub use quad::QuadratureConfig;
pub use special::{
    jacobi_theta, jacobi_theta_zero, tail_bound, theta1_prime_zero, LemniscaticConstants, ThetaArg,
    ThetaKind, DEFAULT_TOL,
};
pub use util::{thread_budget, SplitMix64};
pub use verify::{run_verification, CheckOutcome};
