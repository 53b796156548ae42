//! Trapped-set geometry and normal-form dynamics for Kerr(-de Sitter)
//! spacetimes: horizon structure, the photon-region trapped set with its
//! stable/unstable defining functions and expansion rates, Hamiltonian flow
//! integration with event detection, a numerically realized homogeneous
//! symplectomorphism to model coordinates, and two-index symbol-order
//! estimation on the blown-up phase space.
//!
//! Core math is generic over [`scalar::Scalar`], so every evaluator runs on
//! `f64`/`f32` and on forward-mode dual numbers for exact derivatives.

pub mod error;
pub mod flow;
pub mod normal_form;
pub mod phase;
pub mod roots;
pub mod scalar;
pub mod spacetime;
pub mod symbol;
pub mod trapping;

pub use error::{Error, Result};
pub use phase::{PhasePoint, PhaseTangent, ScalarField};
pub use scalar::{Dual, DualN, Real, Scalar};
pub use spacetime::BlackHoleParams;

/// Default scalar type of the concrete API surface.
pub type Float = f64;

/// Phase point over the default scalar.
pub type Point = PhasePoint<Float>;

/// One-lane dual over the default scalar.
pub type Dual1 = Dual<Float>;

/// Eight-lane dual over the default scalar, one lane per phase coordinate.
pub type Dual8 = DualN<Float, 8>;
