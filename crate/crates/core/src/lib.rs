//! Numerical laboratory for sharp weighted Hardy inequalities on model manifolds.
//!
//! The crate reduces every manifold integral to a weighted radial integral in
//! the distance `r` to a submanifold, evaluates Hardy-type functionals on
//! radial profiles, builds the near-extremal families, and runs the sweeps
//! that pin the sharp constants from above.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod exec;
pub mod extremizers;
pub mod functionals;
pub mod geometry;
pub mod jacobi;
pub mod quadrature;
pub mod sharpness;

pub use error::{HardyError, Result};
pub use exec::ExecPolicy;
pub use geometry::{s_k, ModelKind, ModelSpace};
pub use quadrature::{integrate_radial, QuadratureResult, QuadratureSpec};
pub use functionals::{hardy_quotient, improved_functional, log_hardy_quotient, remainder_constant, sharp_constant, HardyParams, RadialProfile};
