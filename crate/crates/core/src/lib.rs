//! Physics-informed Gaussian-process surrogates for isotropic
//! visco-hyperelastic materials.
//!
//! Stress data are split into volumetric, isochoric hyperelastic and
//! isochoric viscous branches. Each branch is written as a linear combination
//! of integrity-basis tensors whose scalar coefficients depend only on
//! invariants; a Gaussian process learns the invariant-to-coefficient map and
//! the stress is reassembled from the basis at prediction time.

pub mod analytic;
pub mod continuum;
pub mod error;
pub mod gpr;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod surrogate;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{SymTensor3, Tensor3};
