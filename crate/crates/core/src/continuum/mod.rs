//! Finite-strain kinematics.
//!
//! A [`DeformationState`] carries the deformation gradient and its rate
//! together with every derived tensor the constitutive branches need: the
//! right Cauchy–Green tensor `C = FᵀF`, its rate, the volume ratio
//! `J = det F`, and the unimodular parts `C̄ = J^(-2/3) C` and `C̄̇`.

mod basis;
mod modes;

pub use basis::{integrity_basis, IntegrityBasis, PINV_CUTOFF};
pub use modes::{mode_confined_uniaxial, mode_isochoric_uniaxial, mode_simple_shear};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{SymTensor3, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationState {
    pub f: Tensor3,
    pub f_dot: Tensor3,
    pub c: SymTensor3,
    pub c_dot: SymTensor3,
    pub c_inv: SymTensor3,
    pub j: f64,
    pub c_bar: SymTensor3,
    pub c_bar_dot: SymTensor3,
}

/// Scalar invariants of `C̄` and `C̄̇` plus the volume ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    pub j: f64,
    pub i1_bar: f64,
    pub i2_bar: f64,
    /// `J̄₁ … J̄₇`, index 0 holds `J̄₁`.
    pub j_bar: [f64; 7],
}

impl InvariantSet {
    pub fn j_bar(&self, k: usize) -> f64 {
        self.j_bar[k - 1]
    }

    /// Reference (undeformed, rate-free) values.
    pub fn reference() -> Self {
        InvariantSet {
            j: 1.0,
            i1_bar: 3.0,
            i2_bar: 3.0,
            j_bar: [0.0; 7],
        }
    }
}

/// Build the full kinematic state from `F` and `Ḟ`.
pub fn kinematics_from(f: Tensor3, f_dot: Tensor3) -> Result<DeformationState> {
    if !f.is_finite() || !f_dot.is_finite() {
        return Err(Error::InvalidDeformation("non-finite component".into()));
    }
    let j = f.det();
    if !(j > 0.0) {
        return Err(Error::InvalidDeformation(format!("det F = {j} is not positive")));
    }
    let c = f.transpose_mul_sym(&f);
    let c_dot = f_dot.transpose().mul(f).plus_transpose();
    Ok(assemble(f, f_dot, c, c_dot, j))
}

impl DeformationState {
    /// State for a given `C` and `Ċ`, taking `F = U = √C` (no rotation).
    ///
    /// The stretch rate `U̇` solves `U U̇ + U̇ U = Ċ`, so the resulting state
    /// reproduces `C` and `Ċ` exactly up to round-off.
    pub fn from_right_cauchy_green(c: SymTensor3, c_dot: SymTensor3) -> Result<Self> {
        if !c.is_finite() || !c_dot.is_finite() {
            return Err(Error::InvalidDeformation("non-finite component".into()));
        }
        let eig = SymmetricEigen::new(c.to_matrix3());
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidDeformation(
                "C is not positive definite".into(),
            ));
        }
        let q = eig.eigenvectors;
        let stretches = eig.eigenvalues.map(f64::sqrt);
        let u = q * nalgebra::Matrix3::from_diagonal(&stretches) * q.transpose();
        let cdot_local = q.transpose() * c_dot.to_matrix3() * q;
        let udot_local = nalgebra::Matrix3::from_fn(|i, k| {
            cdot_local[(i, k)] / (stretches[i] + stretches[k])
        });
        let u_dot = q * udot_local * q.transpose();
        let f = Tensor3(std::array::from_fn(|i| std::array::from_fn(|k| u[(i, k)])));
        let f_dot = Tensor3(std::array::from_fn(|i| {
            std::array::from_fn(|k| u_dot[(i, k)])
        }));
        let j = c.det().sqrt();
        Ok(assemble(f, f_dot, c, c_dot, j))
    }

    pub fn identity() -> Self {
        kinematics_from(Tensor3::identity(), Tensor3::zero()).expect("identity is admissible")
    }

    pub fn is_rate_free(&self) -> bool {
        self.f_dot.0.iter().flatten().all(|&v| v == 0.0)
    }

    /// Same material point observed after a superposed rigid rotation `Q`.
    pub fn rotated(&self, q: &Tensor3) -> Result<Self> {
        kinematics_from(q.mul(self.f), q.mul(self.f_dot))
    }

    /// `J̇ = (J/2) tr(C⁻¹ Ċ)`.
    pub fn j_dot(&self) -> f64 {
        0.5 * self.j * self.c_inv.ddot(&self.c_dot)
    }
}

fn assemble(f: Tensor3, f_dot: Tensor3, c: SymTensor3, c_dot: SymTensor3, j: f64) -> DeformationState {
    let c_inv = c
        .inverse()
        .unwrap_or_else(|| c.pseudo_inverse(PINV_CUTOFF).0);
    let iso = j.powf(-2.0 / 3.0);
    let c_bar = c.scale(iso);
    let j_dot = 0.5 * j * c_inv.ddot(&c_dot);
    let c_bar_dot = c_dot.scale(iso) - c.scale(2.0 / 3.0 * j.powf(-5.0 / 3.0) * j_dot);
    DeformationState {
        f,
        f_dot,
        c,
        c_dot,
        c_inv,
        j,
        c_bar,
        c_bar_dot,
    }
}

/// Strain and strain-rate invariants of a state.
pub fn invariants(state: &DeformationState) -> InvariantSet {
    let cb = &state.c_bar;
    let cbd = &state.c_bar_dot;
    let cb2 = cb.square();
    let cbd2 = cbd.square();
    let i1 = cb.trace();
    let i2 = 0.5 * (i1 * i1 - cb2.trace());
    InvariantSet {
        j: state.j,
        i1_bar: i1,
        i2_bar: i2,
        j_bar: [
            cbd.trace(),
            cbd2.trace(),
            cbd.det(),
            cb.ddot(cbd),
            cb.ddot(&cbd2),
            cb2.ddot(cbd),
            cb2.ddot(&cbd2),
        ],
    }
}

/// Referential deviator `Dev(Z) = Z − ⅓ (Z : C) C⁻¹`.
pub fn deviatoric(z: &SymTensor3, c: &SymTensor3) -> Result<SymTensor3> {
    let c_inv = c
        .inverse()
        .ok_or_else(|| Error::InvalidDeformation("C is singular".into()))?;
    Ok(deviatoric_with_inverse(z, c, &c_inv))
}

pub(crate) fn deviatoric_with_inverse(
    z: &SymTensor3,
    c: &SymTensor3,
    c_inv: &SymTensor3,
) -> SymTensor3 {
    *z - c_inv.scale(z.ddot(c) / 3.0)
}
