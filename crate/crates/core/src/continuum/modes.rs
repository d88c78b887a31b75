//! Homogeneous deformation modes used to generate training and testing data.

use super::{kinematics_from, DeformationState};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Laterally confined uniaxial deformation `F = diag(j, 1, 1)`, so `det F = j`.
pub fn mode_confined_uniaxial(j: f64) -> Result<DeformationState> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::InvalidDeformation(format!(
            "confined uniaxial volume ratio {j} must be positive"
        )));
    }
    kinematics_from(Tensor3::diag(j, 1.0, 1.0), Tensor3::zero())
}

/// Volume-preserving uniaxial stretch `λ` along `e1` with stretch rate `λ̇`.
pub fn mode_isochoric_uniaxial(lambda: f64, lambda_dot: f64) -> Result<DeformationState> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidDeformation(format!(
            "uniaxial stretch {lambda} must be positive"
        )));
    }
    let lateral = lambda.powf(-0.5);
    let lateral_rate = -0.5 * lambda_dot * lambda.powf(-1.5);
    kinematics_from(
        Tensor3::diag(lambda, lateral, lateral),
        Tensor3::diag(lambda_dot, lateral_rate, lateral_rate),
    )
}

/// Simple shear `F = I + γ e1⊗E2` at shear rate `γ̇`.
pub fn mode_simple_shear(gamma: f64, gamma_dot: f64) -> Result<DeformationState> {
    let mut f = Tensor3::identity();
    f.0[0][1] = gamma;
    let mut f_dot = Tensor3::zero();
    f_dot.0[0][1] = gamma_dot;
    kinematics_from(f, f_dot)
}
