use serde::{Deserialize, Serialize};

use super::{deviatoric_with_inverse, DeformationState};
use crate::tensor::SymTensor3;

/// Relative singular-value cutoff used for every pseudo-inverse in the crate.
pub const PINV_CUTOFF: f64 = 1e-10;

/// The eight generators `G1 … G8` of the isotropic visco-hyperelastic stress.
///
/// `g[0]` is `G1 = C⁻¹`; the remaining seven are referential deviators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrityBasis {
    pub g: [SymTensor3; 8],
    /// Set when `C̄̇` is rank deficient and `G6` was built from its
    /// pseudo-inverse.
    pub g6_degenerate: bool,
}

impl IntegrityBasis {
    /// `G_k` with the one-based index used throughout the constitutive formulas.
    pub fn get(&self, k: usize) -> &SymTensor3 {
        &self.g[k - 1]
    }
}

pub fn integrity_basis(state: &DeformationState) -> IntegrityBasis {
    let c = &state.c;
    let c_inv = &state.c_inv;
    let dev = |z: SymTensor3| deviatoric_with_inverse(&z, c, c_inv);

    let cb = state.c_bar;
    let cbd = state.c_bar_dot;
    let cb_inv = c_inv.scale(state.j.powf(2.0 / 3.0));
    let (cbd_pinv, g6_degenerate) = cbd.pseudo_inverse(PINV_CUTOFF);
    let cb2 = cb.square();

    IntegrityBasis {
        g: [
            *c_inv,
            dev(SymTensor3::identity()),
            dev(cb),
            dev(cb_inv),
            dev(cbd),
            dev(cbd_pinv),
            dev(cb.sym_product(&cbd)),
            dev(cb2.sym_product(&cbd)),
        ],
        g6_degenerate,
    }
}
