//! Closed-form reference models.
//!
//! Every model is written in terms of the invariant set of a state and yields
//! the scalar coefficients that multiply the integrity basis. Stresses are
//! always assembled from those coefficients, so the analytic path and the
//! surrogate path share a single contraction routine.

mod calibrate;

pub use calibrate::{calibrate, Family};

use serde::{Deserialize, Serialize};

use crate::continuum::{integrity_basis, invariants, DeformationState, IntegrityBasis, InvariantSet};
use crate::error::{Error, Result};
use crate::tensor::SymTensor3;

/// Round-off below this magnitude under a square root is treated as zero.
const RADICAND_TOL: f64 = 1e-12;

/// The three additive stress branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Vol,
    HIso,
    VIso,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::Vol, Branch::HIso, Branch::VIso];

    /// Number of scalar coefficients in the branch.
    pub fn n_coefficients(self) -> usize {
        match self {
            Branch::Vol => 1,
            Branch::HIso => 2,
            Branch::VIso => 7,
        }
    }

    /// Number of invariant inputs used by the branch surrogate.
    pub fn n_inputs(self) -> usize {
        match self {
            Branch::Vol => 1,
            Branch::HIso => 2,
            Branch::VIso => 5,
        }
    }

    /// Surrogate input vector: `[J]`, `[Ī₁, Ī₂]` or `[Ī₁, Ī₂, J̄₁, J̄₄, J̄₆]`.
    pub fn inputs(self, inv: &InvariantSet) -> Vec<f64> {
        match self {
            Branch::Vol => vec![inv.j],
            Branch::HIso => vec![inv.i1_bar, inv.i2_bar],
            Branch::VIso => vec![
                inv.i1_bar,
                inv.i2_bar,
                inv.j_bar(1),
                inv.j_bar(4),
                inv.j_bar(6),
            ],
        }
    }

    /// Inputs at the undeformed, rate-free state.
    pub fn reference_inputs(self) -> Vec<f64> {
        self.inputs(&InvariantSet::reference())
    }

    /// Basis elements multiplied by this branch's coefficients, in order.
    pub fn basis_indices(self) -> &'static [usize] {
        match self {
            Branch::Vol => &[1],
            Branch::HIso => &[2, 3],
            Branch::VIso => &[2, 3, 4, 5, 6, 7, 8],
        }
    }

    /// Prefactor applied to the basis contraction (`J^(-2/3)` on isochoric branches).
    pub fn prefactor(self, j: f64) -> f64 {
        match self {
            Branch::Vol => 1.0,
            Branch::HIso | Branch::VIso => j.powf(-2.0 / 3.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Vol => "vol",
            Branch::HIso => "h_iso",
            Branch::VIso => "v_iso",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vol" => Ok(Branch::Vol),
            "h_iso" => Ok(Branch::HIso),
            "v_iso" => Ok(Branch::VIso),
            other => Err(Error::InvalidInput(format!("unknown branch `{other}`"))),
        }
    }
}

/// Coefficients `{ζ₁}`, `{Γ₁, Γ₂}` or `{Φ₁ … Φ₇}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub branch: Branch,
    pub values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(branch: Branch, values: Vec<f64>) -> Result<Self> {
        if values.len() != branch.n_coefficients() {
            return Err(Error::InvalidInput(format!(
                "{branch} expects {} coefficients, got {}",
                branch.n_coefficients(),
                values.len()
            )));
        }
        Ok(CoefficientVector { branch, values })
    }

    pub fn zeros(branch: Branch) -> Self {
        CoefficientVector {
            branch,
            values: vec![0.0; branch.n_coefficients()],
        }
    }
}

/// Contract branch coefficients against a precomputed basis.
pub fn assemble_stress(branch: Branch, coeffs: &[f64], basis: &IntegrityBasis, j: f64) -> SymTensor3 {
    let mut s = SymTensor3::zero();
    for (&c, &k) in coeffs.iter().zip(branch.basis_indices()) {
        if c != 0.0 {
            s += basis.get(k).scale(c);
        }
    }
    s.scale(branch.prefactor(j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum VolumetricModel {
    SimoMiehe { kappa: f64 },
    VolNeoHookean { kappa: f64 },
    VolOgden { kappa: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum HyperelasticModel {
    NeoHookean { a10: f64 },
    MooneyRivlin { a10: f64, a01: f64 },
    GeneralizedRivlin { a10: f64, a01: f64, a11: f64 },
    Yeoh { c1: f64, c2: f64 },
    Gent { mu: f64, jm: f64 },
    GentGent { mu: f64, jm: f64, c2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum ViscousModel {
    Pioletti { eta_prime: f64 },
    GeneralizedPioletti { eta: f64, beta: f64 },
    #[serde(rename = "USS")]
    Uss { k11: f64, k21: f64, c21: f64 },
}

/// Any reference model, serialized as `{"family": ..., "params": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Model {
    Volumetric(VolumetricModel),
    Hyperelastic(HyperelasticModel),
    Viscous(ViscousModel),
}

impl From<VolumetricModel> for Model {
    fn from(m: VolumetricModel) -> Self {
        Model::Volumetric(m)
    }
}
impl From<HyperelasticModel> for Model {
    fn from(m: HyperelasticModel) -> Self {
        Model::Hyperelastic(m)
    }
}
impl From<ViscousModel> for Model {
    fn from(m: ViscousModel) -> Self {
        Model::Viscous(m)
    }
}

impl VolumetricModel {
    pub fn name(&self) -> &'static str {
        match self {
            VolumetricModel::SimoMiehe { .. } => "SimoMiehe",
            VolumetricModel::VolNeoHookean { .. } => "VolNeoHookean",
            VolumetricModel::VolOgden { .. } => "VolOgden",
        }
    }

    fn validate(&self) -> Result<()> {
        let (kappa, beta) = match *self {
            VolumetricModel::SimoMiehe { kappa } | VolumetricModel::VolNeoHookean { kappa } => {
                (kappa, 1.0)
            }
            VolumetricModel::VolOgden { kappa, beta } => (kappa, beta),
        };
        if !(kappa > 0.0) || beta == 0.0 || !beta.is_finite() {
            return Err(domain(self.name(), format!("invalid parameters {self:?}")));
        }
        Ok(())
    }

    pub fn energy(&self, j: f64) -> Result<f64> {
        self.validate()?;
        check_volume(self.name(), j)?;
        Ok(match *self {
            VolumetricModel::SimoMiehe { kappa } => 0.5 * kappa * (0.5 * (j * j - 1.0) - j.ln()),
            VolumetricModel::VolNeoHookean { kappa } => 0.5 * kappa * (j - 1.0).powi(2),
            VolumetricModel::VolOgden { kappa, beta } => {
                kappa / (beta * beta) * (j.powf(-beta) - 1.0 + beta * j.ln())
            }
        })
    }

    /// `ζ₁ = J dU/dJ`.
    pub fn zeta(&self, j: f64) -> Result<f64> {
        self.validate()?;
        check_volume(self.name(), j)?;
        Ok(match *self {
            VolumetricModel::SimoMiehe { kappa } => 0.5 * kappa * (j * j - 1.0),
            VolumetricModel::VolNeoHookean { kappa } => kappa * j * (j - 1.0),
            VolumetricModel::VolOgden { kappa, beta } => kappa / beta * (1.0 - j.powf(-beta)),
        })
    }
}

impl HyperelasticModel {
    pub fn name(&self) -> &'static str {
        match self {
            HyperelasticModel::NeoHookean { .. } => "NeoHookean",
            HyperelasticModel::MooneyRivlin { .. } => "MooneyRivlin",
            HyperelasticModel::GeneralizedRivlin { .. } => "GeneralizedRivlin",
            HyperelasticModel::Yeoh { .. } => "Yeoh",
            HyperelasticModel::Gent { .. } => "Gent",
            HyperelasticModel::GentGent { .. } => "GentGent",
        }
    }

    /// `1 − (Ī₁ − 3)/J_m`, which must stay positive for the Gent family.
    fn gent_margin(&self, jm: f64, i1: f64) -> Result<f64> {
        let margin = 1.0 - (i1 - 3.0) / jm;
        if !(jm > 0.0) || !(margin > 0.0) {
            return Err(domain(
                self.name(),
                format!("J_m = {jm} does not exceed Ī₁ − 3 = {}", i1 - 3.0),
            ));
        }
        Ok(margin)
    }

    pub fn energy(&self, i1: f64, i2: f64) -> Result<f64> {
        let (x, y) = (i1 - 3.0, i2 - 3.0);
        Ok(match *self {
            HyperelasticModel::NeoHookean { a10 } => a10 * x,
            HyperelasticModel::MooneyRivlin { a10, a01 } => a10 * x + a01 * y,
            HyperelasticModel::GeneralizedRivlin { a10, a01, a11 } => a10 * x + a01 * y + a11 * x * y,
            HyperelasticModel::Yeoh { c1, c2 } => c1 * x + c2 * x * x,
            HyperelasticModel::Gent { mu, jm } => -0.5 * mu * jm * self.gent_margin(jm, i1)?.ln(),
            HyperelasticModel::GentGent { mu, jm, c2 } => {
                check_positive(self.name(), "Ī₂", i2)?;
                -0.5 * mu * jm * self.gent_margin(jm, i1)?.ln() + 1.5 * c2 * (i2 / 3.0).ln()
            }
        })
    }

    /// `[Γ₁, Γ₂]`.
    pub fn gamma(&self, i1: f64, i2: f64) -> Result<[f64; 2]> {
        Ok(match *self {
            HyperelasticModel::NeoHookean { a10 } => [2.0 * a10, 0.0],
            HyperelasticModel::MooneyRivlin { a10, a01 } => [2.0 * (a10 + i1 * a01), -2.0 * a01],
            HyperelasticModel::GeneralizedRivlin { a10, a01, a11 } => [
                2.0 * (a10 + i1 * a01 + a11 * (i1 * i1 - 3.0 * i1 + i2 - 3.0)),
                -2.0 * (a01 + a11 * (i1 - 3.0)),
            ],
            HyperelasticModel::Yeoh { c1, c2 } => [2.0 * c1 + 4.0 * c2 * (i1 - 3.0), 0.0],
            HyperelasticModel::Gent { mu, jm } => [mu / self.gent_margin(jm, i1)?, 0.0],
            HyperelasticModel::GentGent { mu, jm, c2 } => {
                check_positive(self.name(), "Ī₂", i2)?;
                [
                    mu / self.gent_margin(jm, i1)? + 3.0 * c2 * i1 / i2,
                    -3.0 * c2 / i2,
                ]
            }
        })
    }
}

impl ViscousModel {
    pub fn name(&self) -> &'static str {
        match self {
            ViscousModel::Pioletti { .. } => "Pioletti",
            ViscousModel::GeneralizedPioletti { .. } => "GeneralizedPioletti",
            ViscousModel::Uss { .. } => "USS",
        }
    }

    pub fn energy(&self, inv: &InvariantSet) -> Result<f64> {
        let name = self.name();
        Ok(match *self {
            ViscousModel::Pioletti { eta_prime } => {
                0.25 * eta_prime * (inv.i1_bar - 3.0) * inv.j_bar(2)
            }
            ViscousModel::GeneralizedPioletti { eta, beta } => {
                let x = radicand(name, "Ī₁ − 3", inv.i1_bar - 3.0)?;
                eta * x.powf(beta) * inv.j_bar(2)
            }
            ViscousModel::Uss { k11, k21, c21 } => {
                check_exponent(name, c21)?;
                let x1 = radicand(name, "Ī₁ − 3", inv.i1_bar - 3.0)?;
                let x2 = radicand(name, "Ī₂ − 3", inv.i2_bar - 3.0)?;
                let j5 = radicand(name, "J̄₅", inv.j_bar(5))?;
                k11 * inv.j_bar(2) * x1.sqrt() + k21 / c21 * j5.powf(c21) * x2.sqrt()
            }
        })
    }

    /// `[Φ₁ … Φ₇]`.
    pub fn phi(&self, inv: &InvariantSet) -> Result<[f64; 7]> {
        let name = self.name();
        let mut phi = [0.0; 7];
        match *self {
            ViscousModel::Pioletti { eta_prime } => {
                phi[3] = eta_prime * (inv.i1_bar - 3.0);
            }
            ViscousModel::GeneralizedPioletti { eta, beta } => {
                let x = radicand(name, "Ī₁ − 3", inv.i1_bar - 3.0)?;
                phi[3] = 4.0 * eta * x.powf(beta);
            }
            ViscousModel::Uss { k11, k21, c21 } => {
                check_exponent(name, c21)?;
                let x1 = radicand(name, "Ī₁ − 3", inv.i1_bar - 3.0)?;
                let x2 = radicand(name, "Ī₂ − 3", inv.i2_bar - 3.0)?;
                let j5 = radicand(name, "J̄₅", inv.j_bar(5))?;
                phi[3] = 4.0 * k11 * x1.sqrt();
                // J̄₅^(c₂₁−1) diverges as the rate vanishes while G7 vanishes
                // faster; the product tends to zero for c₂₁ > 1/2.
                phi[5] = if j5 > 0.0 {
                    2.0 * k21 * j5.powf(c21 - 1.0) * x2.sqrt()
                } else {
                    0.0
                };
            }
        }
        Ok(phi)
    }
}

impl Model {
    pub fn branch(&self) -> Branch {
        match self {
            Model::Volumetric(_) => Branch::Vol,
            Model::Hyperelastic(_) => Branch::HIso,
            Model::Viscous(_) => Branch::VIso,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Volumetric(m) => m.name(),
            Model::Hyperelastic(m) => m.name(),
            Model::Viscous(m) => m.name(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Energy density or dissipation potential of the model at a state.
pub fn energy(model: &Model, state: &DeformationState) -> Result<f64> {
    let inv = invariants(state);
    match model {
        Model::Volumetric(m) => m.energy(inv.j),
        Model::Hyperelastic(m) => m.energy(inv.i1_bar, inv.i2_bar),
        Model::Viscous(m) => m.energy(&inv),
    }
}

/// Basis coefficients of the model at the given invariants.
pub fn coefficients(model: &Model, inv: &InvariantSet) -> Result<CoefficientVector> {
    let values = match model {
        Model::Volumetric(m) => vec![m.zeta(inv.j)?],
        Model::Hyperelastic(m) => m.gamma(inv.i1_bar, inv.i2_bar)?.to_vec(),
        Model::Viscous(m) => m.phi(inv)?.to_vec(),
    };
    Ok(CoefficientVector {
        branch: model.branch(),
        values,
    })
}

/// Second Piola–Kirchhoff stress of the model's branch.
pub fn stress(model: &Model, state: &DeformationState) -> Result<SymTensor3> {
    let inv = invariants(state);
    let coeffs = coefficients(model, &inv)?;
    let basis = integrity_basis(state);
    Ok(assemble_stress(coeffs.branch, &coeffs.values, &basis, state.j))
}

fn domain(model: &'static str, detail: String) -> Error {
    Error::Domain { model, detail }
}

fn check_volume(model: &'static str, j: f64) -> Result<()> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(domain(model, format!("J = {j} is not positive")));
    }
    Ok(())
}

fn check_positive(model: &'static str, what: &str, v: f64) -> Result<()> {
    if !(v > 0.0) {
        return Err(domain(model, format!("{what} = {v} is not positive")));
    }
    Ok(())
}

fn check_exponent(model: &'static str, c21: f64) -> Result<()> {
    if !(c21 > 0.0 && c21 <= 1.0) {
        return Err(domain(model, format!("exponent c₂₁ = {c21} outside (0, 1]")));
    }
    Ok(())
}

/// Clamp tiny negative round-off to zero and reject genuinely negative values.
fn radicand(model: &'static str, what: &str, v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -RADICAND_TOL {
        Ok(0.0)
    } else {
        Err(domain(model, format!("{what} = {v:e} is negative")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::{mode_confined_uniaxial, mode_isochoric_uniaxial};
    use approx::assert_relative_eq;

    const SM: Model = Model::Volumetric(VolumetricModel::SimoMiehe { kappa: 10.0 });
    const MR: Model = Model::Hyperelastic(HyperelasticModel::MooneyRivlin { a10: 1.0, a01: 0.5 });
    const USS: Model = Model::Viscous(ViscousModel::Uss { k11: 1.0, k21: 1.0, c21: 0.75 });

    #[test]
    fn energies_at_reference() {
        let id = DeformationState::identity();
        assert_eq!(energy(&SM, &id).unwrap(), 0.0);
        assert_eq!(energy(&USS, &id).unwrap(), 0.0);
        let inv = InvariantSet {
            i1_bar: 3.1625,
            i2_bar: 3.14,
            ..InvariantSet::reference()
        };
        let w = match MR {
            Model::Hyperelastic(m) => m.energy(inv.i1_bar, inv.i2_bar).unwrap(),
            _ => unreachable!(),
        };
        assert_relative_eq!(w, 0.2325, epsilon = 1e-12);
    }

    #[test]
    fn tabulated_coefficients() {
        let inv = InvariantSet {
            j: 0.9,
            ..InvariantSet::reference()
        };
        assert_relative_eq!(coefficients(&SM, &inv).unwrap().values[0], -0.95, epsilon = 1e-12);
        let c = coefficients(&MR, &InvariantSet::reference()).unwrap();
        assert_eq!(c.values, vec![5.0, -1.0]);
        let p = Model::Viscous(ViscousModel::Pioletti { eta_prime: 6.94 });
        let c = coefficients(&p, &InvariantSet::reference()).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simo_miehe_confined_stress() {
        let s = stress(&SM, &mode_confined_uniaxial(0.9).unwrap()).unwrap();
        let expected = SymTensor3::diag(1.0 / 0.81, 1.0, 1.0).scale(-0.95);
        for k in 0..6 {
            assert!((s.0[k] - expected.0[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn uss_uniaxial_tension_is_positive() {
        let s = stress(&USS, &mode_isochoric_uniaxial(1.2, 55.0).unwrap()).unwrap();
        assert!(s.0[0] > 0.0);
    }

    #[test]
    fn gent_domain_violation() {
        let g = Model::Hyperelastic(HyperelasticModel::Gent { mu: 1.0, jm: 0.1 });
        let err = stress(&g, &mode_isochoric_uniaxial(1.5, 0.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Domain { model: "Gent", .. }));
    }

    #[test]
    fn json_round_trip() {
        for m in [
            SM,
            MR,
            USS,
            Model::Volumetric(VolumetricModel::VolOgden { kappa: 3.0, beta: -2.5 }),
            Model::Hyperelastic(HyperelasticModel::GentGent { mu: 1.0, jm: 20.0, c2: 0.3 }),
            Model::Viscous(ViscousModel::GeneralizedPioletti { eta: 0.1, beta: 1.5 }),
        ] {
            let s = m.to_json().unwrap();
            assert!(s.contains("\"family\""));
            assert_eq!(Model::from_json(&s).unwrap(), m);
        }
        let uss: Model =
            serde_json::from_str(r#"{"family":"USS","params":{"k11":1,"k21":1,"c21":0.75}}"#).unwrap();
        assert_eq!(uss, USS);
    }
}
