//! The invariant-based surrogate pipeline and the black-box baseline.
//!
//! Stress records of one branch are reduced to `(invariants, coefficients)`
//! pairs by solving the branch's Voigt system against the integrity basis.
//! A Gaussian process learns that map, and predictions are turned back into
//! stress by contracting predicted coefficients with the basis of the query
//! state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{assemble_stress, Branch, CoefficientVector};
use crate::continuum::{integrity_basis, invariants, DeformationState, PINV_CUTOFF};
use crate::error::{Error, Result};
use crate::gpr::{fit, fit_constrained, ConstraintSet, FitOptions, GpModel};
use crate::linalg::min_norm_lstsq;
use crate::tensor::SymTensor3;

/// Position of `G6` among the viscous branch columns.
const G6_COLUMN: usize = 4;
/// Stress norms below this count as zero when the design matrix vanishes.
const ZERO_STRESS_TOL: f64 = 1e-12;

/// Stress records belonging to one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDataset {
    pub branch: Branch,
    pub records: Vec<(DeformationState, SymTensor3)>,
}

impl BranchDataset {
    pub fn new(branch: Branch, records: Vec<(DeformationState, SymTensor3)>) -> Result<Self> {
        for (i, (state, _)) in records.iter().enumerate() {
            let rate_free = state.is_rate_free();
            match branch {
                Branch::VIso if rate_free => {
                    return Err(Error::InvalidInput(format!(
                        "record {i}: viscous records need a non-zero deformation rate"
                    )))
                }
                Branch::Vol | Branch::HIso if !rate_free => {
                    return Err(Error::InvalidInput(format!(
                        "record {i}: {branch} records must be rate free"
                    )))
                }
                _ => {}
            }
        }
        Ok(BranchDataset { branch, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn states(&self) -> Vec<DeformationState> {
        self.records.iter().map(|(s, _)| *s).collect()
    }

    /// SHA-256 of the canonical CSV serialization.
    pub fn sha256(&self) -> String {
        let mut buf = Vec::new();
        crate::io::write_dataset(&mut buf, &self.records).expect("writing to memory cannot fail");
        Sha256::digest(&buf)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Largest Voigt norm among the record stresses.
    pub fn stress_scale(&self) -> f64 {
        self.records
            .iter()
            .map(|(_, s)| s.voigt_norm())
            .fold(0.0, f64::max)
    }
}

/// Result of solving one branch system.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub coefficients: CoefficientVector,
    /// `‖A x − b‖ / ‖b‖`, zero for a zero right-hand side.
    pub residual: f64,
    /// Numerical rank of the design matrix.
    pub rank: usize,
}

/// Least-squares coefficients reproducing `stress` from the branch basis.
pub fn extract_coefficients(branch: Branch, state: &DeformationState, stress: &SymTensor3) -> Result<Extraction> {
    let basis = integrity_basis(state);
    let idx = branch.basis_indices();
    let mut a = DMatrix::from_fn(6, idx.len(), |r, c| basis.get(idx[c]).0[r]);
    if branch == Branch::VIso && basis.g6_degenerate {
        a.column_mut(G6_COLUMN).fill(0.0);
    }
    let b = DVector::from_row_slice(&stress.0) / branch.prefactor(state.j);
    let (x, rank) = min_norm_lstsq(&a, &b, PINV_CUTOFF);
    let b_norm = b.norm();
    if rank == 0 && b_norm > ZERO_STRESS_TOL {
        return Err(Error::Extraction {
            index: 0,
            detail: format!("{branch} basis vanishes but the stress norm is {b_norm:e}"),
        });
    }
    let residual = if b_norm > 0.0 {
        (&a * &x - &b).norm() / b_norm
    } else {
        0.0
    };
    Ok(Extraction {
        coefficients: CoefficientVector {
            branch,
            values: x.iter().copied().collect(),
        },
        residual,
        rank,
    })
}

/// Invariant inputs and extracted coefficient outputs, one row per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarDataset {
    pub branch: Branch,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// Numerical rank of each record's design matrix.
    pub ranks: Vec<usize>,
}

impl StarDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

pub fn build_star_dataset(data: &BranchDataset) -> Result<StarDataset> {
    let branch = data.branch;
    let mut star = StarDataset {
        branch,
        inputs: Vec::with_capacity(data.len()),
        outputs: Vec::with_capacity(data.len()),
        residuals: Vec::with_capacity(data.len()),
        ranks: Vec::with_capacity(data.len()),
    };
    for (index, (state, stress)) in data.records.iter().enumerate() {
        let ex = extract_coefficients(branch, state, stress).map_err(|e| match e {
            Error::Extraction { detail, .. } => Error::Extraction { index, detail },
            other => other,
        })?;
        star.inputs.push(branch.inputs(&invariants(state)));
        star.outputs.push(ex.coefficients.values);
        star.residuals.push(ex.residual);
        star.ranks.push(ex.rank);
    }
    Ok(star)
}

/// Rows actually handed to the regression.
///
/// Records whose design matrix vanishes carry no information about the
/// coefficients and are skipped. The volumetric basis is non-zero at the
/// reference state, so its zero-stress reference row is appended when
/// missing; the isochoric bases vanish there and need no anchor row.
pub fn regression_rows(star: &StarDataset) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut x = Vec::with_capacity(star.len() + 1);
    let mut y = Vec::with_capacity(star.len() + 1);
    for i in 0..star.len() {
        if star.ranks[i] > 0 {
            x.push(star.inputs[i].clone());
            y.push(star.outputs[i].clone());
        }
    }
    if star.branch == Branch::Vol {
        let reference = star.branch.reference_inputs();
        if !x.iter().any(|r| r == &reference) {
            x.push(reference);
            y.push(vec![0.0; star.branch.n_coefficients()]);
        }
    }
    (x, y)
}

/// Dissipation functional of each state: `c_m = J^(-2/3) G_m : Ċ` for the
/// seven viscous basis elements. States with `Ċ = 0` are skipped.
pub fn dissipation_constraints(states: &[DeformationState]) -> Result<ConstraintSet> {
    let mut points = Vec::new();
    let mut functionals = Vec::new();
    for state in states {
        let basis = integrity_basis(state);
        let pre = Branch::VIso.prefactor(state.j);
        let c: Vec<f64> = Branch::VIso
            .basis_indices()
            .iter()
            .map(|&k| pre * basis.get(k).ddot(&state.c_dot))
            .collect();
        if c.iter().any(|&v| v != 0.0) {
            points.push(Branch::VIso.inputs(&invariants(state)));
            functionals.push(c);
        }
    }
    ConstraintSet::new(points, functionals)
}

/// Where a trained model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_sha256: String,
    pub n_records: usize,
    pub alpha: f64,
    pub seed: u64,
    pub n_constraints: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub branch: Branch,
    pub constrained: bool,
    pub provenance: Provenance,
    pub gp: GpModel,
}

/// Fit the branch regressor on a star dataset.
///
/// The viscous branch must be given constraints and is trained with the
/// constrained fit; the other branches ignore `constraints`.
pub fn train_surrogate(
    star: &StarDataset,
    opts: &FitOptions,
    constraints: Option<&ConstraintSet>,
    dataset_sha256: String,
) -> Result<SurrogateModel> {
    let branch = star.branch;
    let (x, y) = regression_rows(star);
    let (gp, n_constraints) = match (branch, constraints) {
        (Branch::VIso, Some(c)) => (fit_constrained(&x, &y, opts, c)?, c.len()),
        (Branch::VIso, None) => {
            return Err(Error::InvalidInput(
                "the viscous surrogate requires dissipation constraints".into(),
            ))
        }
        _ => (fit(&x, &y, opts)?, 0),
    };
    Ok(SurrogateModel {
        branch,
        constrained: branch == Branch::VIso,
        provenance: Provenance {
            dataset_sha256,
            n_records: star.len(),
            alpha: opts.alpha,
            seed: opts.seed,
            n_constraints,
        },
        gp,
    })
}

/// Build the star dataset and train, using the training states as
/// constraint points for the viscous branch unless others are given.
pub fn train_branch(
    data: &BranchDataset,
    opts: &FitOptions,
    constraint_states: Option<&[DeformationState]>,
) -> Result<(StarDataset, SurrogateModel)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty training dataset".into()));
    }
    let star = build_star_dataset(data)?;
    let constraints = match data.branch {
        Branch::VIso => {
            let states = match constraint_states {
                Some(s) => s.to_vec(),
                None => data.states(),
            };
            Some(dissipation_constraints(&states)?)
        }
        _ => None,
    };
    let model = train_surrogate(&star, opts, constraints.as_ref(), data.sha256())?;
    Ok((star, model))
}

impl SurrogateModel {
    pub fn predict_coefficients(&self, state: &DeformationState) -> CoefficientVector {
        let x = self.branch.inputs(&invariants(state));
        CoefficientVector {
            branch: self.branch,
            values: self.gp.predict(&x),
        }
    }

    pub fn predict_stress(&self, state: &DeformationState) -> SymTensor3 {
        let coeffs = self.predict_coefficients(state);
        assemble_stress(self.branch, &coeffs.values, &integrity_basis(state), state.j)
    }
}

pub fn predict_stress(model: &SurrogateModel, state: &DeformationState) -> SymTensor3 {
    model.predict_stress(state)
}

/// Direct regression from strain (and strain-rate) components to stress.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub rate_dependent: bool,
    pub provenance: Provenance,
    pub gp: GpModel,
}

fn classical_input(state: &DeformationState, rate_dependent: bool) -> Vec<f64> {
    let mut v = state.c.0.to_vec();
    if rate_dependent {
        v.extend_from_slice(&state.c_dot.0);
    }
    v
}

/// Fit the baseline on `vec(C) [⊕ vec(Ċ)] → vec(S)`, adding the zero-stress
/// reference record when absent.
pub fn train_classical(data: &BranchDataset, rate_dependent: bool, opts: &FitOptions) -> Result<ClassicalModel> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty training dataset".into()));
    }
    let mut x: Vec<Vec<f64>> = data
        .records
        .iter()
        .map(|(s, _)| classical_input(s, rate_dependent))
        .collect();
    let mut y: Vec<Vec<f64>> = data.records.iter().map(|(_, s)| s.0.to_vec()).collect();
    let reference = classical_input(&DeformationState::identity(), rate_dependent);
    if !x.iter().any(|r| r == &reference) {
        x.push(reference);
        y.push(vec![0.0; 6]);
    }
    let gp = fit(&x, &y, opts)?;
    Ok(ClassicalModel {
        rate_dependent,
        provenance: Provenance {
            dataset_sha256: data.sha256(),
            n_records: data.len(),
            alpha: opts.alpha,
            seed: opts.seed,
            n_constraints: 0,
        },
        gp,
    })
}

impl ClassicalModel {
    pub fn predict_stress(&self, state: &DeformationState) -> SymTensor3 {
        let v = self.gp.predict(&classical_input(state, self.rate_dependent));
        SymTensor3([v[0], v[1], v[2], v[3], v[4], v[5]])
    }
}

/// Internal dissipation `S : Ċ`.
pub fn dissipation(stress_v_iso: &SymTensor3, c_dot: &SymTensor3) -> f64 {
    stress_v_iso.ddot(c_dot)
}

/// Serialized form of any trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Surrogate(SurrogateModel),
    Classical(ClassicalModel),
}

impl TrainedModel {
    pub fn predict_stress(&self, state: &DeformationState) -> SymTensor3 {
        match self {
            TrainedModel::Surrogate(m) => m.predict_stress(state),
            TrainedModel::Classical(m) => m.predict_stress(state),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{stress, HyperelasticModel, Model, VolumetricModel};
    use crate::continuum::{mode_confined_uniaxial, mode_isochoric_uniaxial, mode_simple_shear};

    #[test]
    fn volumetric_extraction() {
        let sm: Model = VolumetricModel::SimoMiehe { kappa: 10.0 }.into();
        let s = mode_confined_uniaxial(0.9).unwrap();
        let ex = extract_coefficients(Branch::Vol, &s, &stress(&sm, &s).unwrap()).unwrap();
        assert!((ex.coefficients.values[0] + 0.95).abs() < 1e-12);
        assert!(ex.residual < 1e-12);
    }

    #[test]
    fn viscous_identity_extraction() {
        let id = DeformationState::identity();
        let ex = extract_coefficients(Branch::VIso, &id, &SymTensor3::zero()).unwrap();
        assert_eq!(ex.coefficients.values, vec![0.0; 7]);
        assert_eq!(ex.residual, 0.0);
        assert_eq!(ex.rank, 0);
    }

    #[test]
    fn nonzero_stress_on_vanishing_basis_fails() {
        let id = DeformationState::identity();
        let err = extract_coefficients(Branch::HIso, &id, &SymTensor3::diag(1.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Extraction { .. }));
    }

    #[test]
    fn shear_state_recovers_hyperelastic_coefficients() {
        let mr: Model = HyperelasticModel::MooneyRivlin { a10: 1.0, a01: 0.5 }.into();
        let s = mode_simple_shear(0.3, 0.0).unwrap();
        let ex = extract_coefficients(Branch::HIso, &s, &stress(&mr, &s).unwrap()).unwrap();
        assert_eq!(ex.rank, 2);
        let i1 = invariants(&s).i1_bar;
        assert!((ex.coefficients.values[0] - 2.0 * (1.0 + 0.5 * i1)).abs() < 1e-9);
        assert!((ex.coefficients.values[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniaxial_hyperelastic_system_is_rank_one() {
        let s = mode_isochoric_uniaxial(1.25, 0.0).unwrap();
        let mr: Model = HyperelasticModel::MooneyRivlin { a10: 1.0, a01: 0.5 }.into();
        let ex = extract_coefficients(Branch::HIso, &s, &stress(&mr, &s).unwrap()).unwrap();
        assert_eq!(ex.rank, 1);
        assert!(ex.residual < 1e-10);
    }

    #[test]
    fn dissipation_examples() {
        let c_dot = SymTensor3::from_voigt([1.0, -0.5, -0.5, 0.2, 0.0, 0.3]);
        assert_eq!(dissipation(&SymTensor3::identity(), &SymTensor3::zero()), 0.0);
        let d = dissipation(&(-c_dot), &c_dot);
        let norm2 = c_dot.ddot(&c_dot);
        assert!(d < 0.0 && (d + norm2).abs() < 1e-15);
    }

    #[test]
    fn dataset_rate_rules() {
        let moving = mode_isochoric_uniaxial(1.1, 5.0).unwrap();
        let still = mode_isochoric_uniaxial(1.1, 0.0).unwrap();
        assert!(BranchDataset::new(Branch::HIso, vec![(moving, SymTensor3::zero())]).is_err());
        assert!(BranchDataset::new(Branch::VIso, vec![(still, SymTensor3::zero())]).is_err());
        assert!(BranchDataset::new(Branch::VIso, vec![(moving, SymTensor3::zero())]).is_ok());
    }

    #[test]
    fn reference_row_only_for_volumetric_branch() {
        let star = StarDataset {
            branch: Branch::Vol,
            inputs: vec![vec![0.9]],
            outputs: vec![vec![-0.95]],
            residuals: vec![0.0],
            ranks: vec![1],
        };
        let (x, y) = regression_rows(&star);
        assert_eq!(x, vec![vec![0.9], vec![1.0]]);
        assert_eq!(y[1], vec![0.0]);

        let star = StarDataset {
            branch: Branch::HIso,
            inputs: vec![vec![3.0, 3.0], vec![3.1, 3.09]],
            outputs: vec![vec![0.0, 0.0], vec![0.5, 1.1]],
            residuals: vec![0.0, 0.0],
            ranks: vec![0, 1],
        };
        let (x, _) = regression_rows(&star);
        assert_eq!(x, vec![vec![3.1, 3.09]]);
    }
}
