//! Browser bindings for three interactive operations: analytic stress
//! curves, an invariant and integrity-basis explorer, and a small surrogate
//! trained and evaluated in the page.
//!
//! Every export takes and returns JSON text. The plain functions carry the
//! logic and are tested natively; the `#[wasm_bindgen]` wrappers only convert
//! errors.

use serde::{Deserialize, Serialize};
use visco_surrogate::analytic::{stress, Branch, Model};
use visco_surrogate::continuum::{integrity_basis, invariants, kinematics_from, DeformationState};
use visco_surrogate::gpr::FitOptions;
use visco_surrogate::harness::{err, mean_err, Grid, Mode, Rates};
use visco_surrogate::surrogate::{train_branch, BranchDataset};
use visco_surrogate::{SymTensor3, Tensor3};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
pub struct CurveRequest {
    pub model: Model,
    pub mode: Mode,
    pub range: [f64; 2],
    pub count: usize,
    #[serde(default)]
    pub rate: f64,
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub value: f64,
    pub stress: [f64; 6],
}

fn grid(mode: Mode, range: [f64; 2], count: usize, rate: f64) -> Grid {
    Grid {
        mode,
        range,
        count,
        rates: Rates::List(vec![rate]),
    }
}

pub fn stress_curve_json(request: &str) -> Result<String, String> {
    let req: CurveRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(2..=2000).contains(&req.count) {
        return Err("count must be between 2 and 2000".into());
    }
    let points = grid(req.mode, req.range, req.count, req.rate)
        .points()
        .map_err(|e| e.to_string())?;
    let curve = points
        .iter()
        .map(|p| {
            stress(&req.model, &p.state)
                .map(|s| CurvePoint {
                    value: p.value,
                    stress: s.0,
                })
                .map_err(|e| format!("at {}: {e}", p.value))
        })
        .collect::<Result<Vec<_>, _>>()?;
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
pub struct StateRequest {
    /// Row-major deformation gradient.
    pub f: [f64; 9],
    #[serde(default)]
    pub f_dot: [f64; 9],
}

#[derive(Debug, Serialize)]
pub struct StateReport {
    pub j: f64,
    pub i1_bar: f64,
    pub i2_bar: f64,
    pub j_bar: [f64; 7],
    pub basis: Vec<[f64; 6]>,
    pub g6_degenerate: bool,
}

pub fn explore_state_json(request: &str) -> Result<String, String> {
    let req: StateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let state = kinematics_from(Tensor3::from_row_major(req.f), Tensor3::from_row_major(req.f_dot))
        .map_err(|e| e.to_string())?;
    let inv = invariants(&state);
    let basis = integrity_basis(&state);
    let report = StateReport {
        j: inv.j,
        i1_bar: inv.i1_bar,
        i2_bar: inv.i2_bar,
        j_bar: inv.j_bar,
        basis: (1..=8).map(|k| basis.get(k).0).collect(),
        g6_degenerate: basis.g6_degenerate,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
pub struct SurrogateRequest {
    pub truth: Model,
    pub train_mode: Mode,
    pub train_range: [f64; 2],
    pub train_count: usize,
    pub test_mode: Mode,
    pub test_range: [f64; 2],
    pub test_count: usize,
    /// Loading rate for viscous models.
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct SurrogateReport {
    pub branch: Branch,
    pub theta: [f64; 2],
    pub train_mean_err: Option<f64>,
    pub test_mean_err: Option<f64>,
    pub test: Vec<TestPoint>,
}

#[derive(Debug, Serialize)]
pub struct TestPoint {
    pub value: f64,
    pub truth: [f64; 6],
    pub prediction: [f64; 6],
}

fn labelled(model: &Model, g: &Grid) -> Result<Vec<(DeformationState, SymTensor3)>, String> {
    g.points()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|p| {
            stress(model, &p.state)
                .map(|s| (p.state, s))
                .map_err(|e| format!("at {}: {e}", p.value))
        })
        .collect()
}

pub fn train_surrogate_json(request: &str) -> Result<String, String> {
    let req: SurrogateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(2..=200).contains(&req.train_count) || !(2..=500).contains(&req.test_count) {
        return Err("training count must be 2..=200 and test count 2..=500".into());
    }
    let branch = req.truth.branch();
    let rate = if branch == Branch::VIso { req.rate } else { 0.0 };
    let train = labelled(&req.truth, &grid(req.train_mode, req.train_range, req.train_count, rate))?;
    let test = labelled(&req.truth, &grid(req.test_mode, req.test_range, req.test_count, rate))?;
    let data = BranchDataset::new(branch, train).map_err(|e| e.to_string())?;
    let opts = FitOptions {
        seed: req.seed,
        restarts: 4,
        ..FitOptions::default()
    };
    let (_, model) = train_branch(&data, &opts, None).map_err(|e| e.to_string())?;

    let errs = |records: &[(DeformationState, SymTensor3)]| {
        let v: Vec<f64> = records
            .iter()
            .filter_map(|(s, t)| err(&model.predict_stress(s), t))
            .collect();
        mean_err(&v)
    };
    let test_values = grid(req.test_mode, req.test_range, req.test_count, rate)
        .points()
        .map_err(|e| e.to_string())?;
    let report = SurrogateReport {
        branch,
        theta: model.gp.theta(),
        train_mean_err: errs(&data.records),
        test_mean_err: errs(&test),
        test: test
            .iter()
            .zip(&test_values)
            .map(|((s, t), p)| TestPoint {
                value: p.value,
                truth: t.0,
                prediction: model.predict_stress(s).0,
            })
            .collect(),
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Stress along a one-parameter loading path of an analytic model.
#[wasm_bindgen]
pub fn stress_curve(request: &str) -> Result<String, JsError> {
    stress_curve_json(request).map_err(|e| JsError::new(&e))
}

/// Invariants and integrity basis of one state.
#[wasm_bindgen]
pub fn explore_state(request: &str) -> Result<String, JsError> {
    explore_state_json(request).map_err(|e| JsError::new(&e))
}

/// Train a surrogate on one loading path and evaluate it on another.
#[wasm_bindgen]
pub fn train_surrogate(request: &str) -> Result<String, JsError> {
    train_surrogate_json(request).map_err(|e| JsError::new(&e))
}
