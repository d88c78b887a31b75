//! Experiment runner: dataset generation, error metrics, size sweeps and
//! report output.

mod spec;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{self, Branch, Family, Model};
use crate::continuum::DeformationState;
use crate::error::{Error, Result};
use crate::gpr::FitDiagnostics;
use crate::io::{fmt_f64, write_atomic, STRESS_COLUMNS};
use crate::surrogate::{
    dissipation, train_branch, train_classical, BranchDataset, ClassicalModel, SurrogateModel, TrainedModel,
};
use crate::tensor::SymTensor3;

pub use spec::{
    linspace, Baselines, ExperimentId, ExperimentSpec, Grid, GridPoint, Mode, Rates, RegionClass, StatePoint, TestGrid,
    DYNAMIC_TEST_RATES, TEST_POINTS,
};

/// Truth norms below this fraction of the training stress scale are
/// excluded from error means.
pub const NEAR_ZERO_FRACTION: f64 = 1e-6;
/// Largest component difference in `F` and `Ḟ` for a test point to count as
/// a training point.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// Percent relative error between two Voigt vectors; `None` when the truth
/// is identically zero.
pub fn err(pred: &SymTensor3, truth: &SymTensor3) -> Option<f64> {
    let t = truth.voigt_norm();
    if t == 0.0 {
        return None;
    }
    Some(100.0 * (*pred - *truth).voigt_norm() / t)
}

pub fn mean_err(errs: &[f64]) -> Option<f64> {
    if errs.is_empty() {
        None
    } else {
        Some(errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

/// Dataset of the ground-truth model over the training grid.
pub fn generate_dataset(spec: &ExperimentSpec) -> Result<BranchDataset> {
    spec.validate()?;
    let points = spec.training.points()?;
    let records = label(&spec.ground_truth, &points)?;
    BranchDataset::new(spec.ground_truth.branch(), records)
}

fn label(model: &Model, points: &[GridPoint]) -> Result<Vec<(DeformationState, SymTensor3)>> {
    points
        .iter()
        .map(|p| {
            analytic::stress(model, &p.state)
                .map(|s| (p.state, s))
                .map_err(|e| Error::Generation {
                    point: spec::describe(p.mode, p.value, p.rate),
                    source: Box::new(e),
                })
        })
        .collect()
}

/// One grid point as evaluated by one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub value: f64,
    pub rate: f64,
    pub truth: SymTensor3,
    pub prediction: SymTensor3,
    /// Absent for near-zero truth.
    pub err: Option<f64>,
    /// `S : Ċ` of the prediction, for rate-dependent runs.
    pub dissipation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub name: String,
    pub class: RegionClass,
    pub mode: Mode,
    pub points: Vec<PointResult>,
    /// Test points skipped because they repeat a training state.
    pub dropped_coincident: usize,
    pub excluded_near_zero: usize,
    pub mean_err: Option<f64>,
    pub max_err: Option<f64>,
    pub min_dissipation: Option<f64>,
    /// For shear grids: whether every predicted `S12` is exactly zero.
    pub shear12_identically_zero: Option<bool>,
}

impl RegionReport {
    pub fn errs(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.err).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMeans {
    pub training: Option<f64>,
    pub same_mode: Option<f64>,
    pub cross_mode: Option<f64>,
    /// Pooled over both testing classes.
    pub testing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub theta: [f64; 2],
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    /// `surrogate`, `classical` or `conventional`.
    pub name: String,
    pub regions: Vec<RegionReport>,
    pub class_means: ClassMeans,
    pub fit: Option<FitSummary>,
    /// Smallest predicted dissipation over the constraint states.
    pub constraint_min_dissipation: Option<f64>,
}

impl ModelReport {
    pub fn region(&self, name: &str) -> Option<&RegionReport> {
        self.regions.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub experiment: ExperimentId,
    pub branch: Branch,
    pub training_size: usize,
    pub dataset_sha256: String,
    /// Largest training stress norm; the near-zero exclusion is relative to it.
    pub stress_scale: f64,
    pub rate_dependent: bool,
    pub conventional: Option<Model>,
    pub models: Vec<ModelReport>,
}

impl ErrorReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }
}

/// Everything produced by one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ErrorReport,
    pub training: BranchDataset,
    pub surrogate: SurrogateModel,
    pub classical: Option<ClassicalModel>,
    pub constraint_states: Vec<DeformationState>,
}

enum Predictor<'a> {
    Surrogate(&'a SurrogateModel),
    Classical(&'a ClassicalModel),
    Analytic(&'a Model),
}

impl Predictor<'_> {
    fn predict(&self, state: &DeformationState) -> Result<SymTensor3> {
        match self {
            Predictor::Surrogate(m) => Ok(m.predict_stress(state)),
            Predictor::Classical(m) => Ok(m.predict_stress(state)),
            Predictor::Analytic(m) => analytic::stress(m, state),
        }
    }
}

struct Region {
    name: String,
    class: RegionClass,
    mode: Mode,
    points: Vec<GridPoint>,
    truth: Vec<SymTensor3>,
    dropped: usize,
}

fn coincides(a: &DeformationState, b: &DeformationState) -> bool {
    let close = |x: &[[f64; 3]; 3], y: &[[f64; 3]; 3]| {
        x.iter()
            .flatten()
            .zip(y.iter().flatten())
            .all(|(p, q)| (p - q).abs() <= COINCIDENCE_TOL)
    };
    close(&a.f.0, &b.f.0) && close(&a.f_dot.0, &b.f_dot.0)
}

fn build_regions(spec: &ExperimentSpec, training: &BranchDataset) -> Result<Vec<Region>> {
    let train_points = spec.training.points()?;
    let mut regions = vec![Region {
        name: "training".into(),
        class: RegionClass::Training,
        mode: spec.training.mode,
        truth: training.records.iter().map(|(_, s)| *s).collect(),
        points: train_points,
        dropped: 0,
    }];
    for t in &spec.testing {
        let all = t.grid.points()?;
        let total = all.len();
        let kept: Vec<GridPoint> = all
            .into_iter()
            .filter(|p| !training.records.iter().any(|(s, _)| coincides(s, &p.state)))
            .collect();
        let truth = label(&spec.ground_truth, &kept)?.into_iter().map(|(_, s)| s).collect();
        regions.push(Region {
            name: t.name.clone(),
            class: t.class,
            mode: t.grid.mode,
            dropped: total - kept.len(),
            points: kept,
            truth,
        });
    }
    Ok(regions)
}

fn evaluate_region(region: &Region, predictor: &Predictor, threshold: f64, rate_dependent: bool) -> Result<RegionReport> {
    let mut points = Vec::with_capacity(region.points.len());
    let mut excluded = 0;
    for (p, truth) in region.points.iter().zip(&region.truth) {
        let prediction = predictor.predict(&p.state)?;
        let err = if truth.voigt_norm() < threshold {
            excluded += 1;
            None
        } else {
            err(&prediction, truth)
        };
        points.push(PointResult {
            value: p.value,
            rate: p.rate,
            truth: *truth,
            prediction,
            err,
            dissipation: rate_dependent.then(|| dissipation(&prediction, &p.state.c_dot)),
        });
    }
    let errs: Vec<f64> = points.iter().filter_map(|p| p.err).collect();
    Ok(RegionReport {
        name: region.name.clone(),
        class: region.class,
        mode: region.mode,
        dropped_coincident: region.dropped,
        excluded_near_zero: excluded,
        mean_err: mean_err(&errs),
        max_err: errs.iter().copied().reduce(f64::max),
        min_dissipation: points.iter().filter_map(|p| p.dissipation).reduce(f64::min),
        shear12_identically_zero: (region.mode == Mode::SimpleShear)
            .then(|| points.iter().all(|p| p.prediction.0[5] == 0.0)),
        points,
    })
}

fn class_means(regions: &[RegionReport]) -> ClassMeans {
    let pooled = |keep: &dyn Fn(RegionClass) -> bool| {
        let errs: Vec<f64> = regions
            .iter()
            .filter(|r| keep(r.class))
            .flat_map(|r| r.errs())
            .collect();
        mean_err(&errs)
    };
    ClassMeans {
        training: pooled(&|c| c == RegionClass::Training),
        same_mode: pooled(&|c| c == RegionClass::SameMode),
        cross_mode: pooled(&|c| c == RegionClass::CrossMode),
        testing: pooled(&|c| c != RegionClass::Training),
    }
}

fn model_report(
    name: &str,
    predictor: Predictor,
    regions: &[Region],
    threshold: f64,
    rate_dependent: bool,
) -> Result<ModelReport> {
    let reports = regions
        .iter()
        .map(|r| evaluate_region(r, &predictor, threshold, rate_dependent))
        .collect::<Result<Vec<_>>>()?;
    let fit = match predictor {
        Predictor::Surrogate(m) => Some(FitSummary {
            theta: m.gp.theta(),
            diagnostics: m.gp.diagnostics().clone(),
        }),
        Predictor::Classical(m) => Some(FitSummary {
            theta: m.gp.theta(),
            diagnostics: m.gp.diagnostics().clone(),
        }),
        Predictor::Analytic(_) => None,
    };
    Ok(ModelReport {
        name: name.into(),
        class_means: class_means(&reports),
        regions: reports,
        fit,
        constraint_min_dissipation: None,
    })
}

fn constraint_states(spec: &ExperimentSpec, training: &BranchDataset) -> Result<Vec<DeformationState>> {
    match &spec.constraint_points {
        Some(points) => points.iter().map(StatePoint::state).collect(),
        None => Ok(training.states()),
    }
}

/// Train every model of the experiment and evaluate it over all regions.
/// Files are written when the spec names an output directory.
pub fn run_experiment_detailed(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    run_inner(spec).map_err(|e| Error::Experiment {
        experiment: spec.experiment.name().into(),
        source: Box::new(e),
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ErrorReport> {
    run_experiment_detailed(spec).map(|r| r.report)
}

fn run_inner(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    let training = generate_dataset(spec)?;
    let branch = training.branch;
    let rate_dependent = branch == Branch::VIso;
    let opts = spec.fit_options();
    let constraint_states = if rate_dependent {
        constraint_states(spec, &training)?
    } else {
        Vec::new()
    };
    let (_, surrogate) = train_branch(
        &training,
        &opts,
        rate_dependent.then_some(constraint_states.as_slice()),
    )?;
    let classical = if spec.baselines.classical {
        Some(train_classical(&training, rate_dependent, &opts)?)
    } else {
        None
    };
    let conventional = match spec.baselines.conventional {
        Some(family) => Some(calibrate_conventional(family, &training)?),
        None => None,
    };

    let regions = build_regions(spec, &training)?;
    let scale = training.stress_scale();
    let threshold = NEAR_ZERO_FRACTION * scale;

    let mut models = Vec::new();
    let mut sur = model_report("surrogate", Predictor::Surrogate(&surrogate), &regions, threshold, rate_dependent)?;
    if rate_dependent {
        sur.constraint_min_dissipation = constraint_states
            .iter()
            .map(|s| dissipation(&surrogate.predict_stress(s), &s.c_dot))
            .reduce(f64::min);
    }
    models.push(sur);
    if let Some(c) = &classical {
        models.push(model_report("classical", Predictor::Classical(c), &regions, threshold, rate_dependent)?);
    }
    if let Some(m) = &conventional {
        models.push(model_report("conventional", Predictor::Analytic(m), &regions, threshold, rate_dependent)?);
    }

    let report = ErrorReport {
        experiment: spec.experiment,
        branch,
        training_size: training.len(),
        dataset_sha256: training.sha256(),
        stress_scale: scale,
        rate_dependent,
        conventional,
        models,
    };
    if let Some(dir) = &spec.output_dir {
        write_report(dir, spec, &report)?;
    }
    Ok(ExperimentRun {
        report,
        training,
        surrogate,
        classical,
        constraint_states,
    })
}

fn calibrate_conventional(family: Family, training: &BranchDataset) -> Result<Model> {
    let model = analytic::calibrate(family, &training.records)?;
    if model.branch() != training.branch {
        return Err(Error::InvalidInput(format!(
            "conventional family {} does not describe the {} branch",
            model.name(),
            training.branch
        )));
    }
    Ok(model)
}

/// CSV of one region: grid coordinates, truth, prediction, err and, when
/// available, dissipation.
pub fn region_csv(region: &RegionReport) -> Result<Vec<u8>> {
    let with_dissipation = region.points.iter().any(|p| p.dissipation.is_some());
    let mut header = vec!["value".to_string(), "rate".to_string()];
    header.extend(STRESS_COLUMNS.iter().map(|c| format!("truth_{c}")));
    header.extend(STRESS_COLUMNS.iter().map(|c| format!("pred_{c}")));
    header.push("err".into());
    if with_dissipation {
        header.push("dissipation".into());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for p in &region.points {
        let mut row = vec![fmt_f64(p.value), fmt_f64(p.rate)];
        row.extend(p.truth.0.iter().map(|&v| fmt_f64(v)));
        row.extend(p.prediction.0.iter().map(|&v| fmt_f64(v)));
        row.push(p.err.map(fmt_f64).unwrap_or_default());
        if with_dissipation {
            row.push(p.dissipation.map(fmt_f64).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

#[derive(Serialize)]
struct Summary<'a> {
    spec: &'a ExperimentSpec,
    report: SummaryReport<'a>,
}

#[derive(Serialize)]
struct SummaryReport<'a> {
    experiment: ExperimentId,
    branch: Branch,
    training_size: usize,
    dataset_sha256: &'a str,
    stress_scale: f64,
    rate_dependent: bool,
    conventional: &'a Option<Model>,
    models: Vec<SummaryModel<'a>>,
}

#[derive(Serialize)]
struct SummaryModel<'a> {
    name: &'a str,
    class_means: ClassMeans,
    fit: &'a Option<FitSummary>,
    constraint_min_dissipation: Option<f64>,
    regions: Vec<SummaryRegion<'a>>,
}

#[derive(Serialize)]
struct SummaryRegion<'a> {
    name: &'a str,
    class: RegionClass,
    mode: Mode,
    n_points: usize,
    dropped_coincident: usize,
    excluded_near_zero: usize,
    mean_err: Option<f64>,
    max_err: Option<f64>,
    min_dissipation: Option<f64>,
    shear12_identically_zero: Option<bool>,
    csv: String,
}

fn csv_name(model: &str, region: &str) -> String {
    format!("{model}_{region}.csv")
}

/// Compact JSON summary: everything in the report except the per-point rows,
/// which live in the CSV files.
pub fn summary_json(spec: &ExperimentSpec, report: &ErrorReport) -> Result<String> {
    let summary = Summary {
        spec,
        report: SummaryReport {
            experiment: report.experiment,
            branch: report.branch,
            training_size: report.training_size,
            dataset_sha256: &report.dataset_sha256,
            stress_scale: report.stress_scale,
            rate_dependent: report.rate_dependent,
            conventional: &report.conventional,
            models: report
                .models
                .iter()
                .map(|m| SummaryModel {
                    name: &m.name,
                    class_means: m.class_means,
                    fit: &m.fit,
                    constraint_min_dissipation: m.constraint_min_dissipation,
                    regions: m
                        .regions
                        .iter()
                        .map(|r| SummaryRegion {
                            name: &r.name,
                            class: r.class,
                            mode: r.mode,
                            n_points: r.points.len(),
                            dropped_coincident: r.dropped_coincident,
                            excluded_near_zero: r.excluded_near_zero,
                            mean_err: r.mean_err,
                            max_err: r.max_err,
                            min_dissipation: r.min_dissipation,
                            shear12_identically_zero: r.shear12_identically_zero,
                            csv: csv_name(&m.name, &r.name),
                        })
                        .collect(),
                })
                .collect(),
        },
    };
    Ok(serde_json::to_string_pretty(&summary)?)
}

/// Write one CSV per model and region plus `summary.json` into `dir`.
pub fn write_report(dir: &Path, spec: &ExperimentSpec, report: &ErrorReport) -> Result<()> {
    for m in &report.models {
        for r in &m.regions {
            write_atomic(&dir.join(csv_name(&m.name, &r.name)), &region_csv(r)?)?;
        }
    }
    write_atomic(&dir.join("summary.json"), summary_json(spec, report)?.as_bytes())
}

/// Errors of a trained model against a labelled dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEvaluation {
    pub n_points: usize,
    pub errs: Vec<Option<f64>>,
    pub excluded_near_zero: usize,
    pub mean_err: Option<f64>,
    pub max_err: Option<f64>,
    /// Present when any state carries a deformation rate.
    pub min_dissipation: Option<f64>,
}

/// Evaluate `model` on `data`, excluding near-zero truths relative to the
/// largest stress norm in `data`.
pub fn evaluate_dataset(model: &TrainedModel, data: &[(DeformationState, SymTensor3)]) -> DatasetEvaluation {
    let scale = data.iter().map(|(_, s)| s.voigt_norm()).fold(0.0, f64::max);
    let threshold = NEAR_ZERO_FRACTION * scale;
    let mut errs = Vec::with_capacity(data.len());
    let mut excluded = 0;
    let mut min_dissipation: Option<f64> = None;
    for (state, truth) in data {
        let pred = model.predict_stress(state);
        if truth.voigt_norm() < threshold {
            excluded += 1;
            errs.push(None);
        } else {
            errs.push(err(&pred, truth));
        }
        if !state.is_rate_free() {
            let d = dissipation(&pred, &state.c_dot);
            min_dissipation = Some(min_dissipation.map_or(d, |m| m.min(d)));
        }
    }
    let valid: Vec<f64> = errs.iter().flatten().copied().collect();
    DatasetEvaluation {
        n_points: data.len(),
        excluded_near_zero: excluded,
        mean_err: mean_err(&valid),
        max_err: valid.iter().copied().reduce(f64::max),
        min_dissipation,
        errs,
    }
}

/// One model's numbers at one training size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub model: String,
    pub train_mean_err: Option<f64>,
    pub test_mean_err: Option<f64>,
    pub same_mode_mean_err: Option<f64>,
    pub cross_mode_mean_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub entries: Vec<SweepEntry>,
}

impl SweepRow {
    pub fn entry(&self, model: &str) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.model == model)
    }
}

/// Run the experiment once per training size with the spec's seed.
///
/// When the spec has an output directory, each run writes into
/// `size_<n>/` below it and the table goes to `sweep.csv`.
pub fn size_sweep(spec: &ExperimentSpec, sizes: &[usize]) -> Result<Vec<SweepRow>> {
    let mut order: Vec<usize> = sizes.to_vec();
    order.sort_unstable();
    order.dedup();
    let specs = order
        .iter()
        .map(|&n| {
            let mut s = spec.with_training_size(n)?;
            s.output_dir = spec.output_dir.as_ref().map(|d| d.join(format!("size_{n}")));
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(specs.len());
    for s in &specs {
        let report = run_experiment(s)?;
        rows.push(SweepRow {
            size: report.training_size,
            entries: report
                .models
                .iter()
                .map(|m| SweepEntry {
                    model: m.name.clone(),
                    train_mean_err: m.class_means.training,
                    test_mean_err: m.class_means.testing,
                    same_mode_mean_err: m.class_means.same_mode,
                    cross_mode_mean_err: m.class_means.cross_mode,
                })
                .collect(),
        });
    }
    if let Some(dir) = &spec.output_dir {
        write_atomic(&dir.join("sweep.csv"), &sweep_csv(&rows)?)?;
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["size", "model", "train_mean_err", "test_mean_err", "same_mode_mean_err", "cross_mode_mean_err"])?;
    let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for row in rows {
        for e in &row.entries {
            w.write_record([
                row.size.to_string(),
                e.model.clone(),
                cell(e.train_mean_err),
                cell(e.test_mean_err),
                cell(e.same_mode_mean_err),
                cell(e.cross_mode_mean_err),
            ])?;
        }
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Group a report's per-class means by model name.
pub fn class_table(report: &ErrorReport) -> BTreeMap<String, ClassMeans> {
    report
        .models
        .iter()
        .map(|m| (m.name.clone(), m.class_means))
        .collect()
}
