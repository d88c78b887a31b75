//! Gaussian process regression with a Matérn 3/2 kernel.
//!
//! Hyperparameters `θ = (log σ_f, log l)` are shared by all output columns and
//! chosen by maximizing the summed log marginal likelihood with multi-start
//! Nelder–Mead. Inputs and targets are standardized column-wise before
//! fitting; predictions are returned in raw units.
//!
//! [`fit_constrained`] additionally requires linear functionals of the
//! predicted outputs to be non-negative at a set of points.

mod optimize;

pub use optimize::{latin_hypercube, nelder_mead, Minimum, NelderMeadOptions};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1e-4;
/// Maximum number of ×10 jitter increases tried when a factorization fails.
pub const MAX_JITTER_ESCALATIONS: usize = 3;
/// Constraint values above `-FEASIBILITY_TOL` count as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Exterior penalty weights applied in sequence by the constrained fit.
pub const PENALTY_WEIGHTS: [f64; 3] = [1e2, 1e4, 1e6];
/// Input rows closer than this (after standardization) are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Objective value used when no factorization succeeds.
const FAILED_NLL: f64 = 1e20;
/// Quadratic penalty on leaving the hyperparameter box.
const BOX_PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma_f: f64,
    pub l: f64,
    pub alpha: f64,
}

impl KernelParams {
    pub fn from_theta(theta: [f64; 2], alpha: f64) -> Self {
        KernelParams {
            sigma_f: theta[0].exp(),
            l: theta[1].exp(),
            alpha,
        }
    }

    #[inline]
    fn covariance(&self, d: f64) -> f64 {
        let r = SQRT3 * d / self.l;
        self.sigma_f * self.sigma_f * (1.0 + r) * (-r).exp()
    }
}

/// `σ_f²(1 + √3 d/l) exp(−√3 d/l) + α [x = x']`.
pub fn kernel_eval(x: &[f64], x_prime: &[f64], params: &KernelParams) -> f64 {
    assert_eq!(x.len(), x_prime.len(), "kernel arguments differ in length");
    let d = euclidean(x, x_prime);
    let noise = if x == x_prime { params.alpha } else { 0.0 };
    params.covariance(d) + noise
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Box for `(log σ_f, log l)` in standardized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub log_sigma_f: [f64; 2],
    pub log_l: [f64; 2],
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            log_sigma_f: [-6.0, 6.0],
            log_l: [-6.0, 6.0],
        }
    }
}

impl Bounds {
    fn lo(&self) -> [f64; 2] {
        [self.log_sigma_f[0], self.log_l[0]]
    }
    fn hi(&self) -> [f64; 2] {
        [self.log_sigma_f[1], self.log_l[1]]
    }
    fn clip(&self, theta: &[f64]) -> [f64; 2] {
        let (lo, hi) = (self.lo(), self.hi());
        [theta[0].clamp(lo[0], hi[0]), theta[1].clamp(lo[1], hi[1])]
    }
    fn excess(&self, theta: &[f64]) -> f64 {
        let (lo, hi) = (self.lo(), self.hi());
        (0..2)
            .map(|k| (theta[k] - hi[k]).max(lo[k] - theta[k]).max(0.0).powi(2))
            .sum()
    }
    fn validate(&self) -> Result<()> {
        let ok = |b: [f64; 2]| b[0].is_finite() && b[1].is_finite() && b[0] < b[1];
        if ok(self.log_sigma_f) && ok(self.log_l) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid hyperparameter bounds {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub alpha: f64,
    pub bounds: Bounds,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub xatol: f64,
    pub fatol: f64,
    pub stall_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        let nm = NelderMeadOptions::default();
        FitOptions {
            alpha: DEFAULT_ALPHA,
            bounds: Bounds::default(),
            restarts: 8,
            seed: 0,
            max_iter: nm.max_iter,
            xatol: nm.xatol,
            fatol: nm.fatol,
            stall_iter: nm.stall_iter,
        }
    }
}

impl FitOptions {
    fn nelder_mead(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iter: self.max_iter,
            xatol: self.xatol,
            fatol: self.fatol,
            stall_iter: self.stall_iter,
        }
    }
}

/// Column-wise means and scales used to standardize inputs and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_scale: Vec<f64>,
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let scale = (0..d)
        .map(|k| {
            let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-300 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

impl Standardization {
    fn from_data(x: &[Vec<f64>], y: &[Vec<f64>]) -> Self {
        let (x_mean, x_scale) = column_stats(x);
        let (y_mean, y_scale) = column_stats(y);
        Standardization {
            x_mean,
            x_scale,
            y_mean,
            y_scale,
        }
    }

    pub fn standardize_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn standardize_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.y_mean.iter().zip(&self.y_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn restore_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.y_mean.iter().zip(&self.y_scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Linear inequality constraints `c_k · ỹ(x_k) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub points: Vec<Vec<f64>>,
    pub functionals: Vec<Vec<f64>>,
}

impl ConstraintSet {
    pub fn new(points: Vec<Vec<f64>>, functionals: Vec<Vec<f64>>) -> Result<Self> {
        let set = ConstraintSet { points, functionals };
        set.validate(None, None)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn validate(&self, n_in: Option<usize>, n_out: Option<usize>) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidInput("constraint set is empty".into()));
        }
        if self.points.len() != self.functionals.len() {
            return Err(Error::InvalidInput(format!(
                "{} constraint points but {} functionals",
                self.points.len(),
                self.functionals.len()
            )));
        }
        for (k, (p, c)) in self.points.iter().zip(&self.functionals).enumerate() {
            if n_in.is_some_and(|n| p.len() != n) || n_out.is_some_and(|n| c.len() != n) {
                return Err(Error::InvalidInput(format!(
                    "constraint {k} has mismatched dimensions"
                )));
            }
            if c.iter().all(|&v| v == 0.0) || !c.iter().chain(p).all(|v| v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "constraint {k} has an all-zero or non-finite functional"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome details of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitDiagnostics {
    /// False when the winning local search hit its iteration limit.
    pub converged: bool,
    pub log_likelihood: f64,
    /// Best log likelihood among the restart points before optimization.
    pub initial_log_likelihood: f64,
    pub evaluations: usize,
    pub jitter_escalations: usize,
    pub merged_duplicates: usize,
    /// Smallest normalized constraint value of the returned model.
    pub constraint_min: Option<f64>,
    /// True when the unconstrained optimum violated a constraint.
    pub constraints_active: bool,
}

/// A fitted Gaussian process.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpModelData", into = "GpModelData")]
pub struct GpModel {
    theta: [f64; 2],
    params: KernelParams,
    stats: Standardization,
    x: Vec<Vec<f64>>,
    y: DMatrix<f64>,
    diagnostics: FitDiagnostics,
    chol: Cholesky<f64, Dyn>,
    weights: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GpModelData {
    theta: [f64; 2],
    alpha: f64,
    standardization: Standardization,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    y: Vec<Vec<f64>>,
    #[serde(default)]
    diagnostics: FitDiagnostics,
}

impl From<GpModel> for GpModelData {
    fn from(m: GpModel) -> Self {
        let y = (0..m.y.nrows())
            .map(|i| m.y.row(i).iter().copied().collect())
            .collect();
        GpModelData {
            theta: m.theta,
            alpha: m.params.alpha,
            standardization: m.stats,
            x: m.x,
            y,
            diagnostics: m.diagnostics,
        }
    }
}

impl TryFrom<GpModelData> for GpModel {
    type Error = Error;
    fn try_from(d: GpModelData) -> Result<Self> {
        if d.x.is_empty() || d.x.len() != d.y.len() {
            return Err(Error::InvalidInput("model payload has inconsistent X/Y".into()));
        }
        let n_out = d.y[0].len();
        if d.y.iter().any(|r| r.len() != n_out) || d.x.iter().any(|r| r.len() != d.x[0].len()) {
            return Err(Error::InvalidInput("ragged rows in model payload".into()));
        }
        let y = DMatrix::from_fn(d.y.len(), n_out, |i, k| d.y[i][k]);
        let dist = distance_matrix(&d.x);
        let params = KernelParams::from_theta(d.theta, d.alpha);
        let chol = factorize(&dist, &params)
            .ok_or_else(|| Error::Fit("stored model is not positive definite".into()))?;
        let weights = chol.solve(&y);
        Ok(GpModel {
            theta: d.theta,
            params,
            stats: d.standardization,
            x: d.x,
            y,
            diagnostics: d.diagnostics,
            chol,
            weights,
        })
    }
}

fn distance_matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    let n = x.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = euclidean(&x[i], &x[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

fn cross_distances(a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| euclidean(&a[i], &b[j]))
}

fn kernel_matrix(dist: &DMatrix<f64>, params: &KernelParams) -> DMatrix<f64> {
    dist.map(|d| params.covariance(d))
}

/// Cholesky factor of `K + α I` at exactly the given `α`.
fn factorize(dist: &DMatrix<f64>, params: &KernelParams) -> Option<Cholesky<f64, Dyn>> {
    let mut k = kernel_matrix(dist, params);
    for i in 0..k.nrows() {
        k[(i, i)] += params.alpha;
    }
    Cholesky::new(k)
}

/// Cholesky factor with up to [`MAX_JITTER_ESCALATIONS`] ×10 increases of `α`.
fn factorize_escalating(
    dist: &DMatrix<f64>,
    theta: [f64; 2],
    alpha: f64,
) -> Option<(Cholesky<f64, Dyn>, KernelParams, usize)> {
    let mut a = alpha;
    for escalation in 0..=MAX_JITTER_ESCALATIONS {
        let params = KernelParams::from_theta(theta, a);
        if let Some(chol) = factorize(dist, &params) {
            return Some((chol, params, escalation));
        }
        a = if a > 0.0 { a * 10.0 } else { 1e-12 };
    }
    None
}

struct Evaluation {
    nll: f64,
    chol: Cholesky<f64, Dyn>,
    weights: DMatrix<f64>,
    params: KernelParams,
    escalations: usize,
}

/// Standardized constraint data: `g_k = a_k · ỹ_std(x_k) + b_k`.
struct ConstraintEval {
    cross_dist: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl ConstraintEval {
    fn new(set: &ConstraintSet, stats: &Standardization, x_std: &[Vec<f64>]) -> Self {
        let pts: Vec<Vec<f64>> = set.points.iter().map(|p| stats.standardize_x(p)).collect();
        let n_out = stats.y_scale.len();
        let mut a = DMatrix::zeros(set.len(), n_out);
        let mut b = DVector::zeros(set.len());
        for (k, c) in set.functionals.iter().enumerate() {
            let scaled: Vec<f64> = c.iter().zip(&stats.y_scale).map(|(c, s)| c * s).collect();
            let norm = scaled.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            for j in 0..n_out {
                a[(k, j)] = scaled[j] / norm;
            }
            b[k] = c.iter().zip(&stats.y_mean).map(|(c, m)| c * m).sum::<f64>() / norm;
        }
        ConstraintEval {
            cross_dist: cross_distances(&pts, x_std),
            a,
            b,
        }
    }

    fn values(&self, params: &KernelParams, weights: &DMatrix<f64>) -> DVector<f64> {
        let ks = kernel_matrix(&self.cross_dist, params);
        let pred = ks * weights;
        let mut g = self.b.clone();
        for k in 0..g.len() {
            g[k] += pred.row(k).dot(&self.a.row(k));
        }
        g
    }
}

struct Problem {
    x: Vec<Vec<f64>>,
    y: DMatrix<f64>,
    dist: DMatrix<f64>,
    alpha: f64,
    bounds: Bounds,
}

impl Problem {
    fn evaluate(&self, theta: [f64; 2]) -> Option<Evaluation> {
        let (chol, params, escalations) = factorize_escalating(&self.dist, theta, self.alpha)?;
        let weights = chol.solve(&self.y);
        let (n, n_out) = self.y.shape();
        let fit = self.y.component_mul(&weights).sum();
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        let nll = 0.5 * fit
            + n_out as f64 * log_det
            + 0.5 * (n * n_out) as f64 * (2.0 * std::f64::consts::PI).ln();
        Some(Evaluation {
            nll,
            chol,
            weights,
            params,
            escalations,
        })
    }

    fn nll(&self, theta: [f64; 2]) -> f64 {
        self.evaluate(theta).map_or(FAILED_NLL, |e| e.nll)
    }

    /// Negative log likelihood at the clipped point plus the box penalty.
    fn boxed_objective(&self, theta: &[f64]) -> (f64, Option<Evaluation>) {
        let clipped = self.bounds.clip(theta);
        let penalty = BOX_PENALTY * self.bounds.excess(theta);
        match self.evaluate(clipped) {
            Some(e) => (e.nll + penalty, Some(e)),
            None => (FAILED_NLL + penalty, None),
        }
    }

    /// Log marginal likelihood and its gradient in `(log σ_f, log l)`.
    fn lml_and_gradient(&self, theta: [f64; 2]) -> Option<(f64, [f64; 2])> {
        let e = self.evaluate(theta)?;
        let n_out = self.y.ncols() as f64;
        let k_inv = e.chol.inverse();
        let ww = &e.weights * e.weights.transpose();
        let sf2 = e.params.sigma_f * e.params.sigma_f;
        let mut grad = [0.0; 2];
        let n = self.dist.nrows();
        for i in 0..n {
            for j in 0..n {
                let r = SQRT3 * self.dist[(i, j)] / e.params.l;
                let k = sf2 * (1.0 + r) * (-r).exp();
                let dk_dsf = 2.0 * k;
                let dk_dl = sf2 * r * r * (-r).exp();
                let m = ww[(i, j)] - n_out * k_inv[(i, j)];
                grad[0] += 0.5 * m * dk_dsf;
                grad[1] += 0.5 * m * dk_dl;
            }
        }
        Some((-e.nll, grad))
    }
}

struct Prepared {
    problem: Problem,
    stats: Standardization,
    merged: usize,
}

fn prepare(x: &[Vec<f64>], y: &[Vec<f64>], opts: &FitOptions) -> Result<Prepared> {
    opts.bounds.validate()?;
    if !(opts.alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha = {} is negative", opts.alpha)));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("at least one restart is required".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let (n_in, n_out) = (x[0].len(), y[0].len());
    if n_in == 0 || n_out == 0 {
        return Err(Error::InvalidInput("zero-width inputs or targets".into()));
    }
    for (i, (xi, yi)) in x.iter().zip(y).enumerate() {
        if xi.len() != n_in || yi.len() != n_out {
            return Err(Error::InvalidInput(format!("row {i} has inconsistent width")));
        }
        if !xi.iter().chain(yi).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("row {i} has a non-finite value")));
        }
    }

    // merge duplicate inputs that carry identical targets
    let provisional = Standardization::from_data(x, y);
    let x_std: Vec<Vec<f64>> = x.iter().map(|r| provisional.standardize_x(r)).collect();
    let mut keep: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        match keep.iter().find(|&&k| euclidean(&x_std[k], &x_std[i]) <= DUPLICATE_TOL) {
            None => keep.push(i),
            Some(&k) => {
                let same = y[k].iter().zip(&y[i]).zip(&provisional.y_scale).all(|((a, b), s)| {
                    (a - b).abs() <= 1e-9 * s.max(a.abs()).max(b.abs()).max(1e-300)
                });
                if !same {
                    return Err(Error::Fit(format!(
                        "rows {k} and {i} share an input but have different targets"
                    )));
                }
            }
        }
    }
    let merged = x.len() - keep.len();
    let xu: Vec<Vec<f64>> = keep.iter().map(|&i| x[i].clone()).collect();
    let yu: Vec<Vec<f64>> = keep.iter().map(|&i| y[i].clone()).collect();
    if xu.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least two distinct training inputs, got {}",
            xu.len()
        )));
    }

    let stats = Standardization::from_data(&xu, &yu);
    let xs: Vec<Vec<f64>> = xu.iter().map(|r| stats.standardize_x(r)).collect();
    let ys = DMatrix::from_fn(yu.len(), n_out, |i, k| stats.standardize_y(&yu[i])[k]);
    let dist = distance_matrix(&xs);
    Ok(Prepared {
        problem: Problem {
            x: xs,
            y: ys,
            dist,
            alpha: opts.alpha,
            bounds: opts.bounds,
        },
        stats,
        merged,
    })
}

fn start_points(opts: &FitOptions) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    latin_hypercube(&mut rng, opts.restarts, &opts.bounds.lo(), &opts.bounds.hi())
}

#[cfg(feature = "parallel")]
fn map_starts<T: Send, F: Fn(&Vec<f64>) -> T + Sync + Send>(starts: &[Vec<f64>], f: F) -> Vec<T> {
    use rayon::prelude::*;
    starts.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_starts<T, F: Fn(&Vec<f64>) -> T>(starts: &[Vec<f64>], f: F) -> Vec<T> {
    starts.iter().map(f).collect()
}

fn best_of(runs: Vec<Minimum>) -> Minimum {
    runs.into_iter()
        .reduce(|best, m| if m.value < best.value { m } else { best })
        .expect("at least one restart")
}

fn build_model(
    prepared: Prepared,
    theta: [f64; 2],
    mut diagnostics: FitDiagnostics,
) -> Result<GpModel> {
    let e = prepared.problem.evaluate(theta).ok_or_else(|| {
        Error::Fit(format!(
            "kernel matrix not positive definite after {MAX_JITTER_ESCALATIONS} jitter escalations"
        ))
    })?;
    diagnostics.log_likelihood = -e.nll;
    diagnostics.jitter_escalations = e.escalations;
    diagnostics.merged_duplicates = prepared.merged;
    Ok(GpModel {
        theta,
        params: e.params,
        stats: prepared.stats,
        x: prepared.problem.x,
        y: prepared.problem.y,
        diagnostics,
        chol: e.chol,
        weights: e.weights,
    })
}

fn unconstrained_search(problem: &Problem, opts: &FitOptions) -> (Minimum, f64, usize) {
    let starts = start_points(opts);
    let initial = starts
        .iter()
        .map(|s| problem.nll(problem.bounds.clip(s)))
        .fold(f64::INFINITY, f64::min);
    let nm = opts.nelder_mead();
    let runs = map_starts(&starts, |s| {
        nelder_mead(|t| problem.boxed_objective(t).0, s, nm)
    });
    let evaluations = runs.iter().map(|m| m.evaluations).sum();
    (best_of(runs), initial, evaluations)
}

/// Maximum-likelihood fit of a multi-output Gaussian process.
pub fn fit(x: &[Vec<f64>], y: &[Vec<f64>], opts: &FitOptions) -> Result<GpModel> {
    let prepared = prepare(x, y, opts)?;
    let (best, initial, evaluations) = unconstrained_search(&prepared.problem, opts);
    let theta = prepared.problem.bounds.clip(&best.x);
    let diagnostics = FitDiagnostics {
        converged: best.converged,
        initial_log_likelihood: -initial,
        evaluations,
        ..Default::default()
    };
    build_model(prepared, theta, diagnostics)
}

/// Best feasible point seen during one penalized search.
#[derive(Clone)]
struct FeasibleBest {
    nll: f64,
    theta: [f64; 2],
}

/// Maximum-likelihood fit subject to `c_k · ỹ(x_k) ≥ 0` at every constraint point.
///
/// If the unconstrained optimum already satisfies every constraint it is
/// returned unchanged. Otherwise the search is repeated with an exterior
/// penalty of increasing weight and the most likely feasible hyperparameters
/// encountered are kept.
pub fn fit_constrained(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    opts: &FitOptions,
    constraints: &ConstraintSet,
) -> Result<GpModel> {
    let prepared = prepare(x, y, opts)?;
    constraints.validate(Some(x[0].len()), Some(y[0].len()))?;
    let problem = &prepared.problem;
    let ceval = ConstraintEval::new(constraints, &prepared.stats, &problem.x);
    let g_at = |theta: [f64; 2]| -> Option<(f64, DVector<f64>)> {
        let e = problem.evaluate(theta)?;
        Some((e.nll, ceval.values(&e.params, &e.weights)))
    };

    let (best, initial, mut evaluations) = unconstrained_search(problem, opts);
    let theta0 = problem.bounds.clip(&best.x);
    if let Some((_, g)) = g_at(theta0) {
        if g.min() >= -FEASIBILITY_TOL {
            let diagnostics = FitDiagnostics {
                converged: best.converged,
                initial_log_likelihood: -initial,
                evaluations,
                constraint_min: Some(g.min()),
                constraints_active: false,
                ..Default::default()
            };
            return build_model(prepared, theta0, diagnostics);
        }
    }

    let nm = opts.nelder_mead();
    let penalized = |start: &Vec<f64>, weight: f64| -> (Minimum, Option<FeasibleBest>) {
        let mut feasible: Option<FeasibleBest> = None;
        let m = nelder_mead(
            |t| {
                let (value, eval) = problem.boxed_objective(t);
                let Some(e) = eval else { return value };
                let g = ceval.values(&e.params, &e.weights);
                let violation: f64 = g.iter().map(|v| v.min(0.0).powi(2)).sum();
                if g.min() >= -FEASIBILITY_TOL && problem.bounds.excess(t) == 0.0 {
                    let theta = problem.bounds.clip(t);
                    if feasible.as_ref().is_none_or(|f| e.nll < f.nll) {
                        feasible = Some(FeasibleBest { nll: e.nll, theta });
                    }
                }
                value + weight * violation
            },
            start,
            nm,
        );
        (m, feasible)
    };
    let merge = |a: Option<FeasibleBest>, b: Option<FeasibleBest>| match (a, b) {
        (Some(a), Some(b)) => Some(if b.nll < a.nll { b } else { a }),
        (a, b) => a.or(b),
    };

    let starts = start_points(opts);
    let mut feasible: Option<FeasibleBest> = None;
    let mut stage_best: Option<Minimum> = None;
    for (stage, &weight) in PENALTY_WEIGHTS.iter().enumerate() {
        let stage_starts = match &stage_best {
            Some(m) if stage > 0 => vec![m.x.clone()],
            _ => starts.clone(),
        };
        let runs = map_starts(&stage_starts, |s| penalized(s, weight));
        let mut mins = Vec::with_capacity(runs.len());
        for (m, f) in runs {
            evaluations += m.evaluations;
            feasible = merge(feasible, f);
            mins.push(m);
        }
        stage_best = Some(best_of(mins));
    }
    let stage_best = stage_best.expect("at least one penalty stage");

    let Some(found) = feasible else {
        let theta = problem.bounds.clip(&stage_best.x);
        let (index, value) = g_at(theta)
            .map(|(_, g)| {
                let (i, v) = g.argmin();
                (i, v)
            })
            .unwrap_or((0, f64::NEG_INFINITY));
        return Err(Error::Infeasible { index, value });
    };
    let g_min = g_at(found.theta).map(|(_, g)| g.min());
    let diagnostics = FitDiagnostics {
        converged: stage_best.converged,
        initial_log_likelihood: -initial,
        evaluations,
        constraint_min: g_min,
        constraints_active: true,
        ..Default::default()
    };
    build_model(prepared, found.theta, diagnostics)
}

impl GpModel {
    pub fn theta(&self) -> [f64; 2] {
        self.theta
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn standardization(&self) -> &Standardization {
        &self.stats
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.stats.x_mean.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.stats.y_mean.len()
    }

    /// Training inputs in raw units.
    pub fn training_inputs(&self) -> Vec<Vec<f64>> {
        self.x
            .iter()
            .map(|r| {
                r.iter()
                    .zip(self.stats.x_mean.iter().zip(&self.stats.x_scale))
                    .map(|(v, (m, s))| v * s + m)
                    .collect()
            })
            .collect()
    }

    /// Training targets in raw units.
    pub fn training_targets(&self) -> Vec<Vec<f64>> {
        (0..self.y.nrows())
            .map(|i| {
                let row: Vec<f64> = self.y.row(i).iter().copied().collect();
                self.stats.restore_y(&row)
            })
            .collect()
    }

    fn cross_covariance(&self, x_star: &[f64]) -> DVector<f64> {
        assert_eq!(x_star.len(), self.n_inputs(), "query has the wrong input dimension");
        let xs = self.stats.standardize_x(x_star);
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| self.params.covariance(euclidean(xi, &xs))),
        )
    }

    /// Posterior mean in raw target units.
    pub fn predict(&self, x_star: &[f64]) -> Vec<f64> {
        let k = self.cross_covariance(x_star);
        let mean_std: Vec<f64> = (0..self.n_outputs())
            .map(|c| k.dot(&self.weights.column(c)))
            .collect();
        self.stats.restore_y(&mean_std)
    }

    /// Posterior variance in standardized target units.
    pub fn predict_variance(&self, x_star: &[f64]) -> f64 {
        let k = self.cross_covariance(x_star);
        let v = self.chol.solve(&k);
        let prior = self.params.sigma_f * self.params.sigma_f + self.params.alpha;
        (prior - k.dot(&v)).max(0.0)
    }

    /// Log marginal likelihood and its gradient at arbitrary `θ` on this
    /// model's training data.
    pub fn log_likelihood_with_gradient(&self, theta: [f64; 2]) -> Option<(f64, [f64; 2])> {
        self.problem().lml_and_gradient(theta)
    }

    pub fn log_likelihood(&self, theta: [f64; 2]) -> Option<f64> {
        self.problem().evaluate(theta).map(|e| -e.nll)
    }

    fn problem(&self) -> Problem {
        Problem {
            x: self.x.clone(),
            y: self.y.clone(),
            dist: distance_matrix(&self.x),
            alpha: self.params.alpha,
            bounds: Bounds::default(),
        }
    }

    /// Normalized constraint values of this model.
    pub fn constraint_values(&self, constraints: &ConstraintSet) -> Vec<f64> {
        let ceval = ConstraintEval::new(constraints, &self.stats, &self.x);
        ceval.values(&self.params, &self.weights).iter().copied().collect()
    }

    /// Largest entry of `K(X, X)` asymmetry, for diagnostics.
    pub fn kernel_asymmetry(&self) -> f64 {
        let k = kernel_matrix(&distance_matrix(&self.x), &self.params);
        (&k - k.transpose()).amax()
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

    #[test]
    fn kernel_values() {
        let p = KernelParams {
            sigma_f: 1.0,
            l: 1.0,
            alpha: 0.0,
        };
        let v = kernel_eval(&[0.0], &[1.0], &p);
        assert!((v - (1.0 + SQRT3) * (-SQRT3).exp()).abs() < 1e-15);
        assert!((v - 0.48335).abs() < 1e-5);
        let q = KernelParams { alpha: 0.3, ..p };
        assert_eq!(kernel_eval(&[2.0, 1.0], &[2.0, 1.0], &q), 1.3);
        assert_eq!(kernel_eval(&[0.0, 1.0], &[1.0, 0.5], &q), kernel_eval(&[1.0, 0.5], &[0.0, 1.0], &q));
    }

    #[test]
    fn interpolates_two_points() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![vec![0.0], vec![1.0]];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        assert!(m.predict(&[0.0])[0].abs() < 1e-3);
        assert!((m.predict(&[1.0])[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_targets_give_zero_predictions() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = vec![vec![0.0, 0.0]; 5];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        for q in [-3.0, 0.5, 2.2, 40.0] {
            assert_eq!(m.predict(&[q]), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn duplicates_are_merged_or_rejected() {
        let x = vec![vec![0.0], vec![1.0], vec![1.0], vec![2.0]];
        let y = vec![vec![0.0], vec![1.0], vec![1.0], vec![4.0]];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        assert_eq!(m.n_train(), 3);
        assert_eq!(m.diagnostics().merged_duplicates, 1);

        let y_bad = vec![vec![0.0], vec![1.0], vec![1.5], vec![4.0]];
        assert!(matches!(fit(&x, &y_bad, &FitOptions::default()), Err(Error::Fit(_))));
    }

    #[test]
    fn rejects_degenerate_input() {
        let opts = FitOptions::default();
        assert!(fit(&[vec![1.0]], &[vec![1.0]], &opts).is_err());
        assert!(fit(&[vec![1.0], vec![2.0]], &[vec![1.0]], &opts).is_err());
        assert!(fit(&[vec![1.0], vec![f64::NAN]], &[vec![1.0], vec![2.0]], &opts).is_err());
    }

    #[test]
    fn variance_inside_hull_is_smaller() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![vec![0.0], vec![1.0]];
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        assert!(m.predict_variance(&[0.5]) < m.predict_variance(&[3.0]));
        let p = m.params();
        let far = m.predict_variance(&[1e6]);
        assert!((far - (p.sigma_f * p.sigma_f + p.alpha)).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_predicts_identically() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.3, (i as f64).sin()]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] * r[1], r[0] - r[1]]).collect();
        let m = fit(&x, &y, &FitOptions::default()).unwrap();
        let back = GpModel::from_json(&m.to_json().unwrap()).unwrap();
        for q in [[0.1, 0.2], [1.0, -0.5], [3.0, 0.0]] {
            let (a, b) = (m.predict(&q), back.predict(&q));
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
        let json: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        for key in ["theta", "alpha", "standardization", "X", "Y"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn constraint_set_validation() {
        assert!(ConstraintSet::new(vec![], vec![]).is_err());
        assert!(ConstraintSet::new(vec![vec![0.0]], vec![vec![0.0]]).is_err());
        assert!(ConstraintSet::new(vec![vec![0.0]], vec![vec![1.0], vec![2.0]]).is_err());
        assert!(ConstraintSet::new(vec![vec![0.0]], vec![vec![1.0]]).is_ok());
    }
}
