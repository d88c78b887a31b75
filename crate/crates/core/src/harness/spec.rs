use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analytic::{Family, HyperelasticModel, Model, ViscousModel, VolumetricModel};
use crate::continuum::{kinematics_from, mode_confined_uniaxial, mode_isochoric_uniaxial, mode_simple_shear, DeformationState};
use crate::error::{Error, Result};
use crate::gpr::{Bounds, FitOptions, DEFAULT_ALPHA};
use crate::tensor::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Hydrostatic,
    Quasistatic,
    Dynamic,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 3] = [
        ExperimentId::Hydrostatic,
        ExperimentId::Quasistatic,
        ExperimentId::Dynamic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Hydrostatic => "hydrostatic",
            ExperimentId::Quasistatic => "quasistatic",
            ExperimentId::Dynamic => "dynamic",
        }
    }

    /// Default training-size ladder for sweeps.
    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            ExperimentId::Hydrostatic | ExperimentId::Quasistatic => vec![26, 51, 101, 201],
            ExperimentId::Dynamic => vec![155, 186, 217, 305, 366, 427, 455, 546, 637],
        }
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hydrostatic" => Ok(ExperimentId::Hydrostatic),
            "quasistatic" => Ok(ExperimentId::Quasistatic),
            "dynamic" => Ok(ExperimentId::Dynamic),
            other => Err(Error::InvalidInput(format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `F = diag(j, 1, 1)`, rate `Ḟ = diag(ṙ, 0, 0)`.
    ConfinedUniaxial,
    IsochoricUniaxial,
    SimpleShear,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ConfinedUniaxial => "confined_uniaxial",
            Mode::IsochoricUniaxial => "isochoric_uniaxial",
            Mode::SimpleShear => "simple_shear",
        }
    }

    pub fn state(self, value: f64, rate: f64) -> Result<DeformationState> {
        match self {
            Mode::ConfinedUniaxial if rate == 0.0 => mode_confined_uniaxial(value),
            Mode::ConfinedUniaxial => kinematics_from(
                Tensor3::diag(value, 1.0, 1.0),
                Tensor3::diag(rate, 0.0, 0.0),
            ),
            Mode::IsochoricUniaxial => mode_isochoric_uniaxial(value, rate),
            Mode::SimpleShear => mode_simple_shear(value, rate),
        }
    }
}

/// Loading rates of a grid: an explicit list or a uniform range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rates {
    List(Vec<f64>),
    Range { range: [f64; 2], count: usize },
}

impl Default for Rates {
    fn default() -> Self {
        Rates::List(vec![0.0])
    }
}

impl Rates {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Rates::List(v) => v.clone(),
            Rates::Range { range, count } => linspace(range[0], range[1], *count),
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Uniform grid over one mode parameter, repeated for every rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub mode: Mode,
    pub range: [f64; 2],
    pub count: usize,
    #[serde(default)]
    pub rates: Rates,
}

/// One grid location with its generated state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub mode: Mode,
    pub value: f64,
    pub rate: f64,
    pub state: DeformationState,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.count * self.rates.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points ordered rate-major, parameter-minor.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let mut out = Vec::with_capacity(self.len());
        for rate in self.rates.values() {
            for value in linspace(self.range[0], self.range[1], self.count) {
                let state = self.mode.state(value, rate).map_err(|e| Error::Generation {
                    point: describe(self.mode, value, rate),
                    source: Box::new(e),
                })?;
                out.push(GridPoint {
                    mode: self.mode,
                    value,
                    rate,
                    state,
                });
            }
        }
        Ok(out)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidInput(format!("{what}: grid count must be at least 2")));
        }
        if !(self.range[0].is_finite() && self.range[1].is_finite()) {
            return Err(Error::InvalidInput(format!("{what}: non-finite range")));
        }
        let rates = self.rates.values();
        if rates.is_empty() || rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput(format!("{what}: invalid rate list")));
        }
        if let Rates::Range { count, .. } = self.rates {
            if count < 1 {
                return Err(Error::InvalidInput(format!("{what}: empty rate range")));
            }
        }
        Ok(())
    }
}

pub(crate) fn describe(mode: Mode, value: f64, rate: f64) -> String {
    format!("{} value {value} rate {rate}", mode.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    Training,
    SameMode,
    CrossMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestGrid {
    pub name: String,
    pub class: RegionClass,
    pub grid: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    #[serde(default = "yes")]
    pub classical: bool,
    #[serde(default)]
    pub conventional: Option<Family>,
}

fn yes() -> bool {
    true
}

/// A state given directly by `F` and `Ḟ` (row-major).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePoint {
    pub f: [f64; 9],
    #[serde(default)]
    pub f_dot: [f64; 9],
}

impl StatePoint {
    pub fn state(&self) -> Result<DeformationState> {
        kinematics_from(Tensor3::from_row_major(self.f), Tensor3::from_row_major(self.f_dot))
    }
}

fn default_restarts() -> usize {
    8
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    pub ground_truth: Model,
    pub training: Grid,
    pub testing: Vec<TestGrid>,
    pub baselines: Baselines,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Dissipation constraint states for the viscous surrogate; the training
    /// states are used when absent.
    #[serde(default)]
    pub constraint_points: Option<Vec<StatePoint>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Rates used for every dynamic testing grid.
pub const DYNAMIC_TEST_RATES: [f64; 7] = [10.0, 32.5, 55.0, 77.5, 100.0, 122.5, 145.0];
/// Points per parameter range in testing grids.
pub const TEST_POINTS: usize = 51;

impl ExperimentSpec {
    pub fn default_for(id: ExperimentId) -> Self {
        let test = |name: &str, class, mode, range, rates| TestGrid {
            name: name.into(),
            class,
            grid: Grid {
                mode,
                range,
                count: TEST_POINTS,
                rates,
            },
        };
        let static_rates = Rates::default;
        let (ground_truth, training, testing, conventional): (Model, Grid, Vec<TestGrid>, Family) = match id {
            ExperimentId::Hydrostatic => (
                VolumetricModel::SimoMiehe { kappa: 10.0 }.into(),
                Grid {
                    mode: Mode::ConfinedUniaxial,
                    range: [0.75, 1.0],
                    count: 26,
                    rates: static_rates(),
                },
                vec![
                    test("compression", RegionClass::SameMode, Mode::ConfinedUniaxial, [0.5, 0.75], static_rates()),
                    test("tension", RegionClass::CrossMode, Mode::ConfinedUniaxial, [1.0, 1.5], static_rates()),
                ],
                Family::VolNeoHookean,
            ),
            ExperimentId::Quasistatic => (
                HyperelasticModel::MooneyRivlin { a10: 1.0, a01: 0.5 }.into(),
                Grid {
                    mode: Mode::IsochoricUniaxial,
                    range: [1.0, 1.25],
                    count: 26,
                    rates: static_rates(),
                },
                vec![
                    test("tension", RegionClass::SameMode, Mode::IsochoricUniaxial, [1.25, 1.5], static_rates()),
                    test("compression", RegionClass::CrossMode, Mode::IsochoricUniaxial, [0.5, 1.0], static_rates()),
                    test("shear", RegionClass::CrossMode, Mode::SimpleShear, [0.0, 0.5], static_rates()),
                ],
                Family::Yeoh,
            ),
            ExperimentId::Dynamic => {
                let positive = Rates::List(DYNAMIC_TEST_RATES.to_vec());
                let negative = Rates::List(DYNAMIC_TEST_RATES.iter().map(|r| -r).collect());
                (
                    ViscousModel::Uss { k11: 1.0, k21: 1.0, c21: 0.75 }.into(),
                    Grid {
                        mode: Mode::IsochoricUniaxial,
                        range: [1.0, 1.5],
                        count: 31,
                        rates: Rates::Range {
                            range: [10.0, 100.0],
                            count: 5,
                        },
                    },
                    vec![
                        test("tension", RegionClass::SameMode, Mode::IsochoricUniaxial, [1.0, 1.75], positive.clone()),
                        test("compression", RegionClass::CrossMode, Mode::IsochoricUniaxial, [0.5, 1.0], negative),
                        test("shear", RegionClass::CrossMode, Mode::SimpleShear, [0.0, 0.5], positive),
                    ],
                    Family::Pioletti,
                )
            }
        };
        ExperimentSpec {
            experiment: id,
            ground_truth,
            training,
            testing,
            baselines: Baselines {
                classical: true,
                conventional: Some(conventional),
            },
            alpha: DEFAULT_ALPHA,
            seed: 0,
            bounds: Bounds::default(),
            restarts: default_restarts(),
            constraint_points: None,
            output_dir: None,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            alpha: self.alpha,
            bounds: self.bounds,
            restarts: self.restarts,
            seed: self.seed,
            ..FitOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.training.validate("training grid")?;
        for t in &self.testing {
            t.grid.validate(&format!("testing grid `{}`", t.name))?;
            if t.class == RegionClass::Training {
                return Err(Error::InvalidInput(format!(
                    "testing grid `{}` cannot use the training class",
                    t.name
                )));
            }
        }
        let mut names: Vec<&str> = self.testing.iter().map(|t| t.name.as_str()).collect();
        names.push("training");
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("region names must be unique".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidInput("alpha must be non-negative".into()));
        }
        Ok(())
    }

    /// Copy of this spec whose training grid holds `size` records.
    ///
    /// Single-rate grids use `size` parameter values. Grids with a rate range
    /// keep the rate interval and factor `size = rates × values`, where the
    /// value count is `(n₀ − 1)k + 1` for the smallest `k ≥ 1` that divides
    /// `size` with a rate count between the original `r₀` and `r₀ + 2`.
    pub fn with_training_size(&self, size: usize) -> Result<Self> {
        let mut spec = self.clone();
        match &self.training.rates {
            Rates::Range { range, count: r0 } if *r0 > 1 => {
                let n0 = self.training.count;
                let mut k = 1;
                loop {
                    let values = (n0 - 1) * k + 1;
                    if values > size {
                        return Err(Error::InvalidInput(format!(
                            "size {size} cannot be split into {r0}..={} rates times a refinement of {n0} values",
                            r0 + 2
                        )));
                    }
                    if size % values == 0 {
                        let rates = size / values;
                        if (*r0..=r0 + 2).contains(&rates) {
                            spec.training.count = values;
                            spec.training.rates = Rates::Range {
                                range: *range,
                                count: rates,
                            };
                            break;
                        }
                    }
                    k += 1;
                }
            }
            _ => {
                let rates = self.training.rates.values().len();
                if size % rates != 0 || size / rates < 2 {
                    return Err(Error::InvalidInput(format!(
                        "size {size} is not a multiple of the {rates} training rates"
                    )));
                }
                spec.training.count = size / rates;
            }
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints_are_exact() {
        let v = linspace(0.75, 1.0, 26);
        assert_eq!(v.len(), 26);
        assert_eq!(v[0], 0.75);
        assert_eq!(v[25], 1.0);
        assert!((v[1] - 0.76).abs() < 1e-15);
    }

    #[test]
    fn dynamic_size_factorization() {
        let spec = ExperimentSpec::default_for(ExperimentId::Dynamic);
        let expect = [
            (155, 5, 31),
            (186, 6, 31),
            (217, 7, 31),
            (305, 5, 61),
            (366, 6, 61),
            (427, 7, 61),
            (455, 5, 91),
            (546, 6, 91),
            (637, 7, 91),
        ];
        for (size, rates, values) in expect {
            let s = spec.with_training_size(size).unwrap();
            assert_eq!(s.training.count, values, "size {size}");
            assert_eq!(s.training.rates.values().len(), rates, "size {size}");
            assert_eq!(s.training.len(), size);
        }
        assert!(spec.with_training_size(157).is_err());
    }

    #[test]
    fn static_size_override() {
        let spec = ExperimentSpec::default_for(ExperimentId::Hydrostatic);
        assert_eq!(spec.with_training_size(101).unwrap().training.count, 101);
    }

    #[test]
    fn spec_json_round_trip() {
        for id in ExperimentId::ALL {
            let spec = ExperimentSpec::default_for(id);
            let text = serde_json::to_string_pretty(&spec).unwrap();
            let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
            spec.validate().unwrap();
        }
    }

    #[test]
    fn experiment_names_parse() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("static".parse::<ExperimentId>().is_err());
    }
}
