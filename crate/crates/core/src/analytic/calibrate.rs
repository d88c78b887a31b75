use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{stress, HyperelasticModel, Model, ViscousModel, VolumetricModel};
use crate::continuum::{DeformationState, PINV_CUTOFF};
use crate::error::{Error, Result};
use crate::linalg::{min_norm_lstsq, null_space};
use crate::tensor::SymTensor3;

/// Model families that can be fitted to stress data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    SimoMiehe,
    VolNeoHookean,
    VolOgden,
    NeoHookean,
    MooneyRivlin,
    GeneralizedRivlin,
    Yeoh,
    Gent,
    GentGent,
    Pioletti,
    GeneralizedPioletti,
    #[serde(rename = "USS")]
    Uss,
}

impl Family {
    pub const ALL: [Family; 12] = [
        Family::SimoMiehe,
        Family::VolNeoHookean,
        Family::VolOgden,
        Family::NeoHookean,
        Family::MooneyRivlin,
        Family::GeneralizedRivlin,
        Family::Yeoh,
        Family::Gent,
        Family::GentGent,
        Family::Pioletti,
        Family::GeneralizedPioletti,
        Family::Uss,
    ];

    /// Names of the parameters that enter the stress linearly.
    pub fn linear_params(self) -> &'static [&'static str] {
        match self {
            Family::SimoMiehe | Family::VolNeoHookean | Family::VolOgden => &["kappa"],
            Family::NeoHookean => &["a10"],
            Family::MooneyRivlin => &["a10", "a01"],
            Family::GeneralizedRivlin => &["a10", "a01", "a11"],
            Family::Yeoh => &["c1", "c2"],
            Family::Gent => &["mu"],
            Family::GentGent => &["mu", "c2"],
            Family::Pioletti => &["eta_prime"],
            Family::GeneralizedPioletti => &["eta"],
            Family::Uss => &["k11", "k21"],
        }
    }

    /// Candidate values of the single nonlinear exponent, if the family has one.
    fn exponent_grid(self) -> Option<Vec<f64>> {
        let linspace = |a: f64, b: f64, n: usize| -> Vec<f64> {
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        match self {
            // β = 0 is excluded from the Ogden grid
            Family::VolOgden => Some(
                linspace(-8.0, 8.0, 161)
                    .into_iter()
                    .filter(|b| b.abs() > 1e-9)
                    .collect(),
            ),
            Family::Gent | Family::GentGent => Some(
                (0..=120).map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 120.0)).collect(),
            ),
            Family::GeneralizedPioletti => Some(linspace(0.05, 4.0, 80)),
            Family::Uss => Some(linspace(0.01, 1.0, 100)),
            _ => None,
        }
    }

    fn build(self, p: &[f64], exponent: f64) -> Model {
        match self {
            Family::SimoMiehe => VolumetricModel::SimoMiehe { kappa: p[0] }.into(),
            Family::VolNeoHookean => VolumetricModel::VolNeoHookean { kappa: p[0] }.into(),
            Family::VolOgden => VolumetricModel::VolOgden { kappa: p[0], beta: exponent }.into(),
            Family::NeoHookean => HyperelasticModel::NeoHookean { a10: p[0] }.into(),
            Family::MooneyRivlin => HyperelasticModel::MooneyRivlin { a10: p[0], a01: p[1] }.into(),
            Family::GeneralizedRivlin => HyperelasticModel::GeneralizedRivlin {
                a10: p[0],
                a01: p[1],
                a11: p[2],
            }
            .into(),
            Family::Yeoh => HyperelasticModel::Yeoh { c1: p[0], c2: p[1] }.into(),
            Family::Gent => HyperelasticModel::Gent { mu: p[0], jm: exponent }.into(),
            Family::GentGent => HyperelasticModel::GentGent {
                mu: p[0],
                jm: exponent,
                c2: p[1],
            }
            .into(),
            Family::Pioletti => ViscousModel::Pioletti { eta_prime: p[0] }.into(),
            Family::GeneralizedPioletti => ViscousModel::GeneralizedPioletti {
                eta: p[0],
                beta: exponent,
            }
            .into(),
            Family::Uss => ViscousModel::Uss {
                k11: p[0],
                k21: p[1],
                c21: exponent,
            }
            .into(),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidInput(format!("unknown model family `{s}`")))
    }
}

/// Full-tensor Frobenius rows: off-diagonal Voigt entries carry weight √2.
fn frobenius_rows(s: &SymTensor3) -> [f64; 6] {
    let w = std::f64::consts::SQRT_2;
    let v = s.0;
    [v[0], v[1], v[2], w * v[3], w * v[4], w * v[5]]
}

struct LinearFit {
    params: Vec<f64>,
    sse: f64,
}

fn fit_linear(
    family: Family,
    exponent: f64,
    data: &[(DeformationState, SymTensor3)],
) -> Result<LinearFit> {
    let names = family.linear_params();
    let n = names.len();
    let mut a = DMatrix::zeros(6 * data.len(), n);
    let mut b = DVector::zeros(6 * data.len());
    for (r, (state, target)) in data.iter().enumerate() {
        for k in 0..n {
            let mut unit = vec![0.0; n];
            unit[k] = 1.0;
            let col = frobenius_rows(&stress(&family.build(&unit, exponent), state)?);
            for (i, v) in col.iter().enumerate() {
                a[(6 * r + i, k)] = *v;
            }
        }
        for (i, v) in frobenius_rows(target).iter().enumerate() {
            b[6 * r + i] = *v;
        }
    }
    let (x, rank) = min_norm_lstsq(&a, &b, PINV_CUTOFF);
    if rank < n {
        let dirs: Vec<String> = null_space(&a, PINV_CUTOFF)
            .iter()
            .map(|v| {
                let terms: Vec<String> = names
                    .iter()
                    .zip(v.iter())
                    .filter(|(_, c)| c.abs() > 1e-12)
                    .map(|(name, c)| format!("{c:+.3}·{name}"))
                    .collect();
                terms.join(" ")
            })
            .collect();
        return Err(Error::Calibration {
            family: format!("{family:?}"),
            detail: format!("rank {rank} < {n}; unidentifiable directions: [{}]", dirs.join("], [")),
        });
    }
    let sse = (&a * &x - &b).norm_squared();
    Ok(LinearFit {
        params: x.iter().copied().collect(),
        sse,
    })
}

/// Least-squares fit of a model family to `(state, stress)` pairs.
///
/// Linear parameters are solved exactly; families with a nonlinear exponent
/// scan a fixed grid and refine the best bracket by golden-section search.
pub fn calibrate(family: Family, data: &[(DeformationState, SymTensor3)]) -> Result<Model> {
    if data.is_empty() {
        return Err(Error::Calibration {
            family: format!("{family:?}"),
            detail: "empty dataset".into(),
        });
    }
    let Some(grid) = family.exponent_grid() else {
        let fit = fit_linear(family, 0.0, data)?;
        return Ok(family.build(&fit.params, 0.0));
    };

    let sse_at = |e: f64| -> f64 {
        match fit_linear(family, e, data) {
            Ok(fit) if fit.sse.is_finite() => fit.sse,
            _ => f64::INFINITY,
        }
    };
    let scores: Vec<f64> = grid.iter().map(|&e| sse_at(e)).collect();
    let (best, best_sse) = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &s)| (i, s))
        .expect("grid is non-empty");
    if !best_sse.is_finite() {
        // surface the error from the first grid point for diagnosis
        let err = fit_linear(family, grid[0], data).err();
        return Err(Error::Calibration {
            family: format!("{family:?}"),
            detail: format!(
                "no admissible exponent on the search grid ({})",
                err.map(|e| e.to_string()).unwrap_or_default()
            ),
        });
    }

    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (sse_at(x1), sse_at(x2));
    for _ in 0..60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = sse_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = sse_at(x2);
        }
    }
    let mut exponent = 0.5 * (lo + hi);
    if !(sse_at(exponent) <= best_sse) {
        exponent = grid[best];
    }
    let fit = fit_linear(family, exponent, data)?;
    Ok(family.build(&fit.params, exponent))
}
