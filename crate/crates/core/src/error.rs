use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),

    #[error("{model}: state outside model domain ({detail})")]
    Domain { model: &'static str, detail: String },

    #[error("calibration of {family} failed: {detail}")]
    Calibration { family: String, detail: String },

    #[error("coefficient extraction failed at record {index}: {detail}")]
    Extraction { index: usize, detail: String },

    #[error("gaussian process fit failed: {0}")]
    Fit(String),

    #[error("constrained fit infeasible: worst constraint {index} has value {value:e}")]
    Infeasible { index: usize, value: f64 },

    #[error("grid point {point}: {source}")]
    Generation {
        point: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("experiment `{experiment}`: {source}")]
    Experiment {
        experiment: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
