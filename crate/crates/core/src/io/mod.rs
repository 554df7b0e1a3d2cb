//! Scenario files, synthetic scenarios and result bundles.

mod bundle;
mod scenario;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelError;

pub use bundle::{write_bundle, BundleSummary};
pub use scenario::{load_scenario, parse_scenario, save_scenario, scenario_to_toml, DemandSource};
pub use synth::{synth_scenario, SynthSizes};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },
    #[error("dimension error in table {table}: {message}")]
    Dimension { table: String, message: String },
    #[error("refusing to write bundle: {count} invariant violations, first: {first}")]
    InvariantViolation { count: usize, first: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ModelError> for IoError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Schema { path, message } => IoError::Schema {
                field: path,
                message,
            },
            other => IoError::Schema {
                field: "scenario".into(),
                message: other.to_string(),
            },
        }
    }
}
