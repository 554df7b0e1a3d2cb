use shipems::horizon::HorizonError;
use shipems::io::IoError;
use shipems::model::ModelError;
use shipems::tuner::TunerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Horizon(#[from] HorizonError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
}

/// Process exit codes, one per error class.
pub mod code {
    pub const USAGE: u8 = 2;
    pub const PARSE: u8 = 3;
    pub const SCHEMA: u8 = 4;
    pub const DIMENSION: u8 = 5;
    pub const IO: u8 = 6;
    pub const INFEASIBLE: u8 = 7;
    pub const SOLVER: u8 = 8;
    pub const INVARIANT: u8 = 9;
    pub const TUNER: u8 = 10;
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => code::USAGE,
            CliError::Io(e) => match e {
                IoError::Parse { .. } => code::PARSE,
                IoError::Schema { .. } => code::SCHEMA,
                IoError::Dimension { .. } => code::DIMENSION,
                IoError::Io { .. } | IoError::Serialize(_) => code::IO,
                IoError::InvariantViolation { .. } => code::INVARIANT,
            },
            CliError::Horizon(e) => match e {
                HorizonError::Model(m) => model_code(m),
                HorizonError::BadHorizon { .. } => code::USAGE,
                HorizonError::Infeasible | HorizonError::ZeroDenominator => code::INFEASIBLE,
                HorizonError::TimedOut | HorizonError::Solver(_) => code::SOLVER,
            },
            CliError::Model(m) => model_code(m),
            CliError::Tuner(_) => code::TUNER,
        }
    }
}

fn model_code(m: &ModelError) -> u8 {
    match m {
        ModelError::Schema { .. } | ModelError::InvalidStepSize(_) => code::SCHEMA,
        ModelError::EmptyHorizon(_) => code::USAGE,
        ModelError::DecodeMismatch(_) => code::SOLVER,
        _ => code::INFEASIBLE,
    }
}
