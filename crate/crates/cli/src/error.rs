use synwalk_core::env::EnvError;
use synwalk_core::evalbench::BenchError;
use synwalk_core::gaitdata::GaitError;
use synwalk_core::synergy::SynergyError;
use synwalk_core::trainer::TrainError;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<GaitError> for CliError {
    fn from(e: GaitError) -> Self {
        match e {
            GaitError::CutoffOutOfRange { .. } | GaitError::BadOrder(_) | GaitError::TooFewPoints(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynergyError> for CliError {
    fn from(e: SynergyError) -> Self {
        match e {
            SynergyError::KOutOfRange { .. } => CliError::Usage(e.to_string()),
            SynergyError::NonFinite { .. } | SynergyError::DegenerateComponent(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Diverged { .. } => CliError::Numerical(e.to_string()),
            EnvError::Config(_) | EnvError::Terrain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::NonFinite(_) => CliError::Numerical(e.to_string()),
            TrainError::Env(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Phases(_) => CliError::Usage(e.to_string()),
            BenchError::ZeroVariance | BenchError::ZeroBaseline { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
