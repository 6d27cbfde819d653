//! Experiment driver: configuration, the four run kinds, and their
//! machine-readable outputs.

pub mod commands;
pub mod config;

pub use commands::{
    build_composite, cmd_evolve, cmd_moments, cmd_predict, cmd_sample, EvolveOutput,
    EvolveReport, MomentsReport, PredictReport, SampleOutput,
};
pub use config::ExperimentConfig;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Core(#[from] typica::Error),
    #[error("numerical validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Core(_) => 2,
            Self::Validation(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(typica::Error::EmptySpectrum).exit_code(), 2);
        assert_eq!(CliError::Validation("drift".into()).exit_code(), 3);
    }
}
