//! Command-line front end for `pdarcy-core`: TOML run configs, mesh and
//! VTK/CSV writers, and the `mesh-gen`, `check-data`, `solve`,
//! `study-positivity` and `study-convergence` commands.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use pdarcy_core::driver::{DataReport, DriverError};
use pdarcy_core::linalg::LinalgError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sign conditions violated: {0}")]
    DataConditions(DataReport),
    #[error(transparent)]
    Driver(DriverError),
}

impl CliError {
    /// 0 success, 1 usage/config, 2 data conditions, 3 positivity guard,
    /// 4 solver non-convergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::DataConditions(_) => 2,
            CliError::Driver(e) => match e {
                DriverError::DataConditions(_) => 2,
                DriverError::NonPositiveQ { .. } => 3,
                DriverError::Solver { source, .. } => match source {
                    LinalgError::NotConverged { .. }
                    | LinalgError::SingularPivot { .. }
                    | LinalgError::NonPositiveDiagonal { .. }
                    | LinalgError::NotSymmetric { .. } => 4,
                    _ => 1,
                },
                DriverError::InvalidProblem(_) | DriverError::Assembly { .. } => 1,
            },
        }
    }
}

impl From<DriverError> for CliError {
    fn from(e: DriverError) -> Self {
        CliError::Driver(e)
    }
}
