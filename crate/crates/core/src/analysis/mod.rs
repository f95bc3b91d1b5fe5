//! Exact oracle, Monte Carlo validation, parameter scans, comparison
//! reports and their tabular output.

pub mod monte_carlo;
pub mod oracle;
pub mod output;
pub mod report;
pub mod scan;
pub mod verify;

use thiserror::Error;

use crate::gbs::GbsError;
use crate::protocol::ProtocolError;
use crate::quantum::QuantumError;

pub use monte_carlo::{monte_carlo, Statistic, TrialStats};
pub use oracle::{exhaustive_oracle, Branch, Eavesdropper, EveBranch, OracleDistribution};
pub use report::{compare_report, ComparisonReport, ReportRow, SIGMA_POLICY};
pub use scan::{scan, Axis, GridSpec, ScanPoint, ScanResult};
pub use verify::{verify, Check, ReferenceValues, VerifyOptions, VerifyReport};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("oracle branch space too large: {params} channel parameters and {pool} guesses, at most {max} each")]
    OracleOverflow {
        params: usize,
        pool: usize,
        max: usize,
    },
    #[error("mismatched parameter points: {0}")]
    MismatchedParameters(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Gbs(#[from] GbsError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}
