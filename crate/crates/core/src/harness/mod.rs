//! Running estimators on scenarios and comparing them.

pub mod csv_io;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod table1;
pub mod trace;

use thiserror::Error;

use crate::observers::ObserverError;
use crate::scenario::{EstimatorKind, ScenarioError};

pub use csv_io::{csv_header, read_trace_csv, write_trace_csv};
pub use metrics::{attack_rmse, convergence_threshold, convergence_time, rmse, FINAL_WINDOW};
pub use report::{summarize, ComparisonReport, EstimatorSummary};
pub use runner::{read_run_dir, report_from_dir, run_estimators, run_scenario, write_run, RunOutput, TIMING_REPEATS};
pub use table1::{
    adversarial_xhat0, run_suite, runtime_ordering, table1_check, RuntimeOrdering, Table1, Tolerance, Variant,
};
pub use trace::{Divergence, EstimateTrace, TraceRecorder, DIVERGENCE_NORM};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no samples in window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },
    #[error("no traces found")]
    NoTraces,
    #[error("estimator {0} appears more than once")]
    DuplicateEstimator(EstimatorKind),
    #[error("scenario variant `{0}` has not been run")]
    MissingScenario(String),
    #[error("csv {path}: {reason}")]
    Csv { path: String, reason: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("synthesis of {kind} gains: {source}")]
    Synthesis { kind: EstimatorKind, source: ObserverError },
    #[error("all estimators diverged")]
    AllDiverged,
}

impl HarnessError {
    /// Process exit code for the command line: 1 configuration or I/O,
    /// 2 infeasible synthesis, 3 every estimator diverged.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Synthesis { .. } => 2,
            HarnessError::AllDiverged => 3,
            _ => 1,
        }
    }
}
