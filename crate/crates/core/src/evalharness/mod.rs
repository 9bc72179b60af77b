//! Experiment orchestration: hyperparameter sampling, training runs,
//! validation, run records, and the expected-max-at-budget statistics.

pub mod config;
pub mod eval;
pub mod hps;
pub mod records;
pub mod stats;
pub mod trainer;

use thiserror::Error;

use crate::diffcore::DiffError;
use crate::envs::EnvError;
use crate::experts::{DemoError, ExpertError};
use crate::learners::LearnError;

pub use config::{HarnessConfig, OUT_ENV};
pub use eval::{assert_disjoint_seed_ranges, evaluate_policy, EvalMetrics, ExpertPolicy, GreedyPolicy, NetPolicy};
pub use hps::{sample_hps, HpSample};
pub use records::{
    best_validation, build_report, CurvePoint, read_run_record, write_run_record, Metric, MethodCurve, RunRecord, RunStatus,
    SweepReport, ValidationPoint, RECORD_SCHEMA,
};
pub use stats::{bootstrap_band, expected_max_ustat};
pub use trainer::{run_training, TrainOptions, TrainOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("run record: {0}")]
    Record(String),
}
