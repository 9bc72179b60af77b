//! Policy networks, losses, and the method registry.

pub mod losses;
pub mod methods;
pub mod network;

use thiserror::Error;

use crate::diffcore::DiffError;
use crate::envs::EnvError;
use crate::experts::ExpertError;

pub use losses::{
    advisor_weight, clip_schedule, evaluate_objective, gae_advantages, normalize_advantages, weight_fn, AdvisorParams,
    LossBatch, LossReport, Objective, RlTargets, Targets,
};
pub use methods::{stage_scheduler, MethodConfig, MethodId, Stage, StageLoss};
pub use network::{Architecture, Forward, NetSpec, Prepared, SeqBatch};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown method `{id}`; valid ids: {valid}")]
    UnknownMethod { id: String, valid: String },
}
