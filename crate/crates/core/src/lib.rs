//! Laboratory for the imitation gap: privileged-expert tasks, adaptive
//! imitation/RL loss weighting (ADVISOR), PPO and imitation baselines, and a
//! budget-aware hyperparameter evaluation harness.

pub mod diffcore;
pub mod envs;
pub mod experts;
pub mod learners;
pub mod evalharness;
pub mod rollout;
