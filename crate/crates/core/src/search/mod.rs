//! Gradient-free search over agent parameters with successive halving.
//!
//! Every random quantity in a study is derived from the study seed and the
//! trial and rung indices, so results do not depend on how many workers run
//! the trials or in what order they finish.

mod halving;
mod space;

pub use halving::{
    estimate, run_trial, run_trial_samples, successive_halving, trial_episode_seed, write_ledger_csv, HalvingConfig,
    LedgerRow, Objective, StudyOptions, StudyResult, Trial, TrialStatus,
};
pub use space::{sample_params, Dim, ParamSpace, ParamValue, Point};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid halving config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("every trial failed by rung {rung}")]
    AllTrialsFailed { rung: usize },
    #[error("study stopped after {completed_rungs} rungs")]
    Interrupted { completed_rungs: usize },
}
