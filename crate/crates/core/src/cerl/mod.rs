//! Certainty-equivalent reinforcement learning.
//!
//! Actions are ranked by `CE(X) = U⁻¹(E[U(X)])` rather than by expectation.
//! The Bellman recursion nests the operator one step at a time:
//!
//! ```text
//! CE(s, a) = U⁻¹ E[ U( r + max_a' CE(s', a') ) ]
//! ```
//!
//! With the identity utility everything here reduces to its classical
//! counterpart.

mod delay;
mod mdp;
mod qlearn;
mod utility;

pub use delay::delayed_reward_ce;
pub use mdp::{ce_value_iteration, ce_value_iteration_with, CeSolution, FiniteMdp, Stage, ViOptions};
pub use qlearn::{
    ce_q_learning, ce_q_learning_from, episode_seed, DiscreteEnv, Exploration, LearningRate, QLearningConfig, QTable, Transition,
};
pub use utility::{ce, Affine, Utility, UtilityFn, EXP_SAFE_RANGE};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CerlError {
    #[error("value {value} outside the domain of {utility:?}")]
    Domain { value: f64, utility: UtilityFn },
    #[error("invalid outcome distribution: {0}")]
    InvalidDist(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("environment error: {0}")]
    Env(String),
}

/// Finite distribution of scalar outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDist {
    outcomes: Vec<(f64, f64)>,
}

impl OutcomeDist {
    /// `(value, prob)` pairs; probabilities must be positive and sum to 1
    /// within 1e-12.
    pub fn new(outcomes: Vec<(f64, f64)>) -> Result<Self, CerlError> {
        if outcomes.is_empty() {
            return Err(CerlError::InvalidDist("empty".into()));
        }
        if let Some(&(v, p)) = outcomes.iter().find(|&&(v, p)| !(p > 0.0) || !v.is_finite()) {
            return Err(CerlError::InvalidDist(format!("bad outcome ({v}, {p})")));
        }
        let total: f64 = outcomes.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CerlError::InvalidDist(format!("probabilities sum to {total}")));
        }
        Ok(Self { outcomes })
    }

    pub fn point(value: f64) -> Self {
        Self { outcomes: vec![(value, 1.0)] }
    }

    pub fn outcomes(&self) -> &[(f64, f64)] {
        &self.outcomes
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|&(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.outcomes.iter().map(|&(v, p)| p * (v - m).powi(2)).sum()
    }

    /// Same probabilities, every value shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self { outcomes: self.outcomes.iter().map(|&(v, p)| (v + c, p)).collect() }
    }
}
