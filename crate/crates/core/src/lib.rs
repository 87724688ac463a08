#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Execution simulator and certainty-equivalent reinforcement learning.
//!
//! - [`book`]: price-time priority matching engine.
//! - [`flow`]: zero-intelligence background order flow driving the book.
//! - [`env`]: parent-order execution environment with a VWAP-relative reward.
//! - [`cerl`]: utility functions, the certainty-equivalent operator, CE value
//!   iteration and CE Q-learning.
//! - [`hier`]: local policies composed by a lower-frequency meta policy.
//! - [`search`]: random search with successive halving.
//! - [`expctl`]: experiment configuration, orchestration and reporting.

pub mod book;
pub mod cerl;
pub mod env;
pub mod expctl;
pub mod flow;
pub mod hier;
pub mod rng;
pub mod search;
