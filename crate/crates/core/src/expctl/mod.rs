//! Experiment configuration, orchestration and reporting.
//!
//! An experiment is a single JSON file. Each command reads it, writes its
//! outputs under `output_dir`, and finishes with a manifest listing the
//! config hash, the seeds and the SHA-256 of every file it produced. No
//! output depends on wall-clock time or OS entropy.
//!
//! Output layout:
//!
//! ```text
//! policies/options.json            trained option specs, in option order
//! policies/option_<i>_<name>.csv   option Q tables
//! policies/flat.csv                flat agent Q table
//! policies/selector.csv            meta selector
//! search/study.json                search checkpoint
//! search/ledger.csv                one row per trial per rung
//! evaluate/episodes.csv            one row per seed
//! evaluate/summary.csv             distribution summary
//! evaluate/traces/seed_<s>.csv     step traces
//! evaluate/trades/seed_<s>.csv     trade logs
//! simulate/seed_<s>/…              event log, trades and trace
//! manifest_<command>.json
//! ```

mod config;
mod replay;
mod report;
mod run;

pub use config::{
    load_config, AgentKind, Experiment, ExperimentConfig, SearchConfig, Seeds, TrainingConfig, SCHEMA_VERSION,
};
pub use replay::{read_trace, render_table, replay_rows, write_replay_csv, ReplayRow, REPLAY_HEADER};
pub use report::{percentile, write_episodes_csv, write_summary_csv, EpisodeReport, StudySummary};
pub use run::{
    load_agent, load_options, meta_space, run_evaluate, run_pipeline, run_replay, run_search_meta, run_simulate,
    run_train_local, template_env, Agent, ArtifactEntry, Evaluation, Layout, Manifest, MetaObjective, RunOptions,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config error at {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing {what}: {}", path.display())]
    MissingArtifact { path: PathBuf, what: String },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl ExpError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Config { .. } => 2,
            _ => 3,
        }
    }
}
