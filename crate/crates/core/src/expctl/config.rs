use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExpError;
use crate::cerl::{QLearningConfig, UtilityFn};
use crate::env::{EnvConfig, ParentOrder};
use crate::flow::FlowConfig;
use crate::hier::{EpochRule, LocalPolicySpec};
use crate::search::HalvingConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    PovBaseline,
    FlatCerl,
    Hierarchical,
    Random,
}

impl AgentKind {
    pub fn name(&self) -> &'static str {
        match self {
            AgentKind::PovBaseline => "pov_baseline",
            AgentKind::FlatCerl => "flat_cerl",
            AgentKind::Hierarchical => "hierarchical",
            AgentKind::Random => "random",
        }
    }
}

/// Evaluation seeds: an explicit list or `count` consecutive values from
/// `base`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { base: u64, count: u64 },
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { base, count } => (0..*count).map(|i| base + i).collect(),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Range { base: 0, count: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Options trained by `train-local`, in option-index order.
    pub options: Vec<LocalPolicySpec>,
    /// Q-learning settings for each option.
    pub local: QLearningConfig,
    /// Q-learning settings for the flat agent.
    pub flat: QLearningConfig,
    /// When the hierarchical agent re-selects an option.
    pub epoch_rule: EpochRule,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            options: vec![LocalPolicySpec::passive_placer(), LocalPolicySpec::aggressive_taker()],
            local: QLearningConfig::default(),
            flat: QLearningConfig::default(),
            epoch_rule: EpochRule::OptionTermination,
        }
    }
}

/// Successive-halving settings for the meta selector search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub n_initial: usize,
    #[serde(default = "default_reduction")]
    pub reduction_factor: usize,
    pub rungs: usize,
    pub episodes_per_rung: Vec<u64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_reduction() -> usize {
    4
}

impl SearchConfig {
    pub fn halving(&self) -> HalvingConfig {
        HalvingConfig {
            n_initial: self.n_initial,
            reduction_factor: self.reduction_factor,
            rungs: self.rungs,
            episodes_per_rung: self.episodes_per_rung.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub parent: ParentOrder,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default = "identity")]
    pub utility: UtilityFn,
    #[serde(default = "default_agent")]
    pub agent: AgentKind,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn identity() -> UtilityFn {
    UtilityFn::Identity
}

fn default_agent() -> AgentKind {
    AgentKind::PovBaseline
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Check every cross-field constraint, naming the offending field.
    pub fn validate(&self) -> Result<(), ExpError> {
        let invalid = |field: &str, reason: String| ExpError::Config { field: field.into(), reason };
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        self.flow
            .validate()
            .map_err(|e| invalid(&format!("flow.{}", e.field), e.reason.clone()))?;
        self.parent.validate().map_err(|e| env_field("parent", e))?;
        self.env.validate().map_err(|e| env_field("env", e))?;
        self.utility.validate().map_err(|e| invalid("utility", e.to_string()))?;
        for (i, spec) in self.training.options.iter().enumerate() {
            spec.validate().map_err(|e| invalid(&format!("training.options[{i}]"), e.to_string()))?;
        }
        if let EpochRule::FixedSteps { steps: 0 } = self.training.epoch_rule {
            return Err(invalid("training.epoch_rule.steps", "must be at least 1".into()));
        }
        if let Some(search) = &self.search {
            search.halving().validate().map_err(|e| invalid("search", e.to_string()))?;
        }
        if self.seeds.to_vec().is_empty() {
            return Err(invalid("seeds", "must not be empty".into()));
        }
        Ok(())
    }
}

fn env_field(section: &str, e: crate::env::EnvError) -> ExpError {
    match e {
        crate::env::EnvError::InvalidConfig { field, reason } => {
            ExpError::Config { field: format!("{section}.{field}"), reason }
        }
        other => ExpError::Config { field: section.into(), reason: other.to_string() },
    }
}

/// A validated config together with the SHA-256 of the bytes it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub config_sha256: String,
}

impl Experiment {
    pub fn from_json(text: &str) -> Result<Self, ExpError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ExpError::Config {
                field: if field == "." { "(root)".into() } else { field },
                reason: format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            }
        })?;
        config.validate()?;
        Ok(Self { config, config_sha256: hex::encode(Sha256::digest(text.as_bytes())) })
    }

    /// Use an in-memory config; the hash covers its canonical JSON form.
    pub fn from_config(config: ExperimentConfig) -> Result<Self, ExpError> {
        config.validate()?;
        let bytes = serde_json::to_vec(&config).expect("config serializes");
        Ok(Self { config, config_sha256: hex::encode(Sha256::digest(&bytes)) })
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.config.output_dir = dir.into();
        self
    }
}

pub fn load_config(path: &Path) -> Result<Experiment, ExpError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ExpError::Config { field: "(file)".into(), reason: format!("{}: {e}", path.display()) })?;
    Experiment::from_json(&text)
}
