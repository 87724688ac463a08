use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{coarse_state, CoarseState, Deviation, HierError, LocalPolicy, SpreadBucket, N_BUCKETS};
use crate::env::{rollout, Decision, EnvError, Episode, ExecEnv, ExecPolicy, StepResult};

/// When the meta layer re-selects an option.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpochRule {
    /// Every `steps` base steps, regardless of the option.
    FixedSteps { steps: usize },
    /// When the active option's own termination fires or its local
    /// horizon is used up.
    OptionTermination,
}

/// Options plus a total map from coarse state to option index.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaPolicy {
    options: Vec<LocalPolicy>,
    selector: Vec<usize>,
    epoch_rule: EpochRule,
}

impl MetaPolicy {
    pub fn new(options: Vec<LocalPolicy>, selector: Vec<usize>, epoch_rule: EpochRule) -> Result<Self, HierError> {
        if options.is_empty() {
            return Err(HierError::InvalidMeta("no options".into()));
        }
        if selector.len() != N_BUCKETS {
            return Err(HierError::InvalidMeta(format!("selector has {} entries, expected {N_BUCKETS}", selector.len())));
        }
        if let Some(&o) = selector.iter().find(|&&o| o >= options.len()) {
            return Err(HierError::InvalidMeta(format!("selector names option {o} of {}", options.len())));
        }
        if epoch_rule == (EpochRule::FixedSteps { steps: 0 }) {
            return Err(HierError::InvalidMeta("fixed_steps epoch needs at least 1 step".into()));
        }
        Ok(Self { options, selector, epoch_rule })
    }

    /// Same option in every bucket.
    pub fn constant(options: Vec<LocalPolicy>, option: usize, epoch_rule: EpochRule) -> Result<Self, HierError> {
        Self::new(options, vec![option; N_BUCKETS], epoch_rule)
    }

    /// Selector that depends only on the (deviation, spread) part of the
    /// coarse state. `table[3 * spread + deviation]` with deviation ordered
    /// behind, on, ahead and spread ordered tight, wide.
    pub fn by_deviation_and_spread(
        options: Vec<LocalPolicy>,
        table: &[usize; 6],
        epoch_rule: EpochRule,
    ) -> Result<Self, HierError> {
        let selector = CoarseState::all()
            .map(|c| table[3 * c.spread as usize + c.deviation as usize])
            .collect();
        Self::new(options, selector, epoch_rule)
    }

    /// `when_behind` if the parent is behind schedule, else `otherwise`.
    pub fn behind_rule(
        options: Vec<LocalPolicy>,
        when_behind: usize,
        otherwise: usize,
        epoch_rule: EpochRule,
    ) -> Result<Self, HierError> {
        let selector =
            CoarseState::all().map(|c| if c.deviation == Deviation::Behind { when_behind } else { otherwise }).collect();
        Self::new(options, selector, epoch_rule)
    }

    pub fn options(&self) -> &[LocalPolicy] {
        &self.options
    }

    pub fn selector(&self) -> &[usize] {
        &self.selector
    }

    pub fn epoch_rule(&self) -> EpochRule {
        self.epoch_rule
    }

    pub fn select(&self, state: CoarseState) -> usize {
        self.selector[state.index()]
    }

    pub fn write_selector_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        write_selector_csv(&self.selector, out)
    }
}

#[derive(Serialize, Deserialize)]
struct SelectorRow {
    remaining_bin: u8,
    time_bin: u8,
    deviation: Deviation,
    spread: SpreadBucket,
    option: usize,
}

/// One row per bucket: `remaining_bin,time_bin,deviation,spread,option`.
pub fn write_selector_csv<W: Write>(selector: &[usize], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (c, &option) in CoarseState::all().zip(selector) {
        w.serialize(SelectorRow {
            remaining_bin: c.remaining_bin,
            time_bin: c.time_bin,
            deviation: c.deviation,
            spread: c.spread,
            option,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_selector_csv<R: Read>(input: R) -> Result<Vec<usize>, HierError> {
    let mut selector = vec![None; N_BUCKETS];
    let mut rdr = csv::Reader::from_reader(input);
    for row in rdr.deserialize() {
        let row: SelectorRow = row.map_err(|e| HierError::InvalidMeta(e.to_string()))?;
        if row.remaining_bin >= 4 || row.time_bin >= 4 {
            return Err(HierError::InvalidMeta("bin out of range".into()));
        }
        let c = CoarseState {
            remaining_bin: row.remaining_bin,
            time_bin: row.time_bin,
            deviation: row.deviation,
            spread: row.spread,
        };
        selector[c.index()] = Some(row.option);
    }
    selector
        .into_iter()
        .enumerate()
        .map(|(i, o)| o.ok_or_else(|| HierError::InvalidMeta(format!("bucket {i} missing from selector"))))
        .collect()
}

/// Meta policy plus rollout state. Implements [`ExecPolicy`].
#[derive(Clone, Debug)]
pub struct HierarchicalAgent {
    meta: MetaPolicy,
    active: Option<usize>,
    steps_in_option: usize,
    start_deviation: Deviation,
    last_step_filled: bool,
    switches: usize,
}

impl HierarchicalAgent {
    pub fn new(meta: MetaPolicy) -> Self {
        Self {
            meta,
            active: None,
            steps_in_option: 0,
            start_deviation: Deviation::On,
            last_step_filled: false,
            switches: 0,
        }
    }

    pub fn meta(&self) -> &MetaPolicy {
        &self.meta
    }

    pub fn active_option(&self) -> Option<usize> {
        self.active
    }

    pub fn steps_in_option(&self) -> usize {
        self.steps_in_option
    }

    fn epoch_over(&self, now: CoarseState) -> bool {
        let Some(active) = self.active else { return true };
        match self.meta.epoch_rule {
            EpochRule::FixedSteps { steps } => self.steps_in_option >= steps,
            EpochRule::OptionTermination => {
                let spec = &self.meta.options[active].spec;
                self.steps_in_option >= spec.local_horizon
                    || spec.termination.fires(
                        self.steps_in_option,
                        self.last_step_filled,
                        self.start_deviation,
                        now.deviation,
                    )
            }
        }
    }
}

impl ExecPolicy for HierarchicalAgent {
    fn begin_episode(&mut self, _seed: u64) {
        self.active = None;
        self.steps_in_option = 0;
        self.last_step_filled = false;
        self.switches = 0;
    }

    fn decide(&mut self, env: &ExecEnv) -> Decision {
        let state = coarse_state(&env.observe());
        if self.epoch_over(state) {
            let next = self.meta.select(state);
            if self.active.is_some_and(|a| a != next) {
                self.switches += 1;
            }
            self.active = Some(next);
            self.steps_in_option = 0;
            self.start_deviation = state.deviation;
        }
        let option = self.active.expect("selected above");
        self.steps_in_option += 1;
        Decision { action: self.meta.options[option].act(state), option: Some(option) }
    }

    fn observe(&mut self, result: &StepResult) {
        self.last_step_filled = result.info.filled_this_step > 0;
    }

    fn option_switches(&self) -> Option<usize> {
        Some(self.switches)
    }
}

/// Run one episode under the hierarchical agent. The trace's `option`
/// column records the active option per step.
pub fn run_hierarchical(env: &mut ExecEnv, agent: &mut HierarchicalAgent, seed: u64) -> Result<Episode, EnvError> {
    rollout(env, seed, agent)
}
