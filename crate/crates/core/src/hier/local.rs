use serde::{Deserialize, Serialize};

use super::{coarse_state, CoarseState, Deviation, HierError, N_BUCKETS};
use crate::cerl::{ce_q_learning, CerlError, DiscreteEnv, QLearningConfig, QTable, Transition, UtilityFn};
use crate::env::{
    aggressive_subspace, passive_subspace, Decision, ExecEnv, ExecPolicy, StepResult, N_ACTIONS,
};
use crate::rng::{derive_key, CounterRng};

/// Short-term objective an option is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalReward {
    /// `sign · (mid_at_decision − price) · qty / total_qty` over every fill.
    FillPriceVsMidAtDecision,
    /// The same, counting passive fills only.
    SpreadCapture,
    /// Reduction of `|participation − pov_target|` over the step.
    ScheduleTracking,
}

impl LocalReward {
    /// Reward for one step given the participation before it.
    pub fn score(&self, env: &ExecEnv, result: &StepResult, participation_before: f64) -> f64 {
        let info = &result.info;
        let sign = env.parent().side.sign();
        let total = env.parent().total_qty as f64;
        let vs_mid = |passive_only: bool| {
            info.fills
                .iter()
                .filter(|f| f.passive || !passive_only)
                .map(|f| sign * (info.mid_at_decision - f.price as f64) * f.qty as f64 / total)
                .sum::<f64>()
        };
        match self {
            LocalReward::FillPriceVsMidAtDecision => vs_mid(false),
            LocalReward::SpreadCapture => vs_mid(true),
            LocalReward::ScheduleTracking => {
                let target = env.parent().pov_target;
                (participation_before - target).abs() - (info.participation_so_far - target).abs()
            }
        }
    }
}

/// When an active option hands control back.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Termination {
    FixedSteps { steps: usize },
    /// After the first step with an agent fill.
    OnFill,
    /// Once the schedule-deviation bucket differs from the one the option
    /// started in.
    OnScheduleBandExit,
}

impl Termination {
    pub fn fires(&self, steps_in_option: usize, last_step_filled: bool, start: Deviation, now: Deviation) -> bool {
        match *self {
            Termination::FixedSteps { steps } => steps_in_option >= steps,
            Termination::OnFill => last_step_filled,
            Termination::OnScheduleBandExit => start != now,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalPolicySpec {
    pub name: String,
    /// Indices into [`crate::env::enumerate_actions`].
    pub action_subspace: Vec<usize>,
    pub local_reward: LocalReward,
    pub local_horizon: usize,
    pub termination: Termination,
}

impl LocalPolicySpec {
    /// Passive placement, cancel and no-op, rewarded for spread capture.
    pub fn passive_placer() -> Self {
        Self {
            name: "passive_placer".into(),
            action_subspace: passive_subspace(),
            local_reward: LocalReward::SpreadCapture,
            local_horizon: 10,
            termination: Termination::OnFill,
        }
    }

    /// Aggressive takes and no-op, rewarded for tracking the participation
    /// target.
    pub fn aggressive_taker() -> Self {
        Self {
            name: "aggressive_taker".into(),
            action_subspace: aggressive_subspace(),
            local_reward: LocalReward::ScheduleTracking,
            local_horizon: 5,
            termination: Termination::OnScheduleBandExit,
        }
    }

    pub fn validate(&self) -> Result<(), HierError> {
        let bad = |reason: String| Err(HierError::InvalidSpec { name: self.name.clone(), reason });
        if self.action_subspace.is_empty() {
            return bad("action_subspace is empty".into());
        }
        if let Some(&a) = self.action_subspace.iter().find(|&&a| a >= N_ACTIONS) {
            return bad(format!("action {a} is not in 0..{N_ACTIONS}"));
        }
        let mut sorted = self.action_subspace.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.action_subspace.len() {
            return bad("action_subspace has duplicates".into());
        }
        if self.local_horizon == 0 {
            return bad("local_horizon must be at least 1".into());
        }
        if self.termination == (Termination::FixedSteps { steps: 0 }) {
            return bad("fixed_steps termination needs at least 1 step".into());
        }
        Ok(())
    }

    fn check_compatible(&self, env: &ExecEnv) -> Result<(), HierError> {
        if self.local_reward == LocalReward::ScheduleTracking && env.parent().pov_target <= 0.0 {
            return Err(HierError::Incompatible(format!(
                "{}: schedule_tracking needs a positive parent.pov_target",
                self.name
            )));
        }
        Ok(())
    }
}

/// What a [`CoarseEnv`] pays per step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardSource {
    Env,
    Local(LocalReward),
}

/// An [`ExecEnv`] seen through [`coarse_state`] with actions restricted to
/// a subspace, as a [`DiscreteEnv`] for tabular learning.
///
/// With warm-up enabled, each episode first plays a random number of steps
/// (each a no-op or a uniformly random action) so that training starts
/// from varied points of the parent order.
#[derive(Clone, Debug)]
pub struct CoarseEnv {
    env: ExecEnv,
    subspace: Vec<usize>,
    reward: RewardSource,
    horizon: Option<usize>,
    termination: Option<Termination>,
    warmup: bool,
    steps: usize,
    start: Deviation,
}

impl CoarseEnv {
    /// Full action set, env reward, episodes run to the parent horizon.
    pub fn flat(env: ExecEnv) -> Self {
        Self {
            env,
            subspace: (0..N_ACTIONS).collect(),
            reward: RewardSource::Env,
            horizon: None,
            termination: None,
            warmup: false,
            steps: 0,
            start: Deviation::On,
        }
    }

    pub fn for_option(env: ExecEnv, spec: &LocalPolicySpec) -> Self {
        Self {
            env,
            subspace: spec.action_subspace.clone(),
            reward: RewardSource::Local(spec.local_reward),
            horizon: Some(spec.local_horizon),
            termination: Some(spec.termination),
            warmup: true,
            steps: 0,
            start: Deviation::On,
        }
    }

    pub fn env(&self) -> &ExecEnv {
        &self.env
    }

    fn state(&self) -> CoarseState {
        coarse_state(&self.env.observe())
    }

    fn warm_up(&mut self, seed: u64) -> Result<(), CerlError> {
        let horizon = self.env.parent().horizon as u64;
        for attempt in 0u64.. {
            let episode_seed = if attempt == 0 { seed } else { derive_key(&[seed, attempt]) };
            self.env.reset(episode_seed).map_err(env_err)?;
            let mut rng = CounterRng::keyed(&[episode_seed, 0x3A4]);
            let len = rng.below(horizon);
            for _ in 0..len {
                let action = if rng.open01() < 0.5 { 0 } else { rng.below(N_ACTIONS as u64) as usize };
                self.env.step(action).map_err(env_err)?;
                if self.env.is_done() {
                    break;
                }
            }
            if !self.env.is_done() {
                break;
            }
        }
        Ok(())
    }
}

fn env_err(e: crate::env::EnvError) -> CerlError {
    CerlError::Env(e.to_string())
}

impl DiscreteEnv for CoarseEnv {
    fn n_states(&self) -> usize {
        N_BUCKETS
    }

    fn n_actions(&self) -> usize {
        self.subspace.len()
    }

    fn reset(&mut self, seed: u64) -> Result<usize, CerlError> {
        if self.warmup {
            self.warm_up(seed)?;
        } else {
            self.env.reset(seed).map_err(env_err)?;
        }
        self.steps = 0;
        let s = self.state();
        self.start = s.deviation;
        Ok(s.index())
    }

    fn step(&mut self, action: usize) -> Result<Transition, CerlError> {
        let full = *self
            .subspace
            .get(action)
            .ok_or_else(|| CerlError::InvalidArgument(format!("action {action} outside the subspace")))?;
        let before = self.env.participation();
        let result = self.env.step(full).map_err(env_err)?;
        self.steps += 1;
        let reward = match self.reward {
            RewardSource::Env => result.reward,
            RewardSource::Local(kind) => kind.score(&self.env, &result, before),
        };
        let s = self.state();
        let truncated = self.horizon.is_some_and(|h| self.steps >= h)
            || self.termination.is_some_and(|t| {
                t.fires(self.steps, result.info.filled_this_step > 0, self.start, s.deviation)
            });
        Ok(Transition { reward, next_state: s.index(), done: result.done || truncated })
    }
}

/// A trained option: greedy over its table, mapped back to full action
/// indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPolicy {
    pub spec: LocalPolicySpec,
    pub table: QTable,
}

impl LocalPolicy {
    pub fn new(spec: LocalPolicySpec, table: QTable) -> Result<Self, HierError> {
        spec.validate()?;
        if table.n_states() != N_BUCKETS || table.n_actions() != spec.action_subspace.len() {
            return Err(HierError::Incompatible(format!(
                "{}: table is {}x{}, expected {}x{}",
                spec.name,
                table.n_states(),
                table.n_actions(),
                N_BUCKETS,
                spec.action_subspace.len()
            )));
        }
        Ok(Self { spec, table })
    }

    pub fn act(&self, state: CoarseState) -> usize {
        self.spec.action_subspace[self.table.greedy(state.index())]
    }
}

impl ExecPolicy for LocalPolicy {
    fn decide(&mut self, env: &ExecEnv) -> Decision {
        Decision::flat(self.act(coarse_state(&env.observe())))
    }
}

/// Train one option with CE Q-learning on its local reward. `template`
/// supplies the market and parent configuration; its state is not used.
pub fn train_local(
    template: &ExecEnv,
    spec: &LocalPolicySpec,
    u: &UtilityFn,
    cfg: &QLearningConfig,
) -> Result<LocalPolicy, HierError> {
    spec.validate()?;
    spec.check_compatible(template)?;
    let mut env = CoarseEnv::for_option(template.clone(), spec);
    let table = ce_q_learning(&mut env, u, cfg)?;
    LocalPolicy::new(spec.clone(), table)
}

/// Greedy policy over the full action set on coarse states.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatCePolicy {
    pub table: QTable,
}

impl FlatCePolicy {
    pub fn new(table: QTable) -> Result<Self, HierError> {
        if table.n_states() != N_BUCKETS || table.n_actions() != N_ACTIONS {
            return Err(HierError::Incompatible(format!(
                "flat table is {}x{}, expected {N_BUCKETS}x{N_ACTIONS}",
                table.n_states(),
                table.n_actions()
            )));
        }
        Ok(Self { table })
    }
}

impl ExecPolicy for FlatCePolicy {
    fn decide(&mut self, env: &ExecEnv) -> Decision {
        Decision::flat(self.table.greedy(coarse_state(&env.observe()).index()))
    }
}

/// Train a flat CE Q-learning agent on the environment's own reward.
pub fn train_flat(template: &ExecEnv, u: &UtilityFn, cfg: &QLearningConfig) -> Result<FlatCePolicy, HierError> {
    let mut env = CoarseEnv::flat(template.clone());
    FlatCePolicy::new(ce_q_learning(&mut env, u, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::Side;
    use crate::env::{EnvConfig, ParentOrder};
    use crate::flow::FlowConfig;

    fn env(pov: f64) -> ExecEnv {
        let parent = ParentOrder { side: Side::Buy, total_qty: 200, horizon: 30, pov_target: pov };
        ExecEnv::new(FlowConfig::default(), EnvConfig::default(), parent, 0).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(LocalPolicySpec::passive_placer().validate().is_ok());
        assert!(LocalPolicySpec::aggressive_taker().validate().is_ok());
        let mut s = LocalPolicySpec::passive_placer();
        s.action_subspace.clear();
        assert!(matches!(s.validate(), Err(HierError::InvalidSpec { .. })));
        let mut s = LocalPolicySpec::passive_placer();
        s.action_subspace.push(22);
        assert!(s.validate().is_err());
        let mut s = LocalPolicySpec::passive_placer();
        s.local_horizon = 0;
        assert!(s.validate().is_err());
        let mut s = LocalPolicySpec::passive_placer();
        s.action_subspace.push(0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn empty_subspace_rejected_by_training() {
        let mut s = LocalPolicySpec::passive_placer();
        s.action_subspace.clear();
        let r = train_local(&env(0.1), &s, &UtilityFn::Identity, &QLearningConfig::default());
        assert!(matches!(r, Err(HierError::InvalidSpec { .. })));
    }

    #[test]
    fn schedule_tracking_needs_a_target() {
        let r = train_local(&env(0.0), &LocalPolicySpec::aggressive_taker(), &UtilityFn::Identity, &QLearningConfig::default());
        assert!(matches!(r, Err(HierError::Incompatible(_))));
    }

    #[test]
    fn zero_episodes_gives_lowest_subspace_action() {
        let cfg = QLearningConfig { episodes: 0, ..QLearningConfig::default() };
        let spec = LocalPolicySpec::aggressive_taker();
        let p = train_local(&env(0.1), &spec, &UtilityFn::Identity, &cfg).unwrap();
        for s in CoarseState::all() {
            assert_eq!(p.act(s), spec.action_subspace[0]);
        }
    }

    #[test]
    fn passive_placer_stays_in_its_subspace() {
        let cfg = QLearningConfig { episodes: 200, seed: 3, ..QLearningConfig::default() };
        let spec = LocalPolicySpec::passive_placer();
        let p = train_local(&env(0.1), &spec, &UtilityFn::Identity, &cfg).unwrap();
        let actions = crate::env::enumerate_actions();
        for s in CoarseState::all() {
            let a = p.act(s);
            assert!(spec.action_subspace.contains(&a));
            assert!(actions[a].aggressive.is_none());
        }
    }

    #[test]
    fn coarse_env_truncates_at_local_horizon() {
        let spec = LocalPolicySpec { local_horizon: 3, termination: Termination::FixedSteps { steps: 100 }, ..LocalPolicySpec::passive_placer() };
        let mut ce = CoarseEnv::for_option(env(0.1), &spec);
        ce.reset(5).unwrap();
        let start = ce.env().step_index();
        let mut n = 0;
        loop {
            n += 1;
            if ce.step(0).unwrap().done {
                break;
            }
        }
        assert!(n <= 3);
        assert_eq!(ce.env().step_index(), start + n);
    }

    #[test]
    fn local_rewards_by_hand() {
        let mut e = env(0.1);
        e.reset(1).unwrap();
        let before = e.participation();
        let r = e.step(9).unwrap();
        let mid = r.info.mid_at_decision;
        let by_hand: f64 = r.info.fills.iter().map(|f| (mid - f.price as f64) * f.qty as f64 / 200.0).sum();
        assert!(!r.info.fills.is_empty());
        assert!((LocalReward::FillPriceVsMidAtDecision.score(&e, &r, before) - by_hand).abs() < 1e-12);
        let passive: f64 =
            r.info.fills.iter().filter(|f| f.passive).map(|f| (mid - f.price as f64) * f.qty as f64 / 200.0).sum();
        assert_eq!(LocalReward::SpreadCapture.score(&e, &r, before), passive);
        let track = (before - 0.1).abs() - (r.info.participation_so_far - 0.1).abs();
        assert_eq!(LocalReward::ScheduleTracking.score(&e, &r, before), track);
    }
}
