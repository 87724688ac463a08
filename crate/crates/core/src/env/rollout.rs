use super::{EnvError, EpisodeOutcome, ExecEnv, PovBaseline, StepResult, TraceRow, N_ACTIONS};
use crate::rng::CounterRng;

/// What a policy chose for one base step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub action: usize,
    /// Option that produced the action, for hierarchical agents.
    pub option: Option<usize>,
}

impl Decision {
    pub fn flat(action: usize) -> Self {
        Self { action, option: None }
    }
}

/// Anything that can drive an [`ExecEnv`] one step at a time.
pub trait ExecPolicy {
    /// Called once before the first decision of an episode.
    fn begin_episode(&mut self, _seed: u64) {}

    fn decide(&mut self, env: &ExecEnv) -> Decision;

    /// Called with the result of every step.
    fn observe(&mut self, _result: &StepResult) {}

    /// Number of times the policy changed option this episode.
    fn option_switches(&self) -> Option<usize> {
        None
    }
}

impl<P: ExecPolicy + ?Sized> ExecPolicy for &mut P {
    fn begin_episode(&mut self, seed: u64) {
        (**self).begin_episode(seed)
    }

    fn decide(&mut self, env: &ExecEnv) -> Decision {
        (**self).decide(env)
    }

    fn observe(&mut self, result: &StepResult) {
        (**self).observe(result)
    }

    fn option_switches(&self) -> Option<usize> {
        (**self).option_switches()
    }
}

impl ExecPolicy for PovBaseline {
    fn decide(&mut self, env: &ExecEnv) -> Decision {
        Decision::flat(self.act(env))
    }
}

/// Uniform over the enumerated actions, keyed by (seed, step).
#[derive(Clone, Debug, Default)]
pub struct RandomPolicy {
    seed: u64,
}

impl ExecPolicy for RandomPolicy {
    fn begin_episode(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn decide(&mut self, env: &ExecEnv) -> Decision {
        let mut rng = CounterRng::keyed(&[self.seed, env.step_index() as u64, 0xAC7]);
        Decision::flat(rng.below(N_ACTIONS as u64) as usize)
    }
}

/// A finished episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub seed: u64,
    pub trace: Vec<TraceRow>,
    pub outcome: EpisodeOutcome,
    pub option_switches: Option<usize>,
}

/// Reset `env` with `seed` and run `policy` until the episode ends.
pub fn rollout<P: ExecPolicy + ?Sized>(env: &mut ExecEnv, seed: u64, policy: &mut P) -> Result<Episode, EnvError> {
    env.reset(seed)?;
    policy.begin_episode(seed);
    let mut trace = Vec::with_capacity(env.parent().horizon);
    while !env.is_done() {
        let step = env.step_index();
        let decision = policy.decide(env);
        let result = env.step(decision.action)?;
        trace.push(trace_row(step, decision, &result));
        policy.observe(&result);
    }
    Ok(Episode { seed, trace, outcome: env.outcome(), option_switches: policy.option_switches() })
}

fn trace_row(step: usize, decision: Decision, r: &StepResult) -> TraceRow {
    let info = &r.info;
    let spread = match (info.best_bid_at_decision, info.best_ask_at_decision) {
        (Some(b), Some(a)) => Some(a - b),
        _ => None,
    };
    TraceRow {
        step,
        action_index: decision.action,
        filled: info.filled_this_step,
        reward: r.reward,
        mid: spread.map(|_| info.mid_at_decision),
        spread,
        participation: info.participation_so_far,
        option: decision.option,
        best_bid: info.best_bid_at_decision,
        best_ask: info.best_ask_at_decision,
        passive_price: info.passive_price,
        fills: info.fills.iter().map(|f| (f.price, f.qty)).collect(),
        market_vwap: info.market_vwap_so_far,
    }
}
