use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::mdp::argmax_lowest;
use super::{CerlError, Utility, UtilityFn};
use crate::rng::{derive_key, CounterRng};

/// One environment transition in discrete state/action indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
}

/// Episodic environment with finitely many states and actions.
pub trait DiscreteEnv {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<usize, CerlError>;
    fn step(&mut self, action: usize) -> Result<Transition, CerlError>;
}

/// Learned action values. `m` lives in utility space, `ce = U⁻¹(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    pub ce: Vec<f64>,
    pub m: Vec<f64>,
    pub visits: Vec<u64>,
}

impl QTable {
    /// All entries start at a certain outcome of zero.
    pub fn new(n_states: usize, n_actions: usize, u: &UtilityFn) -> Result<Self, CerlError> {
        let n = n_states * n_actions;
        Ok(Self {
            n_states,
            n_actions,
            ce: vec![0.0; n],
            m: vec![u.value(0.0)?; n],
            visits: vec![0; n],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn ce_row(&self, s: usize) -> &[f64] {
        &self.ce[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.ce[s * self.n_actions + a]
    }

    pub fn greedy(&self, s: usize) -> usize {
        argmax_lowest(self.ce_row(s))
    }

    pub fn max_ce(&self, s: usize) -> f64 {
        self.ce_row(s)[self.greedy(s)]
    }

    /// CSV with header `state,action,ce_value,m_value,visits`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "action", "ce_value", "m_value", "visits"])?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let i = s * self.n_actions + a;
                w.write_record([
                    s.to_string(),
                    a.to_string(),
                    self.ce[i].to_string(),
                    self.m[i].to_string(),
                    self.visits[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, CerlError> {
        let bad = |e: String| CerlError::InvalidArgument(format!("q-table csv: {e}"));
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header != vec!["state", "action", "ce_value", "m_value", "visits"] {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| bad("short row".into()));
            let s: usize = field(0)?.parse().map_err(|e| bad(format!("{e}")))?;
            let a: usize = field(1)?.parse().map_err(|e| bad(format!("{e}")))?;
            let ce: f64 = field(2)?.parse().map_err(|e| bad(format!("{e}")))?;
            let m: f64 = field(3)?.parse().map_err(|e| bad(format!("{e}")))?;
            let v: u64 = field(4)?.parse().map_err(|e| bad(format!("{e}")))?;
            rows.push((s, a, ce, m, v));
        }
        let n_states = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n_actions = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n_states * n_actions {
            return Err(bad("table is not dense".into()));
        }
        let n = rows.len();
        let mut t = QTable { n_states, n_actions, ce: vec![0.0; n], m: vec![0.0; n], visits: vec![0; n] };
        for (s, a, ce, m, v) in rows {
            let i = s * n_actions + a;
            t.ce[i] = ce;
            t.m[i] = m;
            t.visits[i] = v;
        }
        Ok(t)
    }
}

/// Step size as a function of the visit count `n >= 1` of the updated pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearningRate {
    Constant { alpha: f64 },
    /// `n^-power`; `power = 1` gives the running sample mean.
    InverseVisits { power: f64 },
}

impl LearningRate {
    pub fn at(&self, visits: u64) -> f64 {
        match *self {
            LearningRate::Constant { alpha } => alpha,
            LearningRate::InverseVisits { power } => (visits.max(1) as f64).powf(-power),
        }
    }
}

/// Probability of a uniformly random action as a function of the episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Exploration {
    Constant { epsilon: f64 },
    /// Linear decay from `start` to `end` over `episodes`, then flat.
    Linear { start: f64, end: f64, episodes: u64 },
}

impl Exploration {
    pub fn at(&self, episode: u64) -> f64 {
        match *self {
            Exploration::Constant { epsilon } => epsilon,
            Exploration::Linear { start, end, episodes } => {
                if episodes == 0 || episode >= episodes {
                    end
                } else {
                    start + (end - start) * episode as f64 / episodes as f64
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QLearningConfig {
    pub episodes: u64,
    pub learning_rate: LearningRate,
    pub exploration: Exploration,
    pub seed: u64,
    /// Safety cap on episode length.
    pub max_steps: u64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            episodes: 2_000,
            learning_rate: LearningRate::InverseVisits { power: 1.0 },
            exploration: Exploration::Linear { start: 1.0, end: 0.05, episodes: 1_500 },
            seed: 0,
            max_steps: 100_000,
        }
    }
}

/// Seed handed to the environment for episode `episode` of a run.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    derive_key(&[seed, episode, 0x5EED])
}

/// Sample-based CE Q-learning:
/// `M ← M + α (U(r + max_a' CE(s', a')) − M)`, `CE = U⁻¹(M)`, ε-greedy.
pub fn ce_q_learning<E: DiscreteEnv + ?Sized>(
    env: &mut E,
    u: &UtilityFn,
    cfg: &QLearningConfig,
) -> Result<QTable, CerlError> {
    let table = QTable::new(env.n_states(), env.n_actions(), u)?;
    ce_q_learning_from(env, u, cfg, table)
}

/// Continue training an existing table.
pub fn ce_q_learning_from<E: DiscreteEnv + ?Sized>(
    env: &mut E,
    u: &UtilityFn,
    cfg: &QLearningConfig,
    mut table: QTable,
) -> Result<QTable, CerlError> {
    u.validate()?;
    let n_actions = env.n_actions();
    if n_actions == 0 {
        return Err(CerlError::InvalidArgument("environment has no actions".into()));
    }
    if table.n_states != env.n_states() || table.n_actions != n_actions {
        return Err(CerlError::InvalidArgument("table shape does not match environment".into()));
    }
    for episode in 0..cfg.episodes {
        let mut rng = CounterRng::keyed(&[cfg.seed, episode]);
        let eps = cfg.exploration.at(episode);
        let mut state = env.reset(episode_seed(cfg.seed, episode))?;
        for _ in 0..cfg.max_steps {
            if state >= table.n_states {
                return Err(CerlError::Env(format!("state {state} out of range")));
            }
            let action = if rng.open01() < eps {
                rng.below(n_actions as u64) as usize
            } else {
                table.greedy(state)
            };
            let t = env.step(action)?;
            let continuation = if t.done { 0.0 } else { table.max_ce(t.next_state) };
            let target = u.value(t.reward + continuation)?;
            let i = state * n_actions + action;
            table.visits[i] += 1;
            let alpha = cfg.learning_rate.at(table.visits[i]);
            if alpha != 0.0 {
                table.m[i] += alpha * (target - table.m[i]);
                table.ce[i] = u.inverse(table.m[i])?;
            }
            if t.done {
                break;
            }
            state = t.next_state;
        }
    }
    Ok(table)
}
