//! Parent-order execution environment.
//!
//! One decision per simulation step. A step applies the agent's cancel,
//! passive placement and aggressive take (in that order), advances the
//! background flow once, then scores every agent fill against the running
//! all-trades VWAP:
//!
//! ```text
//! r_t = sign(side) · Σ_fills (vwap_at_fill − price) · qty / total_qty
//! ```
//!
//! If the horizon is reached with shares left, the remainder is priced by
//! walking the opposite side of the book (the part the book cannot absorb
//! at the worst trade price seen this episode) and charged the same way.

mod actions;
mod features;
mod pov;
mod rollout;
mod trace;

pub use actions::{
    action_index, aggressive_subspace, enumerate_actions, passive_subspace, ActionSpec, PassiveInstr,
    SizeBucket, SizeBuckets, N_ACTIONS, PASSIVE_OFFSETS,
};
pub use features::{featurize, Observation, ParentProgress};
pub use pov::PovBaseline;
pub use rollout::{rollout, Decision, Episode, ExecPolicy, RandomPolicy};
pub use trace::{read_trace_csv, write_trace_csv, TraceRow, TRACE_HEADER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{LimitOrderBook, OrderId, Owner, Price, Qty, Side};
use crate::flow::{FlowConfig, FlowError, SimState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid config: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    #[error("invalid argument: unknown action index {0}")]
    UnknownAction(usize),
}

/// The client instruction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParentOrder {
    pub side: Side,
    pub total_qty: Qty,
    pub horizon: usize,
    /// Participation target for the PoV baseline, as a fraction of market volume.
    pub pov_target: f64,
}

impl Default for ParentOrder {
    fn default() -> Self {
        Self { side: Side::Buy, total_qty: 1000, horizon: 100, pov_target: 0.1 }
    }
}

impl ParentOrder {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.total_qty == 0 {
            return Err(bad("total_qty", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(bad("horizon", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.pov_target) {
            return Err(bad("pov_target", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn bad(field: &'static str, reason: &str) -> EnvError {
    EnvError::InvalidConfig { field, reason: reason.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Book levels per side in the observation.
    pub levels: usize,
    pub sizes: SizeBuckets,
    /// Tolerance band around the participation target.
    pub pov_band: f64,
    /// Steps averaged for the trailing market volume.
    pub trailing_window: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { levels: 10, sizes: SizeBuckets { small: 5, large: 20 }, pov_band: 0.02, trailing_window: 5 }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.levels == 0 {
            return Err(bad("levels", "must be at least 1"));
        }
        if self.sizes.small == 0 || self.sizes.large < self.sizes.small {
            return Err(bad("sizes", "need 0 < small <= large"));
        }
        if !(0.0..1.0).contains(&self.pov_band) {
            return Err(bad("pov_band", "must lie in [0, 1)"));
        }
        if self.trailing_window == 0 {
            return Err(bad("trailing_window", "must be at least 1"));
        }
        Ok(())
    }

    pub fn obs_dim(&self) -> usize {
        4 * self.levels + 4
    }
}

/// One agent execution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fill {
    pub price: Price,
    pub qty: Qty,
    /// The agent was the resting side.
    pub passive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub filled_this_step: Qty,
    pub exec_vwap_so_far: Option<f64>,
    pub market_vwap_so_far: Option<f64>,
    pub participation_so_far: f64,
    pub fills: Vec<Fill>,
    /// Mid (or reference price) when the decision was taken.
    pub mid_at_decision: f64,
    pub best_bid_at_decision: Option<Price>,
    pub best_ask_at_decision: Option<Price>,
    /// Price of the agent's resting passive order after the action.
    pub passive_price: Option<Price>,
    /// Nonzero only on the final step of an unfinished execution.
    pub terminal_penalty: f64,
    /// `sign · (market_vwap − exec_vwap) · filled_fraction + terminal_penalty`
    /// as of this step.
    pub benchmark_reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Episode-level figures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub filled: Qty,
    pub filled_fraction: f64,
    pub exec_vwap: Option<f64>,
    pub market_vwap: Option<f64>,
    pub participation: f64,
    pub total_reward: f64,
    pub terminal_penalty: f64,
    pub benchmark_reward: f64,
}

#[derive(Clone, Debug)]
pub struct ExecEnv {
    flow: FlowConfig,
    cfg: EnvConfig,
    parent: ParentOrder,
    actions: Vec<ActionSpec>,
    sim: SimState,
    step: usize,
    filled: Qty,
    exec_notional: u128,
    market_volume: Qty,
    market_notional: u128,
    passive: Option<(OrderId, PassiveInstr, Price)>,
    trade_cursor: usize,
    volume_history: Vec<Qty>,
    worst_trade: Option<Price>,
    total_reward: f64,
    terminal_penalty: f64,
    done: bool,
}

impl ExecEnv {
    pub fn new(flow: FlowConfig, cfg: EnvConfig, parent: ParentOrder, seed: u64) -> Result<Self, EnvError> {
        cfg.validate()?;
        parent.validate()?;
        let sim = SimState::new(flow.clone(), seed)?;
        let mut env = Self {
            flow,
            cfg,
            parent,
            actions: enumerate_actions(),
            sim,
            step: 0,
            filled: 0,
            exec_notional: 0,
            market_volume: 0,
            market_notional: 0,
            passive: None,
            trade_cursor: 0,
            volume_history: Vec::new(),
            worst_trade: None,
            total_reward: 0.0,
            terminal_penalty: 0.0,
            done: false,
        };
        env.trade_cursor = env.sim.book.trades().len();
        Ok(env)
    }

    /// Start a fresh episode on a new simulation seeded with `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        *self = Self::new(self.flow.clone(), self.cfg.clone(), self.parent, seed)?;
        Ok(self.observe())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn flow_config(&self) -> &FlowConfig {
        &self.flow
    }

    pub fn parent(&self) -> &ParentOrder {
        &self.parent
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn book(&self) -> &LimitOrderBook {
        &self.sim.book
    }

    pub fn sim(&self) -> &SimState {
        &self.sim
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn filled(&self) -> Qty {
        self.filled
    }

    pub fn remaining(&self) -> Qty {
        self.parent.total_qty - self.filled
    }

    pub fn market_volume(&self) -> Qty {
        self.market_volume
    }

    pub fn progress(&self) -> ParentProgress {
        ParentProgress {
            filled: self.filled,
            total_qty: self.parent.total_qty,
            step: self.step,
            horizon: self.parent.horizon,
        }
    }

    /// Agent share of all traded volume this episode; 0 before any trade.
    pub fn participation(&self) -> f64 {
        if self.market_volume == 0 {
            0.0
        } else {
            self.filled as f64 / self.market_volume as f64
        }
    }

    pub fn exec_vwap(&self) -> Option<f64> {
        (self.filled > 0).then(|| self.exec_notional as f64 / self.filled as f64)
    }

    pub fn market_vwap(&self) -> Option<f64> {
        (self.market_volume > 0).then(|| self.market_notional as f64 / self.market_volume as f64)
    }

    /// Mean market volume per step over the last `trailing_window` steps.
    pub fn trailing_volume(&self) -> f64 {
        let w = self.cfg.trailing_window.min(self.volume_history.len());
        if w == 0 {
            return 0.0;
        }
        let recent = &self.volume_history[self.volume_history.len() - w..];
        recent.iter().sum::<Qty>() as f64 / w as f64
    }

    /// Resting passive order as (price, remaining).
    pub fn passive_order(&self) -> Option<(Price, Qty)> {
        let (id, _, price) = self.passive?;
        self.sim.book.order(id).map(|o| (price, o.remaining))
    }

    pub fn observe(&self) -> Observation {
        featurize(
            &self.sim.book.depth(self.cfg.levels),
            self.cfg.levels,
            self.sim.reference_price(),
            self.flow.init_depth_qty,
            &self.progress(),
        )
    }

    pub fn outcome(&self) -> EpisodeOutcome {
        EpisodeOutcome {
            filled: self.filled,
            filled_fraction: self.filled as f64 / self.parent.total_qty as f64,
            exec_vwap: self.exec_vwap(),
            market_vwap: self.market_vwap(),
            participation: self.participation(),
            total_reward: self.total_reward,
            terminal_penalty: self.terminal_penalty,
            benchmark_reward: self.benchmark_reward(),
        }
    }

    /// Step with an index into [`enumerate_actions`].
    pub fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let spec = *self.actions.get(action).ok_or(EnvError::UnknownAction(action))?;
        self.step_spec(&spec)
    }

    pub fn step_spec(&mut self, action: &ActionSpec) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::InvalidState("episode already finished"));
        }
        let side = self.parent.side;
        let book = &self.sim.book;
        let best_bid_at_decision = book.best_bid();
        let best_ask_at_decision = book.best_ask();
        let mid_at_decision = book.mid().unwrap_or(self.sim.reference_price() as f64);

        if action.cancel_all_passive {
            self.cancel_passive();
        }
        if let Some(instr) = action.passive {
            let price = self.passive_price(instr.offset);
            let keep = matches!(self.passive, Some((id, cur, p))
                if cur.size == instr.size && p == price && self.sim.book.order(id).is_some());
            if !keep {
                self.cancel_passive();
                let qty = self.cfg.sizes.qty(instr.size).min(self.unplaced());
                if qty > 0 {
                    let sub = self
                        .sim
                        .book
                        .submit_limit(side, price, qty, Owner::Agent)
                        .expect("positive price and qty");
                    if self.sim.book.order(sub.order_id).is_some() {
                        self.passive = Some((sub.order_id, instr, price));
                    }
                }
            }
        }
        if let Some(bucket) = action.aggressive {
            let qty = self.cfg.sizes.qty(bucket).min(self.unplaced());
            if qty > 0 {
                self.sim.book.submit_market(side, qty, Owner::Agent).expect("positive qty");
            }
        }
        let passive_price = self.passive_order().map(|(p, _)| p);
        self.sim.step_background();

        let (reward, fills, step_volume) = self.score_new_trades();
        self.volume_history.push(step_volume);
        self.step += 1;

        let mut terminal_penalty = 0.0;
        if self.filled == self.parent.total_qty {
            self.done = true;
        } else if self.step >= self.parent.horizon {
            self.done = true;
            self.cancel_passive();
            terminal_penalty = self.liquidation_penalty();
            self.terminal_penalty = terminal_penalty;
        }
        if self.done {
            self.cancel_passive();
        }
        let reward = reward + terminal_penalty;
        self.total_reward += reward;

        Ok(StepResult {
            obs: self.observe(),
            reward,
            done: self.done,
            info: StepInfo {
                filled_this_step: fills.iter().map(|f| f.qty).sum(),
                exec_vwap_so_far: self.exec_vwap(),
                market_vwap_so_far: self.market_vwap(),
                participation_so_far: self.participation(),
                fills,
                mid_at_decision,
                best_bid_at_decision,
                best_ask_at_decision,
                passive_price,
                terminal_penalty,
                benchmark_reward: self.benchmark_reward(),
            },
        })
    }

    /// Shares neither filled nor resting in the passive order.
    fn unplaced(&self) -> Qty {
        let resting = self.passive_order().map_or(0, |(_, q)| q);
        self.parent.total_qty - self.filled - resting
    }

    fn cancel_passive(&mut self) {
        if let Some((id, _, _)) = self.passive.take() {
            self.sim.book.cancel(id);
        }
    }

    fn passive_price(&self, offset: u8) -> Price {
        let offset = offset as Price;
        let book = &self.sim.book;
        let side = self.parent.side;
        let price = match (side, book.best(side)) {
            (Side::Buy, Some(b)) => b.saturating_sub(offset),
            (Side::Sell, Some(a)) => a + offset,
            (Side::Buy, None) => {
                let anchor = book.best_ask().unwrap_or(self.sim.reference_price());
                anchor.saturating_sub(1 + offset)
            }
            (Side::Sell, None) => {
                let anchor = book.best_bid().unwrap_or(self.sim.reference_price());
                anchor + 1 + offset
            }
        };
        price.max(1)
    }

    /// Fold trades since the last call into the running statistics. Returns
    /// (reward, agent fills, traded volume).
    fn score_new_trades(&mut self) -> (f64, Vec<Fill>, Qty) {
        let sign = self.parent.side.sign();
        let total = self.parent.total_qty as f64;
        let trades = &self.sim.book.trades()[self.trade_cursor..];
        let mut reward = 0.0;
        let mut fills = Vec::new();
        let mut volume = 0;
        for t in trades {
            volume += t.qty;
            self.market_volume += t.qty;
            self.market_notional += t.price as u128 * t.qty as u128;
            self.worst_trade = Some(match (self.worst_trade, self.parent.side) {
                (None, _) => t.price,
                (Some(w), Side::Buy) => w.max(t.price),
                (Some(w), Side::Sell) => w.min(t.price),
            });
            if t.involves(Owner::Agent) {
                let vwap = self.market_notional as f64 / self.market_volume as f64;
                reward += sign * (vwap - t.price as f64) * t.qty as f64 / total;
                self.filled += t.qty;
                self.exec_notional += t.price as u128 * t.qty as u128;
                fills.push(Fill { price: t.price, qty: t.qty, passive: t.maker_owner == Owner::Agent });
            }
        }
        self.trade_cursor = self.sim.book.trades().len();
        (reward, fills, volume)
    }

    /// Cost versus market VWAP of taking the remainder from the opposite
    /// side right now, in reward units.
    fn liquidation_penalty(&self) -> f64 {
        let side = self.parent.side;
        let mut left = self.remaining();
        let depth = self.sim.book.depth(usize::MAX);
        let mut cost_notional = 0.0;
        let mut deepest = None;
        for l in depth.side(side.opposite()) {
            if left == 0 {
                break;
            }
            let q = left.min(l.qty);
            cost_notional += (l.price * q) as f64;
            deepest = Some(l.price);
            left -= q;
        }
        if left > 0 {
            let fallback = self
                .worst_trade
                .or(deepest)
                .unwrap_or(self.sim.reference_price());
            cost_notional += (fallback * left) as f64;
        }
        let benchmark = self
            .market_vwap()
            .or(self.sim.book.mid())
            .unwrap_or(self.sim.reference_price() as f64);
        let remaining = self.remaining() as f64;
        side.sign() * (benchmark * remaining - cost_notional) / self.parent.total_qty as f64
    }

    fn benchmark_reward(&self) -> f64 {
        let executed = match (self.market_vwap(), self.exec_vwap()) {
            (Some(m), Some(e)) => {
                self.parent.side.sign() * (m - e) * self.filled as f64 / self.parent.total_qty as f64
            }
            _ => 0.0,
        };
        executed + self.terminal_penalty
    }
}
