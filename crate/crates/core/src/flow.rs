//! Zero-intelligence background order flow.
//!
//! Each step draws Poisson counts of limit, cancel and market arrivals and
//! applies them in that order. Limit orders are placed a geometric number
//! of ticks behind the innermost non-crossing price, so with a one-tick
//! spread offset 0 joins the best and a wider spread gets refilled.
//! Liquidity taken by anyone, the agent included, only comes back through
//! these arrivals, which is what makes aggressive trading move the mid.

use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{BookEvent, LimitOrderBook, Owner, Price, Qty, Side};
use crate::rng::CounterRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeWeight {
    pub size: Qty,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Expected limit arrivals per step.
    pub limit_rate: f64,
    pub market_rate: f64,
    pub cancel_rate: f64,
    /// Success probability of the geometric placement offset.
    pub depth_geom_p: f64,
    pub size_dist: Vec<SizeWeight>,
    pub init_mid: Price,
    pub init_depth_qty: Qty,
    pub seed_levels: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            limit_rate: 6.0,
            market_rate: 2.0,
            cancel_rate: 3.0,
            depth_geom_p: 0.5,
            size_dist: vec![
                SizeWeight { size: 10, prob: 0.4 },
                SizeWeight { size: 20, prob: 0.3 },
                SizeWeight { size: 50, prob: 0.2 },
                SizeWeight { size: 100, prob: 0.1 },
            ],
            init_mid: 10_000,
            init_depth_qty: 100,
            seed_levels: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid flow config: {field} {reason}")]
pub struct FlowError {
    pub field: &'static str,
    pub reason: String,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> FlowError {
    FlowError { field, reason: reason.into() }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        for (field, rate) in [
            ("limit_rate", self.limit_rate),
            ("market_rate", self.market_rate),
            ("cancel_rate", self.cancel_rate),
        ] {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(invalid(field, "must be a finite number >= 0"));
            }
        }
        if !(self.depth_geom_p > 0.0 && self.depth_geom_p <= 1.0) {
            return Err(invalid("depth_geom_p", "must lie in (0, 1]"));
        }
        if self.size_dist.is_empty() {
            return Err(invalid("size_dist", "must not be empty"));
        }
        if self.size_dist.iter().any(|w| w.size == 0) {
            return Err(invalid("size_dist", "sizes must be positive"));
        }
        if self.size_dist.iter().any(|w| !(w.prob > 0.0)) {
            return Err(invalid("size_dist", "probabilities must be positive"));
        }
        let total: f64 = self.size_dist.iter().map(|w| w.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("size_dist", format!("probabilities sum to {total}, not 1")));
        }
        if self.init_depth_qty == 0 {
            return Err(invalid("init_depth_qty", "must be positive"));
        }
        if self.init_mid <= self.seed_levels as Price {
            return Err(invalid("init_mid", "must exceed seed_levels so seeded prices stay positive"));
        }
        Ok(())
    }

    fn draw_size(&self, rng: &mut CounterRng) -> Qty {
        let u = rng.open01();
        let mut acc = 0.0;
        for w in &self.size_dist {
            acc += w.prob;
            if u < acc {
                return w.size;
            }
        }
        self.size_dist.last().expect("validated nonempty").size
    }
}

/// Book plus flow state. Evolution depends only on the initial state, the
/// seed and whatever the agent does to the book between steps.
#[derive(Clone, Debug)]
pub struct SimState {
    pub book: LimitOrderBook,
    config: FlowConfig,
    seed: u64,
    step_index: u64,
}

impl SimState {
    /// Seed `seed_levels` levels per side around `init_mid`.
    pub fn new(config: FlowConfig, seed: u64) -> Result<Self, FlowError> {
        config.validate()?;
        let mut book = LimitOrderBook::new();
        for i in 1..=config.seed_levels as Price {
            book.submit_limit(Side::Buy, config.init_mid - i, config.init_depth_qty, Owner::Background)
                .expect("validated seed prices");
            book.submit_limit(Side::Sell, config.init_mid + i, config.init_depth_qty, Owner::Background)
                .expect("validated seed prices");
        }
        Ok(Self { book, config, seed, step_index: 0 })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Last trade price, or the configured initial mid before any trade.
    pub fn reference_price(&self) -> Price {
        self.book.last_trade_price().unwrap_or(self.config.init_mid)
    }

    /// Advance the background flow by one step and return the events it
    /// submitted.
    pub fn step_background(&mut self) -> Vec<BookEvent> {
        let first_event = self.book.events().len();
        let mut rng = CounterRng::keyed(&[self.seed, self.step_index]);
        let n_limit = poisson(self.config.limit_rate, &mut rng);
        let n_cancel = poisson(self.config.cancel_rate, &mut rng);
        let n_market = poisson(self.config.market_rate, &mut rng);
        let geom = Geometric::new(self.config.depth_geom_p).expect("validated p");

        for _ in 0..n_limit {
            let side = coin_side(&mut rng);
            let offset = geom.sample(&mut rng);
            let size = self.config.draw_size(&mut rng);
            let price = self.limit_price(side, offset);
            self.book
                .submit_limit(side, price, size, Owner::Background)
                .expect("placement yields positive price");
        }
        for _ in 0..n_cancel {
            let ids = self.book.resting_ids(Owner::Background);
            if ids.is_empty() {
                break;
            }
            let pick = ids[rng.below(ids.len() as u64) as usize];
            self.book.cancel(pick);
        }
        for _ in 0..n_market {
            let side = coin_side(&mut rng);
            let size = self.config.draw_size(&mut rng);
            self.book.submit_market(side, size, Owner::Background).expect("positive size");
        }
        self.step_index += 1;
        self.book.events()[first_event..].to_vec()
    }

    fn limit_price(&self, side: Side, offset: u64) -> Price {
        let book = &self.book;
        let price = match (book.best(side), book.best(side.opposite())) {
            // Offset counted back from one tick inside the opposite best;
            // with a one-tick spread, offset 0 joins the same-side best.
            (Some(_), Some(contra)) => match side {
                Side::Buy => contra.saturating_sub(1 + offset),
                Side::Sell => contra.saturating_add(1 + offset),
            },
            (Some(best), None) => match side {
                Side::Buy => best.saturating_sub(offset),
                Side::Sell => best.saturating_add(offset),
            },
            (None, contra) => {
                // Empty side: re-anchor one tick off the last trade price.
                let anchor = self.reference_price();
                let p = match side {
                    Side::Buy => anchor.saturating_sub(1 + offset),
                    Side::Sell => anchor.saturating_add(1 + offset),
                };
                match (side, contra) {
                    (Side::Buy, Some(ask)) => p.min(ask.saturating_sub(1)),
                    (Side::Sell, Some(bid)) => p.max(bid + 1),
                    _ => p,
                }
            }
        };
        price.max(1)
    }
}

/// Validate `config` and build the initial state.
pub fn init_sim(config: FlowConfig, seed: u64) -> Result<SimState, FlowError> {
    SimState::new(config, seed)
}

fn poisson(rate: f64, rng: &mut CounterRng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(rate).expect("positive finite rate").sample(rng);
    draw as u64
}

fn coin_side(rng: &mut CounterRng) -> Side {
    if rng.below(2) == 0 {
        Side::Buy
    } else {
        Side::Sell
    }
}
