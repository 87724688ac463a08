//! Price-time priority limit order book.
//!
//! Prices are integer ticks and quantities integer shares; nothing in the
//! matching path touches floating point. Each accepted order takes the next
//! value of a logical event counter as its timestamp, so replaying the same
//! event sequence reproduces the same trades bit for bit.

mod export;

pub use export::{read_events_jsonl, write_events_jsonl, write_trades_csv};

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Price = u64;
pub type Qty = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// +1 for buys, -1 for sells.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        })
    }
}

/// Who submitted an order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Agent,
    Background,
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Owner::Agent => "agent",
            Owner::Background => "background",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderId(pub u64);

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LimitOrder {
    pub id: OrderId,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
    pub remaining: Qty,
    pub ts: u64,
    pub owner: Owner,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub ts: u64,
    pub price: Price,
    pub qty: Qty,
    pub maker_id: OrderId,
    pub taker_id: OrderId,
    pub aggressor_side: Side,
    pub maker_owner: Owner,
    pub taker_owner: Owner,
}

impl Trade {
    pub fn involves(&self, owner: Owner) -> bool {
        self.maker_owner == owner || self.taker_owner == owner
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Limit,
    Market,
    Cancel,
}

/// One order-entry event. The trade log follows from replaying these.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookEvent {
    pub ts: u64,
    pub kind: EventKind,
    pub side: Side,
    pub price: Option<Price>,
    pub qty: Qty,
    pub order_id: OrderId,
    pub owner: Owner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub price: Price,
    pub qty: Qty,
}

/// Best levels per side, best first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthSnapshot {
    pub bids: Vec<Level>,
    pub asks: Vec<Level>,
    /// Midprice in half-ticks (`best_bid + best_ask`).
    pub mid_half_ticks: Option<u64>,
    pub spread: Option<u64>,
}

impl DepthSnapshot {
    pub fn mid(&self) -> Option<f64> {
        self.mid_half_ticks.map(|m| m as f64 / 2.0)
    }

    pub fn side(&self, side: Side) -> &[Level] {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }
}

/// Result of a submission: the id assigned to the incoming order, its trades
/// in match order, and any of the submitter's own resting orders that were
/// cancelled instead of self-matching.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Submission {
    pub order_id: OrderId,
    pub trades: Vec<Trade>,
    pub self_match_cancels: Vec<(OrderId, Qty)>,
}

impl Submission {
    pub fn filled(&self) -> Qty {
        self.trades.iter().map(|t| t.qty).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BookError {
    #[error("invalid argument: {0} must be positive")]
    NonPositive(&'static str),
}

type Ladder = BTreeMap<Price, VecDeque<LimitOrder>>;

#[derive(Clone, Debug, Default)]
pub struct LimitOrderBook {
    bids: Ladder,
    asks: Ladder,
    index: BTreeMap<OrderId, (Side, Price)>,
    next_ts: u64,
    next_id: u64,
    trades: Vec<Trade>,
    events: Vec<BookEvent>,
}

impl LimitOrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Submit a limit order. Marketable quantity matches immediately; the
    /// remainder rests.
    pub fn submit_limit(
        &mut self,
        side: Side,
        price: Price,
        qty: Qty,
        owner: Owner,
    ) -> Result<Submission, BookError> {
        if price == 0 {
            return Err(BookError::NonPositive("price"));
        }
        if qty == 0 {
            return Err(BookError::NonPositive("qty"));
        }
        let (id, ts) = self.accept();
        self.events.push(BookEvent {
            ts,
            kind: EventKind::Limit,
            side,
            price: Some(price),
            qty,
            order_id: id,
            owner,
        });
        let mut sub = Submission { order_id: id, ..Default::default() };
        let remaining = self.match_incoming(side, Some(price), qty, id, owner, ts, &mut sub);
        if remaining > 0 {
            let order = LimitOrder { id, side, price, qty, remaining, ts, owner };
            self.ladder_mut(side).entry(price).or_default().push_back(order);
            self.index.insert(id, (side, price));
        }
        Ok(sub)
    }

    /// Submit a market order with immediate-or-cancel semantics: whatever
    /// cannot be filled against the opposite side is dropped.
    pub fn submit_market(&mut self, side: Side, qty: Qty, owner: Owner) -> Result<Submission, BookError> {
        if qty == 0 {
            return Err(BookError::NonPositive("qty"));
        }
        let (id, ts) = self.accept();
        self.events.push(BookEvent {
            ts,
            kind: EventKind::Market,
            side,
            price: None,
            qty,
            order_id: id,
            owner,
        });
        let mut sub = Submission { order_id: id, ..Default::default() };
        self.match_incoming(side, None, qty, id, owner, ts, &mut sub);
        Ok(sub)
    }

    /// Remove a resting order, returning its unfilled quantity. Unknown or
    /// already-finished orders return 0.
    pub fn cancel(&mut self, id: OrderId) -> Qty {
        let Some(&(side, price)) = self.index.get(&id) else {
            return 0;
        };
        let ts = self.next_ts;
        self.next_ts += 1;
        let order = self.remove_resting(id, side, price);
        self.events.push(BookEvent {
            ts,
            kind: EventKind::Cancel,
            side,
            price: Some(price),
            qty: order.remaining,
            order_id: id,
            owner: order.owner,
        });
        order.remaining
    }

    pub fn depth(&self, k: usize) -> DepthSnapshot {
        let collect = |it: &mut dyn Iterator<Item = (&Price, &VecDeque<LimitOrder>)>| {
            it.take(k)
                .map(|(&price, q)| Level { price, qty: q.iter().map(|o| o.remaining).sum() })
                .collect::<Vec<_>>()
        };
        let bids = collect(&mut self.bids.iter().rev());
        let asks = collect(&mut self.asks.iter());
        DepthSnapshot {
            bids,
            asks,
            mid_half_ticks: self.mid_half_ticks(),
            spread: self.spread(),
        }
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    pub fn best(&self, side: Side) -> Option<Price> {
        match side {
            Side::Buy => self.best_bid(),
            Side::Sell => self.best_ask(),
        }
    }

    pub fn mid_half_ticks(&self) -> Option<u64> {
        Some(self.best_bid()? + self.best_ask()?)
    }

    pub fn mid(&self) -> Option<f64> {
        self.mid_half_ticks().map(|m| m as f64 / 2.0)
    }

    pub fn spread(&self) -> Option<u64> {
        Some(self.best_ask()? - self.best_bid()?)
    }

    pub fn order(&self, id: OrderId) -> Option<&LimitOrder> {
        let &(side, price) = self.index.get(&id)?;
        self.ladder(side).get(&price)?.iter().find(|o| o.id == id)
    }

    /// Resting orders of one owner, in id order.
    pub fn resting_ids(&self, owner: Owner) -> Vec<OrderId> {
        self.index
            .keys()
            .copied()
            .filter(|&id| self.order(id).is_some_and(|o| o.owner == owner))
            .collect()
    }

    pub fn resting_count(&self) -> usize {
        self.index.len()
    }

    /// All resting orders, bids best-first then asks best-first, FIFO within a level.
    pub fn resting_orders(&self) -> impl Iterator<Item = &LimitOrder> {
        self.bids.values().rev().flatten().chain(self.asks.values().flatten())
    }

    pub fn trades(&self) -> &[Trade] {
        &self.trades
    }

    pub fn events(&self) -> &[BookEvent] {
        &self.events
    }

    pub fn last_trade_price(&self) -> Option<Price> {
        self.trades.last().map(|t| t.price)
    }

    /// Re-apply an exported event. Cancel events whose order is already gone
    /// (self-match cancels are logged alongside their taker) are no-ops.
    pub fn apply(&mut self, ev: &BookEvent) -> Result<Submission, BookError> {
        match ev.kind {
            EventKind::Limit => {
                self.submit_limit(ev.side, ev.price.unwrap_or(0), ev.qty, ev.owner)
            }
            EventKind::Market => self.submit_market(ev.side, ev.qty, ev.owner),
            EventKind::Cancel => {
                self.cancel(ev.order_id);
                Ok(Submission { order_id: ev.order_id, ..Default::default() })
            }
        }
    }

    /// Check the at-rest invariants: uncrossed, FIFO by ts within each level,
    /// no empty levels, index consistent with the ladders.
    pub fn validate(&self) -> Result<(), String> {
        if let (Some(b), Some(a)) = (self.best_bid(), self.best_ask()) {
            if b >= a {
                return Err(format!("crossed or locked book: bid {b} >= ask {a}"));
            }
        }
        let mut seen = 0;
        for (side, ladder) in [(Side::Buy, &self.bids), (Side::Sell, &self.asks)] {
            for (&price, queue) in ladder {
                if queue.is_empty() {
                    return Err(format!("empty level {side} {price}"));
                }
                for w in queue.iter().collect::<Vec<_>>().windows(2) {
                    if w[0].ts >= w[1].ts {
                        return Err(format!("FIFO violated at {side} {price}"));
                    }
                }
                for o in queue {
                    seen += 1;
                    if o.remaining == 0 || o.remaining > o.qty || o.side != side || o.price != price {
                        return Err(format!("bad resting order {:?}", o));
                    }
                    if self.index.get(&o.id) != Some(&(side, price)) {
                        return Err(format!("index out of sync for {}", o.id));
                    }
                }
            }
        }
        if seen != self.index.len() {
            return Err("index holds orders not in the ladders".into());
        }
        Ok(())
    }

    fn accept(&mut self) -> (OrderId, u64) {
        let id = OrderId(self.next_id);
        let ts = self.next_ts;
        self.next_id += 1;
        self.next_ts += 1;
        (id, ts)
    }

    fn ladder(&self, side: Side) -> &Ladder {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    fn ladder_mut(&mut self, side: Side) -> &mut Ladder {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn remove_resting(&mut self, id: OrderId, side: Side, price: Price) -> LimitOrder {
        self.index.remove(&id);
        let ladder = self.ladder_mut(side);
        let queue = ladder.get_mut(&price).expect("indexed level exists");
        let pos = queue.iter().position(|o| o.id == id).expect("indexed order exists");
        let order = queue.remove(pos).expect("position in range");
        if queue.is_empty() {
            ladder.remove(&price);
        }
        order
    }

    /// Walk the opposite ladder best-first. Returns the unfilled quantity.
    #[allow(clippy::too_many_arguments)]
    fn match_incoming(
        &mut self,
        side: Side,
        limit: Option<Price>,
        mut qty: Qty,
        taker_id: OrderId,
        owner: Owner,
        ts: u64,
        sub: &mut Submission,
    ) -> Qty {
        let contra = side.opposite();
        while qty > 0 {
            let best = match contra {
                Side::Sell => self.asks.first_key_value().map(|(&p, _)| p),
                Side::Buy => self.bids.last_key_value().map(|(&p, _)| p),
            };
            let Some(level_price) = best else { break };
            let marketable = match (limit, side) {
                (None, _) => true,
                (Some(l), Side::Buy) => level_price <= l,
                (Some(l), Side::Sell) => level_price >= l,
            };
            if !marketable {
                break;
            }
            let ladder = match contra {
                Side::Buy => &mut self.bids,
                Side::Sell => &mut self.asks,
            };
            let queue = ladder.get_mut(&level_price).expect("best level exists");
            while qty > 0 {
                let Some(maker) = queue.front_mut() else { break };
                if owner == Owner::Agent && maker.owner == Owner::Agent {
                    let gone = queue.pop_front().expect("front exists");
                    self.index.remove(&gone.id);
                    self.events.push(BookEvent {
                        ts,
                        kind: EventKind::Cancel,
                        side: gone.side,
                        price: Some(gone.price),
                        qty: gone.remaining,
                        order_id: gone.id,
                        owner: gone.owner,
                    });
                    sub.self_match_cancels.push((gone.id, gone.remaining));
                    continue;
                }
                let fill = qty.min(maker.remaining);
                maker.remaining -= fill;
                qty -= fill;
                let trade = Trade {
                    ts,
                    price: level_price,
                    qty: fill,
                    maker_id: maker.id,
                    taker_id,
                    aggressor_side: side,
                    maker_owner: maker.owner,
                    taker_owner: owner,
                };
                if maker.remaining == 0 {
                    let done = queue.pop_front().expect("front exists");
                    self.index.remove(&done.id);
                }
                self.trades.push(trade.clone());
                sub.trades.push(trade);
            }
            if queue.is_empty() {
                ladder.remove(&level_price);
            }
        }
        qty
    }
}
