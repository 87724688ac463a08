#![allow(dead_code)]

use exec_sim::book::{LimitOrderBook, Owner, Price, Qty, Side, Trade};
use exec_sim::cerl::{CerlError, DiscreteEnv, FiniteMdp, OutcomeDist, Transition, Utility, UtilityFn};
use exec_sim::rng::CounterRng;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// One order-entry instruction for both matchers. `Cancel(k)` targets the
/// `k`-th accepted order modulo the number accepted so far.
#[derive(Clone, Copy, Debug)]
pub enum Op {
    Limit { side: Side, price: Price, qty: Qty, owner: Owner },
    Market { side: Side, qty: Qty, owner: Owner },
    Cancel(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefOrder {
    pub id: u64,
    pub side: Side,
    pub price: Price,
    pub qty: Qty,
    pub remaining: Qty,
    pub ts: u64,
    pub owner: Owner,
}

/// Quadratic reference matcher: every match rescans all resting orders.
#[derive(Clone, Debug)]
pub struct RefBook {
    pub orders: Vec<RefOrder>,
    pub trades: Vec<Trade>,
    next_id: u64,
    next_ts: u64,
}

impl RefBook {
    pub fn new(first_id: u64) -> Self {
        Self { orders: Vec::new(), trades: Vec::new(), next_id: first_id, next_ts: 0 }
    }

    pub fn limit(&mut self, side: Side, price: Price, qty: Qty, owner: Owner) -> u64 {
        let (id, ts) = self.accept();
        let left = self.take(side, Some(price), qty, id, ts, owner);
        if left > 0 {
            self.orders.push(RefOrder { id, side, price, qty, remaining: left, ts, owner });
        }
        id
    }

    pub fn market(&mut self, side: Side, qty: Qty, owner: Owner) -> u64 {
        let (id, ts) = self.accept();
        self.take(side, None, qty, id, ts, owner);
        id
    }

    pub fn cancel(&mut self, id: u64) {
        if let Some(pos) = self.orders.iter().position(|o| o.id == id) {
            self.orders.remove(pos);
            self.next_ts += 1;
        }
    }

    /// Resting orders sorted by side, price and arrival.
    pub fn resting(&self) -> Vec<RefOrder> {
        let mut v = self.orders.clone();
        v.sort_by_key(|o| (o.side, o.price, o.ts));
        v
    }

    fn accept(&mut self) -> (u64, u64) {
        let out = (self.next_id, self.next_ts);
        self.next_id += 1;
        self.next_ts += 1;
        out
    }

    fn take(&mut self, side: Side, limit: Option<Price>, mut qty: Qty, id: u64, ts: u64, owner: Owner) -> Qty {
        while qty > 0 {
            let mut best: Option<usize> = None;
            for (i, o) in self.orders.iter().enumerate() {
                if o.side == side {
                    continue;
                }
                let crosses = match (side, limit) {
                    (_, None) => true,
                    (Side::Buy, Some(l)) => o.price <= l,
                    (Side::Sell, Some(l)) => o.price >= l,
                };
                if !crosses {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => {
                        let cur = &self.orders[b];
                        let price_better = match side {
                            Side::Buy => o.price < cur.price,
                            Side::Sell => o.price > cur.price,
                        };
                        price_better || (o.price == cur.price && o.ts < cur.ts)
                    }
                };
                if better {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            if owner == Owner::Agent && self.orders[b].owner == Owner::Agent {
                self.orders.remove(b);
                continue;
            }
            let maker = &mut self.orders[b];
            let fill = qty.min(maker.remaining);
            maker.remaining -= fill;
            qty -= fill;
            self.trades.push(Trade {
                ts,
                price: maker.price,
                qty: fill,
                maker_id: exec_sim::book::OrderId(maker.id),
                taker_id: exec_sim::book::OrderId(id),
                aggressor_side: side,
                maker_owner: maker.owner,
                taker_owner: owner,
            });
            if maker.remaining == 0 {
                self.orders.remove(b);
            }
        }
        qty
    }
}

pub fn random_ops(rng: &mut StdRng, max_len: usize) -> Vec<Op> {
    let n = rng.random_range(1..=max_len);
    (0..n)
        .map(|_| {
            let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
            let owner = if rng.random_bool(0.3) { Owner::Agent } else { Owner::Background };
            match rng.random_range(0..10) {
                0..=4 => Op::Limit { side, price: rng.random_range(95..=105), qty: rng.random_range(1..=50), owner },
                5..=6 => Op::Market { side, qty: rng.random_range(1..=80), owner },
                _ => Op::Cancel(rng.random_range(0..1000)),
            }
        })
        .collect()
}

/// Run `ops` through the engine and the reference. Returns a description
/// of the first disagreement.
pub fn compare_with_reference(ops: &[Op]) -> Result<(), String> {
    let mut book = LimitOrderBook::new();
    let mut ids: Vec<u64> = Vec::new();
    let mut reference: Option<RefBook> = None;
    for (i, op) in ops.iter().enumerate() {
        match *op {
            Op::Limit { side, price, qty, owner } => {
                let sub = book.submit_limit(side, price, qty, owner).map_err(|e| e.to_string())?;
                let r = reference.get_or_insert_with(|| RefBook::new(sub.order_id.0));
                let rid = r.limit(side, price, qty, owner);
                if rid != sub.order_id.0 {
                    return Err(format!("op {i}: id {} vs reference {rid}", sub.order_id.0));
                }
                ids.push(rid);
            }
            Op::Market { side, qty, owner } => {
                let sub = book.submit_market(side, qty, owner).map_err(|e| e.to_string())?;
                let r = reference.get_or_insert_with(|| RefBook::new(sub.order_id.0));
                r.market(side, qty, owner);
                ids.push(sub.order_id.0);
            }
            Op::Cancel(k) => {
                if ids.is_empty() {
                    continue;
                }
                let id = ids[k % ids.len()];
                book.cancel(exec_sim::book::OrderId(id));
                if let Some(r) = reference.as_mut() {
                    r.cancel(id);
                }
            }
        }
    }
    let Some(reference) = reference else { return Ok(()) };
    if book.trades() != reference.trades.as_slice() {
        return Err(format!("trade logs differ: {} vs {} trades", book.trades().len(), reference.trades.len()));
    }
    let mut engine: Vec<RefOrder> = book
        .resting_orders()
        .map(|o| RefOrder {
            id: o.id.0,
            side: o.side,
            price: o.price,
            qty: o.qty,
            remaining: o.remaining,
            ts: o.ts,
            owner: o.owner,
        })
        .collect();
    engine.sort_by_key(|o| (o.side, o.price, o.ts));
    if engine != reference.resting() {
        return Err("final books differ".into());
    }
    book.validate()
}

/// Random finite-horizon MDP with `1..=max_states` states, `1..=max_actions`
/// actions and `1..=max_horizon` stages. Rewards are non-negative so that
/// power utilities apply. Action 2 sometimes copies action 0 to exercise
/// the tie rule.
pub fn random_mdp(rng: &mut StdRng, max_states: usize, max_actions: usize, max_horizon: usize) -> FiniteMdp {
    let n = rng.random_range(1..=max_states);
    let a = rng.random_range(1..=max_actions);
    let h = rng.random_range(1..=max_horizon);
    let mut mdp = FiniteMdp::new(n, a, Some(h));
    let copy_action = a == 3 && rng.random_bool(0.3);
    for s in 0..n {
        for act in 0..a {
            let src = if copy_action && act == 2 { 0 } else { act };
            let mut local = StdRng::seed_from_u64(rng.random::<u64>());
            if src != act {
                let next = mdp.transitions(s, 0).to_vec();
                mdp.set_transition(s, act, next.clone()).unwrap();
                for &(sn, _) in &next {
                    let d = mdp.reward(s, 0, sn).clone();
                    mdp.set_reward(s, act, sn, d).unwrap();
                }
                continue;
            }
            let k = local.random_range(1..=n.min(3));
            let mut targets: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = local.random_range(i..n);
                targets.swap(i, j);
            }
            targets.truncate(k);
            let weights: Vec<f64> = (0..k).map(|_| local.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let head: f64 = probs[..k - 1].iter().sum();
            probs[k - 1] = 1.0 - head;
            let next: Vec<(usize, f64)> = targets.iter().copied().zip(probs).collect();
            mdp.set_transition(s, act, next.clone()).unwrap();
            for &(sn, _) in &next {
                let dist = if local.random_bool(0.5) {
                    OutcomeDist::point(local.random_range(0.0..3.0))
                } else {
                    let p = local.random_range(0.1..0.9);
                    OutcomeDist::new(vec![(local.random_range(0.0..3.0), p), (local.random_range(0.0..3.0), 1.0 - p)])
                        .unwrap()
                };
                mdp.set_reward(s, act, sn, dist).unwrap();
            }
        }
    }
    if n > 1 && rng.random_bool(0.3) {
        mdp.set_terminal(n - 1);
    }
    mdp
}

/// Exact nested-CE value of a fixed non-stationary policy.
/// `policy[t * n + s]` is the action taken in state `s` at stage `t`.
pub fn evaluate_policy(mdp: &FiniteMdp, u: &UtilityFn, policy: &[usize], horizon: usize) -> Result<Vec<f64>, CerlError> {
    let n = mdp.n_states();
    let mut next = vec![0.0; n];
    let mut pairs = Vec::new();
    for t in (0..horizon).rev() {
        let mut cur = vec![0.0; n];
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            let a = policy[t * n + s];
            pairs.clear();
            for &(sn, p) in mdp.transitions(s, a) {
                let cont = if mdp.is_terminal(sn) { 0.0 } else { next[sn] };
                for &(r, pr) in mdp.reward(s, a, sn).outcomes() {
                    pairs.push((r + cont, p * pr));
                }
            }
            cur[s] = u.ce_weighted(&pairs)?;
        }
        next = cur;
    }
    Ok(next)
}

/// Optimal values and first-stage greedy actions by enumerating every
/// deterministic non-stationary policy.
pub struct BruteForce {
    pub values: Vec<f64>,
    /// `q[s][a]`: best value from `s` among policies whose first action in
    /// `s` is `a`.
    pub q: Vec<Vec<f64>>,
    pub policy: Vec<usize>,
}

pub fn brute_force(mdp: &FiniteMdp, u: &UtilityFn, horizon: usize) -> Result<BruteForce, CerlError> {
    let n = mdp.n_states();
    let a = mdp.n_actions();
    let digits = n * horizon;
    let mut q = vec![vec![f64::NEG_INFINITY; a]; n];
    let mut policy = vec![0usize; digits];
    loop {
        let v = evaluate_policy(mdp, u, &policy, horizon)?;
        for s in 0..n {
            let first = policy[s];
            if v[s] > q[s][first] {
                q[s][first] = v[s];
            }
        }
        let mut i = 0;
        loop {
            if i == digits {
                let values: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
                let policy = q
                    .iter()
                    .map(|row| {
                        let mut best = 0;
                        for (k, &x) in row.iter().enumerate().skip(1) {
                            if x > row[best] {
                                best = k;
                            }
                        }
                        best
                    })
                    .collect();
                let values = values.iter().enumerate().map(|(s, &x)| if mdp.is_terminal(s) { 0.0 } else { x }).collect();
                return Ok(BruteForce { values, q, policy });
            }
            policy[i] += 1;
            if policy[i] < a {
                break;
            }
            policy[i] = 0;
            i += 1;
        }
    }
}

/// Samples a `FiniteMdp` as an episodic environment starting in `start`.
pub struct MdpEnv {
    pub mdp: FiniteMdp,
    pub start: usize,
    state: usize,
    rng: CounterRng,
}

impl MdpEnv {
    pub fn new(mdp: FiniteMdp, start: usize) -> Self {
        Self { mdp, start, state: start, rng: CounterRng::new(0) }
    }

    fn pick(&mut self, weights: impl Iterator<Item = f64>) -> usize {
        let x = self.rng.open01();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights.enumerate() {
            acc += w;
            last = i;
            if x < acc {
                return i;
            }
        }
        last
    }
}

impl DiscreteEnv for MdpEnv {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    fn reset(&mut self, seed: u64) -> Result<usize, CerlError> {
        self.rng = CounterRng::new(seed);
        self.state = self.start;
        Ok(self.state)
    }

    fn step(&mut self, action: usize) -> Result<Transition, CerlError> {
        let trans = self.mdp.transitions(self.state, action).to_vec();
        let next = trans[self.pick(trans.iter().map(|t| t.1))].0;
        let dist = self.mdp.reward(self.state, action, next).clone();
        let k = self.pick(dist.outcomes().iter().map(|o| o.1));
        self.state = next;
        Ok(Transition { reward: dist.outcomes()[k].0, next_state: next, done: self.mdp.is_terminal(next) })
    }
}

/// One decision, two arms: A pays 2 or 0 with equal odds, B pays 1.
pub fn two_arm_bandit() -> FiniteMdp {
    let mut m = FiniteMdp::new(2, 2, None);
    m.set_transition(0, 0, vec![(1, 1.0)]).unwrap();
    m.set_transition(0, 1, vec![(1, 1.0)]).unwrap();
    m.set_reward(0, 0, 1, OutcomeDist::new(vec![(2.0, 0.5), (0.0, 0.5)]).unwrap()).unwrap();
    m.set_reward(0, 1, 1, OutcomeDist::point(1.0)).unwrap();
    m.set_terminal(1);
    m
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
