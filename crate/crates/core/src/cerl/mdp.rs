use std::collections::BTreeMap;

use super::{CerlError, OutcomeDist, Utility, UtilityFn};

/// Small exact decision process with stochastic rewards.
///
/// Unset `(s, a)` pairs stay in place with zero reward. Terminal states are
/// absorbing with zero reward.
#[derive(Clone, Debug)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<(usize, f64)>>,
    rewards: BTreeMap<(usize, usize, usize), OutcomeDist>,
    terminal: Vec<bool>,
    horizon: Option<usize>,
    zero: OutcomeDist,
}

impl FiniteMdp {
    pub fn new(n_states: usize, n_actions: usize, horizon: Option<usize>) -> Self {
        let transitions = (0..n_states * n_actions).map(|i| vec![(i / n_actions, 1.0)]).collect();
        Self {
            n_states,
            n_actions,
            transitions,
            rewards: BTreeMap::new(),
            terminal: vec![false; n_states],
            horizon,
            zero: OutcomeDist::point(0.0),
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn set_transition(&mut self, s: usize, a: usize, next: Vec<(usize, f64)>) -> Result<(), CerlError> {
        self.check_sa(s, a)?;
        if next.is_empty() || next.iter().any(|&(n, p)| n >= self.n_states || !(p > 0.0)) {
            return Err(CerlError::InvalidDist(format!("transition from ({s}, {a})")));
        }
        let total: f64 = next.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CerlError::InvalidDist(format!("transition from ({s}, {a}) sums to {total}")));
        }
        self.transitions[s * self.n_actions + a] = next;
        Ok(())
    }

    pub fn set_reward(&mut self, s: usize, a: usize, next: usize, dist: OutcomeDist) -> Result<(), CerlError> {
        self.check_sa(s, a)?;
        if next >= self.n_states {
            return Err(CerlError::InvalidArgument(format!("next state {next} out of range")));
        }
        self.rewards.insert((s, a, next), dist);
        Ok(())
    }

    /// Mark `s` terminal, replacing its dynamics with a zero-reward self loop.
    pub fn set_terminal(&mut self, s: usize) {
        self.terminal[s] = true;
        for a in 0..self.n_actions {
            self.transitions[s * self.n_actions + a] = vec![(s, 1.0)];
            self.rewards.remove(&(s, a, s));
        }
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn reward(&self, s: usize, a: usize, next: usize) -> &OutcomeDist {
        self.rewards.get(&(s, a, next)).unwrap_or(&self.zero)
    }

    fn check_sa(&self, s: usize, a: usize) -> Result<(), CerlError> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(CerlError::InvalidArgument(format!("({s}, {a}) out of range")));
        }
        Ok(())
    }

    /// Non-terminal states ordered so every successor comes first, or an
    /// error if some non-terminal state can revisit itself.
    fn successor_first_order(&self) -> Result<Vec<usize>, CerlError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        let mut mark = vec![Mark::New; self.n_states];
        let mut order = Vec::with_capacity(self.n_states);
        for root in 0..self.n_states {
            if self.terminal[root] || mark[root] != Mark::New {
                continue;
            }
            // Iterative DFS: (state, next successor slot to visit).
            let succ = |s: usize| -> Vec<usize> {
                let mut v: Vec<usize> = (0..self.n_actions)
                    .flat_map(|a| self.transitions(s, a).iter().map(|&(n, _)| n))
                    .filter(|&n| !self.terminal[n])
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            let mut stack = vec![(root, succ(root), 0usize)];
            mark[root] = Mark::Open;
            while let Some(top) = stack.last_mut() {
                if top.2 < top.1.len() {
                    let n = top.1[top.2];
                    top.2 += 1;
                    match mark[n] {
                        Mark::Open => {
                            return Err(CerlError::Unsupported(format!(
                                "state {n} can recur without a horizon; episodes are not guaranteed to end"
                            )))
                        }
                        Mark::New => {
                            mark[n] = Mark::Open;
                            let sn = succ(n);
                            stack.push((n, sn, 0));
                        }
                        Mark::Done => {}
                    }
                } else {
                    let s = top.0;
                    mark[s] = Mark::Done;
                    order.push(s);
                    stack.pop();
                }
            }
        }
        Ok(order)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ViOptions {
    /// Exogenous discount for comparisons with classical RL. `None` means
    /// undiscounted.
    pub discount: Option<f64>,
}

/// Per-stage solution; stage `t` holds the values with `H - t` steps to go.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub q: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CeSolution {
    /// Values and greedy policy at the first decision.
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub q: Vec<Vec<f64>>,
    /// One entry per decision epoch for finite horizons; a single stationary
    /// entry for absorbing processes.
    pub stages: Vec<Stage>,
}

pub fn ce_value_iteration(mdp: &FiniteMdp, u: &UtilityFn) -> Result<CeSolution, CerlError> {
    ce_value_iteration_with(mdp, u, ViOptions::default())
}

/// Backward induction of the CE Bellman recursion. Ties go to the lowest
/// action index.
pub fn ce_value_iteration_with(mdp: &FiniteMdp, u: &UtilityFn, opts: ViOptions) -> Result<CeSolution, CerlError> {
    u.validate()?;
    let gamma = opts.discount.unwrap_or(1.0);
    let stages = match mdp.horizon {
        Some(h) => {
            let mut next_values = vec![0.0; mdp.n_states];
            let mut stages = Vec::with_capacity(h);
            for _ in 0..h {
                let mut stage = Stage {
                    q: vec![vec![0.0; mdp.n_actions]; mdp.n_states],
                    values: vec![0.0; mdp.n_states],
                    policy: vec![0; mdp.n_states],
                };
                for s in 0..mdp.n_states {
                    if !mdp.terminal[s] {
                        fill_state(mdp, u, gamma, s, &next_values, &mut stage)?;
                    }
                }
                next_values = stage.values.clone();
                stages.push(stage);
            }
            stages.reverse();
            stages
        }
        None => {
            let order = mdp.successor_first_order()?;
            let mut stage = Stage {
                q: vec![vec![0.0; mdp.n_actions]; mdp.n_states],
                values: vec![0.0; mdp.n_states],
                policy: vec![0; mdp.n_states],
            };
            for s in order {
                let values = stage.values.clone();
                fill_state(mdp, u, gamma, s, &values, &mut stage)?;
            }
            vec![stage]
        }
    };
    let (values, policy, q) = match stages.first() {
        Some(st) => (st.values.clone(), st.policy.clone(), st.q.clone()),
        None => (
            vec![0.0; mdp.n_states],
            vec![0; mdp.n_states],
            vec![vec![0.0; mdp.n_actions]; mdp.n_states],
        ),
    };
    Ok(CeSolution { values, policy, q, stages })
}

fn fill_state(
    mdp: &FiniteMdp,
    u: &UtilityFn,
    gamma: f64,
    s: usize,
    next_values: &[f64],
    stage: &mut Stage,
) -> Result<(), CerlError> {
    let mut pairs = Vec::new();
    for a in 0..mdp.n_actions {
        pairs.clear();
        for &(n, p) in mdp.transitions(s, a) {
            let cont = if mdp.terminal[n] { 0.0 } else { gamma * next_values[n] };
            for &(r, pr) in mdp.reward(s, a, n).outcomes() {
                pairs.push((r + cont, p * pr));
            }
        }
        stage.q[s][a] = u.ce_weighted(&pairs)?;
    }
    let best = argmax_lowest(&stage.q[s]);
    stage.policy[s] = best;
    stage.values[s] = stage.q[s][best];
    Ok(())
}

/// Index of the maximum, lowest index on ties.
pub(crate) fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
