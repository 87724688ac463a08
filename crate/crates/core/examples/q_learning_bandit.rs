//! Learn a two-armed bandit with CE Q-learning. Arm A pays 2 or 0 with
//! equal odds, arm B pays 1. A risk-averse learner settles on B.

use exec_sim::cerl::{
    ce_q_learning, CerlError, DiscreteEnv, Exploration, LearningRate, QLearningConfig, Transition, UtilityFn,
};
use exec_sim::rng::CounterRng;

struct Bandit {
    rng: CounterRng,
}

impl DiscreteEnv for Bandit {
    fn n_states(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, seed: u64) -> Result<usize, CerlError> {
        self.rng = CounterRng::new(seed);
        Ok(0)
    }

    fn step(&mut self, action: usize) -> Result<Transition, CerlError> {
        let reward = match action {
            0 if self.rng.open01() < 0.5 => 2.0,
            0 => 0.0,
            _ => 1.0,
        };
        Ok(Transition { reward, next_state: 1, done: true })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = QLearningConfig {
        episodes: 10_000,
        learning_rate: LearningRate::InverseVisits { power: 1.0 },
        exploration: Exploration::Constant { epsilon: 0.3 },
        seed: 11,
        max_steps: 10,
    };
    for u in [UtilityFn::Identity, UtilityFn::Exponential { lambda: 1.0 }] {
        let q = ce_q_learning(&mut Bandit { rng: CounterRng::new(0) }, &u, &cfg)?;
        let arm = if q.greedy(0) == 0 { "A" } else { "B" };
        println!("{:<36} CE(A) {:.4}  CE(B) {:.4}  greedy {arm}", format!("{u:?}"), q.get(0, 0), q.get(0, 1));
    }
    println!("exact CARA(λ=1) CE of arm A: {:.4}", -((0.5 * (-2.0f64).exp() + 0.5).ln()));
    Ok(())
}
