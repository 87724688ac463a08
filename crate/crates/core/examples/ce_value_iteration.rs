//! Solve a three-step risky-versus-safe MDP with CE value iteration and show
//! how the optimal first action changes with risk aversion.

use exec_sim::cerl::{ce_value_iteration, FiniteMdp, OutcomeDist, UtilityFn};

/// State 0 decides each step: action 0 is a coin flip paying 3 or 0,
/// action 1 pays 1.4 for sure. State 1 is absorbing.
fn gamble(horizon: usize) -> FiniteMdp {
    let mut m = FiniteMdp::new(2, 2, Some(horizon));
    m.set_transition(0, 0, vec![(0, 1.0)]).unwrap();
    m.set_transition(0, 1, vec![(0, 1.0)]).unwrap();
    m.set_reward(0, 0, 0, OutcomeDist::new(vec![(3.0, 0.5), (0.0, 0.5)]).unwrap()).unwrap();
    m.set_reward(0, 1, 0, OutcomeDist::point(1.4)).unwrap();
    m.set_terminal(1);
    m
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mdp = gamble(3);
    for u in [UtilityFn::Identity, UtilityFn::Exponential { lambda: 0.05 }, UtilityFn::Exponential { lambda: 1.0 }] {
        let sol = ce_value_iteration(&mdp, &u)?;
        let plan: Vec<&str> =
            sol.stages.iter().map(|s| if s.policy[0] == 0 { "gamble" } else { "safe" }).collect();
        println!("{:<36} value {:.4}  plan {:?}", format!("{u:?}"), sol.values[0], plan);
    }
    Ok(())
}
