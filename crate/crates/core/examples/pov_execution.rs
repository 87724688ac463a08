//! Execute a parent order with the participation-of-volume baseline and a
//! random policy on the same market seeds, and compare the outcomes.

use exec_sim::env::{rollout, EnvConfig, ExecEnv, ParentOrder, PovBaseline, RandomPolicy};
use exec_sim::flow::FlowConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parent = ParentOrder::default();
    let template = ExecEnv::new(FlowConfig::default(), EnvConfig::default(), parent, 0)?;
    println!("parent: {:?} {} shares over {} steps, target participation {}", parent.side, parent.total_qty, parent.horizon, parent.pov_target);
    println!("{:>5} {:>22} {:>22}", "seed", "pov (part., reward)", "random (part., reward)");
    for seed in 0..8 {
        let mut env = template.clone();
        let pov = rollout(&mut env, seed, &mut PovBaseline::for_env(&template))?;
        let rnd = rollout(&mut env, seed, &mut RandomPolicy::default())?;
        println!(
            "{seed:>5} {:>10.4} {:>11.4} {:>10.4} {:>11.4}",
            pov.outcome.participation, pov.outcome.total_reward, rnd.outcome.participation, rnd.outcome.total_reward
        );
    }

    let mut env = template.clone();
    let ep = rollout(&mut env, 3, &mut PovBaseline::for_env(&template))?;
    println!("\nfirst steps of seed 3 under PoV:");
    for row in ep.trace.iter().take(8) {
        println!("  step {:>2} action {:>2} filled {:>3} reward {:+.5}", row.step, row.action_index, row.filled, row.reward);
    }
    Ok(())
}
