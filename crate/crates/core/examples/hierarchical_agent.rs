//! Train the passive and aggressive options, compose them with a rule that
//! turns aggressive when the parent falls behind schedule, and compare with
//! each option on its own.

use exec_sim::cerl::{QLearningConfig, UtilityFn};
use exec_sim::env::{rollout, EnvConfig, ExecEnv, ParentOrder};
use exec_sim::flow::FlowConfig;
use exec_sim::hier::{train_local, EpochRule, HierarchicalAgent, LocalPolicySpec, MetaPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parent = ParentOrder { total_qty: 300, horizon: 60, ..ParentOrder::default() };
    let template = ExecEnv::new(FlowConfig::default(), EnvConfig::default(), parent, 0)?;
    let u = UtilityFn::Exponential { lambda: 0.05 };
    let cfg = QLearningConfig { episodes: 600, seed: 1, ..QLearningConfig::default() };
    let options = vec![
        train_local(&template, &LocalPolicySpec::passive_placer(), &u, &cfg)?,
        train_local(&template, &LocalPolicySpec::aggressive_taker(), &u, &cfg)?,
    ];

    let agents = [
        ("passive only", MetaPolicy::constant(options.clone(), 0, EpochRule::OptionTermination)?),
        ("aggressive only", MetaPolicy::constant(options.clone(), 1, EpochRule::OptionTermination)?),
        ("behind rule", MetaPolicy::behind_rule(options, 1, 0, EpochRule::FixedSteps { steps: 5 })?),
    ];
    for (name, meta) in agents {
        let (mut reward, mut filled, mut switches) = (0.0, 0.0, 0);
        let seeds = 0..30u64;
        for seed in seeds.clone() {
            let mut env = template.clone();
            let ep = rollout(&mut env, seed, &mut HierarchicalAgent::new(meta.clone()))?;
            reward += ep.outcome.total_reward;
            filled += ep.outcome.filled_fraction;
            switches += ep.option_switches.unwrap_or(0);
        }
        let n = seeds.count() as f64;
        println!("{name:<16} mean reward {:+.5}  filled {:.3}  switches/episode {:.1}", reward / n, filled / n, switches as f64 / n);
    }
    Ok(())
}
