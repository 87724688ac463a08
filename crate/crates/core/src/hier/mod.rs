//! Hierarchical execution agents.
//!
//! Options are tabular CE policies over a coarse view of the state, each
//! confined to a subset of the enumerated actions and trained on its own
//! short-horizon reward. A meta policy maps coarse states to options and
//! only re-decides when the current epoch ends, so an option stays in
//! control for several base steps.

mod coarse;
mod local;
mod meta;

pub use coarse::{coarse_state, CoarseState, Deviation, SpreadBucket, FRACTION_BINS, N_BUCKETS, SCHEDULE_BAND};
pub use local::{
    train_flat, train_local, CoarseEnv, FlatCePolicy, LocalPolicy, LocalPolicySpec, LocalReward, RewardSource,
    Termination,
};
pub use meta::{read_selector_csv, run_hierarchical, write_selector_csv, EpochRule, HierarchicalAgent, MetaPolicy};

use thiserror::Error;

use crate::cerl::CerlError;
use crate::env::EnvError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierError {
    #[error("local policy {name}: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
    #[error("invalid meta policy: {0}")]
    InvalidMeta(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Cerl(#[from] CerlError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::Side;
    use crate::cerl::{QLearningConfig, QTable, UtilityFn};
    use crate::env::{rollout, EnvConfig, Episode, ExecEnv, ParentOrder, TraceRow};
    use crate::flow::FlowConfig;

    fn env() -> ExecEnv {
        let parent = ParentOrder { side: Side::Buy, total_qty: 300, horizon: 40, pov_target: 0.1 };
        ExecEnv::new(FlowConfig::default(), EnvConfig::default(), parent, 0).unwrap()
    }

    fn options() -> Vec<LocalPolicy> {
        let e = env();
        let cfg = QLearningConfig { episodes: 300, seed: 11, ..QLearningConfig::default() };
        vec![
            train_local(&e, &LocalPolicySpec::passive_placer(), &UtilityFn::Identity, &cfg).unwrap(),
            train_local(&e, &LocalPolicySpec::aggressive_taker(), &UtilityFn::Identity, &cfg).unwrap(),
        ]
    }

    #[test]
    fn meta_validation() {
        let opts = options();
        assert!(MetaPolicy::new(vec![], vec![0; N_BUCKETS], EpochRule::OptionTermination).is_err());
        assert!(MetaPolicy::new(opts.clone(), vec![0; 5], EpochRule::OptionTermination).is_err());
        assert!(MetaPolicy::new(opts.clone(), vec![2; N_BUCKETS], EpochRule::OptionTermination).is_err());
        assert!(MetaPolicy::constant(opts.clone(), 0, EpochRule::FixedSteps { steps: 0 }).is_err());
        assert!(MetaPolicy::constant(opts, 1, EpochRule::OptionTermination).is_ok());
    }

    #[test]
    fn single_option_matches_flat_run() {
        let opts = options();
        let mut e = env();
        for which in 0..2 {
            let meta = MetaPolicy::constant(vec![opts[which].clone()], 0, EpochRule::OptionTermination).unwrap();
            let mut agent = HierarchicalAgent::new(meta);
            let mut flat = opts[which].clone();
            for seed in 0..5 {
                let h = run_hierarchical(&mut e, &mut agent, seed).unwrap();
                let f = rollout(&mut e, seed, &mut flat).unwrap();
                assert!(h.trace.iter().all(|r| r.option == Some(0)));
                let strip = |ep: &Episode| {
                    ep.trace.iter().map(|r| TraceRow { option: None, ..r.clone() }).collect::<Vec<_>>()
                };
                assert_eq!(strip(&h), strip(&f));
                assert_eq!(h.outcome, f.outcome);
                assert_eq!(h.option_switches, Some(0));
            }
        }
    }

    #[test]
    fn fixed_epochs_switch_on_multiples() {
        let opts = options();
        let table = [1, 0, 0, 1, 0, 0];
        let meta = MetaPolicy::by_deviation_and_spread(opts, &table, EpochRule::FixedSteps { steps: 5 }).unwrap();
        let mut agent = HierarchicalAgent::new(meta);
        let mut e = env();
        let mut saw_switch = false;
        for seed in 0..20 {
            let ep = run_hierarchical(&mut e, &mut agent, seed).unwrap();
            for w in ep.trace.windows(2) {
                if w[0].option != w[1].option {
                    saw_switch = true;
                    assert_eq!(w[1].step % 5, 0);
                }
            }
        }
        assert!(saw_switch);
    }

    #[test]
    fn actions_stay_in_active_option_subspace() {
        let opts = options();
        let meta = MetaPolicy::behind_rule(opts.clone(), 1, 0, EpochRule::OptionTermination).unwrap();
        let mut agent = HierarchicalAgent::new(meta);
        let mut e = env();
        for seed in 0..10 {
            let ep = run_hierarchical(&mut e, &mut agent, seed).unwrap();
            for r in &ep.trace {
                let o = r.option.unwrap();
                assert!(opts[o].spec.action_subspace.contains(&r.action_index));
            }
        }
    }

    #[test]
    fn selector_csv_round_trip() {
        let sel: Vec<usize> = (0..N_BUCKETS).map(|i| i % 3).collect();
        let mut buf = Vec::new();
        write_selector_csv(&sel, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("remaining_bin,time_bin,deviation,spread,option\n0,0,behind,tight,0\n0,0,behind,wide,1\n"));
        assert_eq!(read_selector_csv(&buf[..]).unwrap(), sel);
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(read_selector_csv(truncated.as_bytes()).is_err());
    }

    #[test]
    fn local_policy_rejects_mismatched_table() {
        let t = QTable::new(N_BUCKETS, 4, &UtilityFn::Identity).unwrap();
        assert!(LocalPolicy::new(LocalPolicySpec::aggressive_taker(), t).is_err());
    }
}
