use exec_sim::book::Side;
use exec_sim::cerl::{QLearningConfig, UtilityFn};
use exec_sim::env::{rollout, Decision, EnvConfig, ExecEnv, ExecPolicy, ParentOrder};
use exec_sim::flow::FlowConfig;
use exec_sim::hier::{
    coarse_state, train_local, Deviation, EpochRule, HierarchicalAgent, LocalPolicy, LocalPolicySpec, MetaPolicy,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const AGGRESSIVE_LARGE: usize = 9;

fn env_for(parent: ParentOrder) -> ExecEnv {
    ExecEnv::new(FlowConfig::default(), EnvConfig::default(), parent, 0).unwrap()
}

/// Mostly waits, so the parent drifts behind schedule.
struct Lazy {
    rng: StdRng,
}

impl ExecPolicy for Lazy {
    fn begin_episode(&mut self, seed: u64) {
        self.rng = StdRng::seed_from_u64(seed);
    }

    fn decide(&mut self, env: &ExecEnv) -> Decision {
        if self.rng.random_bool(0.9) {
            Decision::flat(0)
        } else {
            Decision::flat(self.rng.random_range(0..env.actions().len()))
        }
    }
}

/// Records the coarse state seen at every decision of the wrapped policy.
struct Recorder<P> {
    inner: P,
    states: Vec<exec_sim::hier::CoarseState>,
}

impl<P: ExecPolicy> ExecPolicy for Recorder<P> {
    fn begin_episode(&mut self, seed: u64) {
        self.inner.begin_episode(seed)
    }

    fn decide(&mut self, env: &ExecEnv) -> Decision {
        self.states.push(coarse_state(&env.observe()));
        self.inner.decide(env)
    }
}

#[test]
fn aggressive_taker_crosses_large_when_behind() {
    let template = env_for(ParentOrder::default());
    let taker = train_local(
        &template,
        &LocalPolicySpec::aggressive_taker(),
        &UtilityFn::Identity,
        &QLearningConfig { seed: 7, ..QLearningConfig::default() },
    )
    .unwrap();

    let mut env = template.clone();
    let mut recorder = Recorder { inner: Lazy { rng: StdRng::seed_from_u64(0) }, states: Vec::new() };
    for seed in 0..100 {
        rollout(&mut env, seed, &mut recorder).unwrap();
    }
    let behind: Vec<_> = recorder.states.iter().filter(|s| s.deviation == Deviation::Behind).collect();
    assert!(behind.len() > 1000, "only {} behind decisions", behind.len());
    let large = behind.iter().filter(|s| taker.act(***s) == AGGRESSIVE_LARGE).count();
    let freq = large as f64 / behind.len() as f64;
    assert!(freq >= 0.9, "aggressive large in {freq:.3} of {} behind decisions", behind.len());
}

fn small_options() -> (ExecEnv, Vec<LocalPolicy>) {
    let template = env_for(ParentOrder { side: Side::Buy, total_qty: 200, horizon: 50, pov_target: 0.1 });
    let cfg = QLearningConfig { episodes: 300, seed: 3, ..QLearningConfig::default() };
    let options = [LocalPolicySpec::passive_placer(), LocalPolicySpec::aggressive_taker()]
        .iter()
        .map(|spec| train_local(&template, spec, &UtilityFn::Identity, &cfg).unwrap())
        .collect();
    (template, options)
}

#[test]
fn behind_rule_selects_the_taker_exactly_when_behind() {
    let (template, options) = small_options();
    let meta = MetaPolicy::behind_rule(options, 1, 0, EpochRule::FixedSteps { steps: 1 }).unwrap();
    let mut env = template.clone();
    let (total, horizon) = (env.parent().total_qty as i64, env.parent().horizon as i64);

    let (mut decisions, mut taker, mut behind) = (0usize, 0usize, 0usize);
    for seed in 0..50 {
        let mut agent = HierarchicalAgent::new(meta.clone());
        let ep = rollout(&mut env, seed, &mut agent).unwrap();
        let mut filled = 0u64;
        for row in &ep.trace {
            // filled/total - step/horizon < -1/20, in integers
            let lhs = 20 * (filled as i64 * horizon - row.step as i64 * total);
            let is_behind = lhs < -(total * horizon);
            let chose_taker = row.option == Some(1);
            assert_eq!(chose_taker, is_behind, "seed {seed} step {}: filled {filled}", row.step);
            decisions += 1;
            taker += usize::from(chose_taker);
            behind += usize::from(is_behind);
            filled += row.filled;
        }
    }
    assert_eq!(taker, behind);
    assert!(behind > 0 && behind < decisions, "behind {behind} of {decisions}");
}

#[test]
fn hierarchical_episodes_are_reproducible() {
    let (template, options) = small_options();
    let meta = MetaPolicy::behind_rule(options, 1, 0, EpochRule::OptionTermination).unwrap();
    let mut env = template.clone();
    for seed in [1, 17, 99] {
        let a = rollout(&mut env, seed, &mut HierarchicalAgent::new(meta.clone())).unwrap();
        let b = rollout(&mut env, seed, &mut HierarchicalAgent::new(meta.clone())).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.option_switches, b.option_switches);
    }
}
