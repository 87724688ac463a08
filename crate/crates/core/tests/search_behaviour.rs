use exec_sim::search::{
    run_trial, sample_params, successive_halving, Dim, HalvingConfig, ParamSpace, ParamValue, SearchError, StudyOptions,
    TrialStatus,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn coin(_: &[ParamValue], seed: u64) -> Result<f64, String> {
    Ok(if StdRng::seed_from_u64(seed).random_bool(0.5) { 1.0 } else { 0.0 })
}

fn plane() -> ParamSpace {
    ParamSpace::new(vec![Dim::continuous("x", -1.0, 1.0), Dim::continuous("y", -1.0, 1.0)])
}

fn quadratic(cx: f64, cy: f64) -> impl Fn(&[ParamValue], u64) -> Result<f64, String> + Sync {
    move |p, _| {
        let (x, y) = (p[0].as_real().unwrap(), p[1].as_real().unwrap());
        Ok(-((x - cx).powi(2) + 2.0 * (y - cy).powi(2)))
    }
}

fn noisy(p: &[ParamValue], seed: u64) -> Result<f64, String> {
    let x = p[0].as_real().unwrap();
    Ok(-x * x + StdRng::seed_from_u64(seed).random_range(-0.3..0.3))
}

fn config() -> HalvingConfig {
    HalvingConfig { n_initial: 27, reduction_factor: 3, rungs: 3, episodes_per_rung: vec![2, 4, 8] }
}

#[test]
fn bernoulli_objective_estimates_one_half() {
    let est = run_trial(&coin, &[], &[42], 1000, None).unwrap();
    assert!((est - 0.5).abs() <= 0.05, "estimate {est}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn halving_on_a_deterministic_objective_matches_exhaustive(
        cx in -1.0..1.0f64,
        cy in -1.0..1.0f64,
        seed in any::<u64>(),
    ) {
        let f = quadratic(cx, cy);
        let cfg = HalvingConfig { n_initial: 32, reduction_factor: 2, rungs: 4, episodes_per_rung: vec![1, 1, 2, 2] };
        let result = successive_halving(&f, &plane(), &cfg, None, seed, &StudyOptions::default()).unwrap();
        let points = sample_params(&plane(), cfg.n_initial, seed).unwrap();
        let values: Vec<f64> = points.iter().map(|p| f(p, 0).unwrap()).collect();
        let best = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
        prop_assert_eq!(result.best.index, best);
    }
}

#[test]
fn survivors_shrink_by_the_reduction_factor() {
    let cfg = config();
    let space = ParamSpace::new(vec![Dim::continuous("x", -1.0, 1.0)]);
    let result = successive_halving(&noisy, &space, &cfg, None, 9, &StudyOptions::default()).unwrap();
    for (rung, &n) in cfg.survivors().iter().enumerate() {
        assert_eq!(result.ledger.iter().filter(|r| r.rung == rung).count(), n);
    }
    assert_eq!(cfg.survivors(), vec![27, 9, 3]);
    assert_eq!(result.total_episodes, cfg.budget());
    assert_eq!(result.best.status, TrialStatus::Completed);
    assert_eq!(result.best.episodes_run, 2 + 4 + 8);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let space = ParamSpace::new(vec![Dim::continuous("x", -1.0, 1.0)]);
    let run = |workers| {
        let opts = StudyOptions { workers, ..StudyOptions::default() };
        successive_halving(&noisy, &space, &config(), None, 4, &opts).unwrap()
    };
    let one = run(1);
    for workers in [2, 5] {
        assert_eq!(run(workers), one);
    }
}

#[test]
fn resuming_from_a_checkpoint_reproduces_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let space = ParamSpace::new(vec![Dim::continuous("x", -1.0, 1.0)]);
    let straight = successive_halving(&noisy, &space, &config(), None, 8, &StudyOptions::default()).unwrap();

    let checkpoint = Some(dir.path().join("study.json"));
    let first = StudyOptions { checkpoint: checkpoint.clone(), stop_after_rungs: Some(1), ..StudyOptions::default() };
    match successive_halving(&noisy, &space, &config(), None, 8, &first) {
        Err(SearchError::Interrupted { completed_rungs: 1 }) => {}
        other => panic!("expected an interruption, got {other:?}"),
    }
    let second = StudyOptions { checkpoint, resume: true, ..StudyOptions::default() };
    let resumed = successive_halving(&noisy, &space, &config(), None, 8, &second).unwrap();
    assert_eq!(resumed, straight);
}

#[test]
fn checkpoint_from_another_study_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let space = ParamSpace::new(vec![Dim::continuous("x", -1.0, 1.0)]);
    let path = Some(dir.path().join("study.json"));
    let opts = StudyOptions { checkpoint: path.clone(), stop_after_rungs: Some(1), ..StudyOptions::default() };
    let _ = successive_halving(&noisy, &space, &config(), None, 1, &opts);
    let resume = StudyOptions { checkpoint: path, resume: true, ..StudyOptions::default() };
    let err = successive_halving(&noisy, &space, &config(), None, 2, &resume).unwrap_err();
    assert!(matches!(err, SearchError::Checkpoint(_)), "{err:?}");
}

#[test]
fn failing_trials_are_dropped_not_fatal() {
    let space = ParamSpace::new(vec![Dim::continuous("x", -1.0, 1.0)]);
    let flaky = |p: &[ParamValue], seed: u64| {
        let x = p[0].as_real().unwrap();
        if x > 0.0 {
            Err(format!("x = {x} is out of bounds"))
        } else {
            noisy(p, seed)
        }
    };
    let result = successive_halving(&flaky, &space, &config(), None, 6, &StudyOptions::default()).unwrap();
    assert!(result.best.params[0].as_real().unwrap() <= 0.0);
    assert!(result.trials.iter().any(|t| t.failed() && t.status == TrialStatus::Stopped));
    assert!(result.ledger.iter().filter(|r| r.rung > 0).all(|r| !result.trials[r.trial_index].failed()));
}

#[test]
fn all_failing_trials_is_an_error() {
    let space = ParamSpace::new(vec![Dim::continuous("x", -1.0, 1.0)]);
    let broken = |_: &[ParamValue], _: u64| -> Result<f64, String> { Err("no market".into()) };
    let err = successive_halving(&broken, &space, &config(), None, 0, &StudyOptions::default()).unwrap_err();
    assert!(matches!(err, SearchError::AllTrialsFailed { rung: 0 }), "{err:?}");
}

#[test]
fn non_finite_results_count_as_failures() {
    let nan = |_: &[ParamValue], _: u64| Ok(f64::NAN);
    assert!(run_trial(&nan, &[], &[1], 3, None).is_err());
}
