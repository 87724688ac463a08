mod common;

use common::mean_se;
use exec_sim::book::{Owner, Side};
use exec_sim::flow::{FlowConfig, SimState};
use statrs::distribution::{Binomial, DiscreteCDF};

fn mid_or_reference(sim: &SimState) -> f64 {
    sim.book.mid().unwrap_or(sim.reference_price() as f64)
}

/// One-sided p-value of seeing at least `wins` successes in `n` fair trials.
fn sign_test(wins: u64, n: u64) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    1.0 - Binomial::new(0.5, n).unwrap().cdf(wins - 1)
}

#[test]
fn symmetric_flow_has_no_drift() {
    let cfg = FlowConfig::default();
    let init = cfg.init_mid as f64;
    let drifts: Vec<f64> = (0..200)
        .map(|seed| {
            let mut sim = SimState::new(cfg.clone(), seed).unwrap();
            let mut total = 0.0;
            for _ in 0..500 {
                sim.step_background();
                total += mid_or_reference(&sim) - init;
            }
            total / 500.0
        })
        .collect();
    let (mean, se) = mean_se(&drifts);
    assert!(se > 0.0);
    assert!(mean.abs() <= 3.0 * se, "mean time-averaged mid change {mean} with se {se}");
}

#[test]
fn buying_burst_lifts_the_mid() {
    let cfg = FlowConfig::default();
    let (mut wins, mut decided) = (0, 0);
    for seed in 0..200 {
        let mut base = SimState::new(cfg.clone(), seed).unwrap();
        let mut hit = base.clone();
        let (mut a, mut b) = (0.0, 0.0);
        for step in 0..40 {
            if step < 5 {
                hit.book.submit_market(Side::Buy, 60, Owner::Agent).unwrap();
            }
            base.step_background();
            hit.step_background();
            if step >= 5 {
                a += mid_or_reference(&hit);
                b += mid_or_reference(&base);
            }
        }
        if a != b {
            decided += 1;
            wins += u64::from(a > b);
        }
    }
    let p = sign_test(wins, decided);
    assert!(p < 0.05, "{wins}/{decided} seeds higher after the burst, p = {p}");
}

#[test]
fn steady_buying_depletes_the_ask_side() {
    let cfg = FlowConfig::default();
    let (mut drift_up, mut thinner_asks) = (0u64, 0u64);
    let runs = 1000;
    for seed in 0..runs {
        let mut sim = SimState::new(cfg.clone(), seed).unwrap();
        let start = sim.reference_price();
        for _ in 0..20 {
            sim.book.submit_market(Side::Buy, 30, Owner::Agent).unwrap();
            sim.step_background();
        }
        let depth = sim.book.depth(usize::MAX);
        let asks: u64 = depth.asks.iter().map(|l| l.qty).sum();
        let bids: u64 = depth.bids.iter().map(|l| l.qty).sum();
        drift_up += u64::from(sim.reference_price() > start);
        thinner_asks += u64::from(asks < bids);
        sim.book.validate().unwrap();
    }
    assert!(sign_test(drift_up, runs) < 0.05, "mid rose in {drift_up}/{runs} runs");
    assert!(sign_test(thinner_asks, runs) < 0.05, "asks thinner in {thinner_asks}/{runs} runs");
}

#[test]
fn trajectories_depend_only_on_the_seed() {
    let run = |seed| {
        let mut sim = SimState::new(FlowConfig::default(), seed).unwrap();
        (0..100).flat_map(|_| sim.step_background()).collect::<Vec<_>>()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}
