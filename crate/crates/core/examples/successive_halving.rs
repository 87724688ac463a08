//! Tune two parameters of a noisy objective with successive halving and
//! print how the budget was spent.

use exec_sim::search::{successive_halving, Dim, HalvingConfig, ParamSpace, ParamValue, StudyOptions};
use exec_sim::rng::CounterRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = ParamSpace::new(vec![
        Dim::continuous("aggression", 0.0, 1.0),
        Dim::categorical("venue", ["lit", "dark", "mixed"]),
    ]);
    let objective = |p: &[ParamValue], seed: u64| {
        let a = p[0].as_real().ok_or("aggression is continuous")?;
        let venue_bonus = [0.0, 0.05, 0.1][p[1].as_choice().ok_or("venue is categorical")?];
        let noise = CounterRng::new(seed).open01() - 0.5;
        Ok(-(a - 0.35).powi(2) + venue_bonus + 0.2 * noise)
    };
    let cfg = HalvingConfig { n_initial: 27, reduction_factor: 3, rungs: 3, episodes_per_rung: vec![4, 8, 16] };
    let study = successive_halving(&objective, &space, &cfg, None, 42, &StudyOptions { workers: 4, ..Default::default() })?;

    for (rung, n) in cfg.survivors().iter().enumerate() {
        println!("rung {rung}: {n} trials, {} new episodes each", cfg.episodes_per_rung[rung]);
    }
    println!("episodes used {} of a {} budget", study.total_episodes, cfg.budget());
    let best = &study.best;
    let rendered: Vec<String> = best.params.iter().zip(&space.dims).map(|(v, d)| format!("{}={}", d.name(), v.render(d))).collect();
    println!("best trial #{}: {} estimate {:.4}", best.index, rendered.join(" "), best.utility_estimate.unwrap_or(f64::NAN));
    Ok(())
}
