use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::{sample_params, ParamSpace, Point, SearchError};
use crate::cerl::UtilityFn;
use crate::rng::derive_key;

/// Episodic objective. Must be deterministic given `(params, seed)`.
pub trait Objective: Sync {
    fn evaluate(&self, params: &[super::ParamValue], seed: u64) -> Result<f64, String>;
}

impl<F> Objective for F
where
    F: Fn(&[super::ParamValue], u64) -> Result<f64, String> + Sync,
{
    fn evaluate(&self, params: &[super::ParamValue], seed: u64) -> Result<f64, String> {
        self(params, seed)
    }
}

/// Seed of episode `episode` of `seed` inside a trial.
pub fn trial_episode_seed(seed: u64, episode: u64) -> u64 {
    derive_key(&[seed, episode, 0x7121])
}

/// Run `episodes` episodes for each seed and return the per-episode
/// results in (seed, episode) order. Non-finite results count as failures.
pub fn run_trial_samples<O: Objective + ?Sized>(
    objective: &O,
    params: &[super::ParamValue],
    seeds: &[u64],
    episodes: u64,
) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(seeds.len() * episodes as usize);
    for &s in seeds {
        for e in 0..episodes {
            let x = objective.evaluate(params, trial_episode_seed(s, e))?;
            if !x.is_finite() {
                return Err(format!("objective returned {x}"));
            }
            out.push(x);
        }
    }
    Ok(out)
}

/// Aggregate episode results: the certainty equivalent under `utility`
/// when given, else the mean.
pub fn estimate(samples: &[f64], utility: Option<&UtilityFn>) -> Result<f64, String> {
    if samples.is_empty() {
        return Err("no episodes".into());
    }
    match utility {
        Some(u) => u.ce_samples(samples).map_err(|e| e.to_string()),
        None => Ok(samples.iter().sum::<f64>() / samples.len() as f64),
    }
}

/// Utility estimate of one parameter point over `seeds × episodes`.
pub fn run_trial<O: Objective + ?Sized>(
    objective: &O,
    params: &[super::ParamValue],
    seeds: &[u64],
    episodes: u64,
    utility: Option<&UtilityFn>,
) -> Result<f64, String> {
    estimate(&run_trial_samples(objective, params, seeds, episodes)?, utility)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalvingConfig {
    pub n_initial: usize,
    #[serde(default = "default_reduction")]
    pub reduction_factor: usize,
    pub rungs: usize,
    /// New episodes per surviving trial at each rung. Estimates pool all
    /// episodes a trial has run so far.
    pub episodes_per_rung: Vec<u64>,
}

fn default_reduction() -> usize {
    4
}

impl HalvingConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        if self.reduction_factor < 2 {
            return bad(format!("reduction_factor must be >= 2, got {}", self.reduction_factor));
        }
        if self.rungs == 0 {
            return bad("rungs must be >= 1".into());
        }
        if self.episodes_per_rung.len() != self.rungs {
            return bad(format!("episodes_per_rung has {} entries for {} rungs", self.episodes_per_rung.len(), self.rungs));
        }
        if self.episodes_per_rung[0] == 0 {
            return bad("episodes_per_rung must start at >= 1".into());
        }
        if self.episodes_per_rung.windows(2).any(|w| w[1] < w[0]) {
            return bad("episodes_per_rung must be non-decreasing".into());
        }
        let needed = (self.reduction_factor as u128).checked_pow(self.rungs as u32 - 1);
        if needed.is_none_or(|n| (self.n_initial as u128) < n) {
            return bad(format!(
                "n_initial = {} is below reduction_factor^(rungs-1); the last rung would be empty",
                self.n_initial
            ));
        }
        Ok(())
    }

    /// Trials evaluated at each rung.
    pub fn survivors(&self) -> Vec<usize> {
        let mut n = self.n_initial;
        (0..self.rungs)
            .map(|r| {
                if r > 0 {
                    n = n.div_ceil(self.reduction_factor);
                }
                n
            })
            .collect()
    }

    /// Upper bound on episodes the study can consume.
    pub fn budget(&self) -> u64 {
        self.survivors().iter().zip(&self.episodes_per_rung).map(|(&n, &e)| n as u64 * e).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pending,
    Running,
    Stopped,
    Completed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Point,
    /// Last rung this trial was evaluated at.
    pub rung: Option<usize>,
    pub episodes_run: u64,
    pub utility_estimate: Option<f64>,
    pub status: TrialStatus,
    pub error: Option<String>,
    samples: Vec<f64>,
}

impl Trial {
    fn new(index: usize, params: Point) -> Self {
        Self {
            index,
            params,
            rung: None,
            episodes_run: 0,
            utility_estimate: None,
            status: TrialStatus::Pending,
            error: None,
            samples: Vec::new(),
        }
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// One evaluation of one trial at one rung.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub trial_index: usize,
    pub rung: usize,
    pub params: Point,
    pub episodes: u64,
    pub utility: Option<f64>,
    pub status: TrialStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub best: Trial,
    pub trials: Vec<Trial>,
    pub ledger: Vec<LedgerRow>,
    pub total_episodes: u64,
}

/// Everything needed to continue a study after the last finished rung.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    seed: u64,
    config: HalvingConfig,
    space: ParamSpace,
    utility: Option<UtilityFn>,
    completed_rungs: usize,
    alive: Vec<usize>,
    trials: Vec<Trial>,
    ledger: Vec<LedgerRow>,
}

/// Execution knobs that do not affect results.
#[derive(Clone, Debug, Default)]
pub struct StudyOptions {
    /// Worker threads; 0 means 1.
    pub workers: usize,
    /// Write a JSON checkpoint here after every rung.
    pub checkpoint: Option<PathBuf>,
    /// Continue from `checkpoint` if it exists.
    pub resume: bool,
    /// Return early after this many rungs, leaving the checkpoint behind.
    pub stop_after_rungs: Option<usize>,
}

/// Successive halving over `cfg.n_initial` points drawn from `space`.
///
/// Each rung runs the alive trials for `episodes_per_rung[r]` more
/// episodes (seeds derived from `(seed, trial, rung)`), then keeps the top
/// `⌈n / η⌉` by estimate with ties to the lower trial index and failed
/// trials last. The winner is the best trial of the final rung.
pub fn successive_halving<O: Objective + ?Sized>(
    objective: &O,
    space: &ParamSpace,
    cfg: &HalvingConfig,
    utility: Option<&UtilityFn>,
    seed: u64,
    opts: &StudyOptions,
) -> Result<StudyResult, SearchError> {
    cfg.validate()?;
    let mut state = match (&opts.checkpoint, opts.resume) {
        (Some(path), true) if path.exists() => {
            let cp = load_checkpoint(path)?;
            if cp.seed != seed || &cp.config != cfg || &cp.space != space || cp.utility.as_ref() != utility {
                return Err(SearchError::Checkpoint(format!(
                    "{} was written by a different study",
                    path.display()
                )));
            }
            cp
        }
        _ => Checkpoint {
            seed,
            config: cfg.clone(),
            space: space.clone(),
            utility: utility.cloned(),
            completed_rungs: 0,
            alive: (0..cfg.n_initial).collect(),
            trials: sample_params(space, cfg.n_initial, seed)?
                .into_iter()
                .enumerate()
                .map(|(i, p)| Trial::new(i, p))
                .collect(),
            ledger: Vec::new(),
        },
    };

    while state.completed_rungs < cfg.rungs {
        if opts.stop_after_rungs.is_some_and(|n| state.completed_rungs >= n) {
            return Err(SearchError::Interrupted { completed_rungs: state.completed_rungs });
        }
        run_rung(objective, &mut state, utility, opts.workers.max(1));
        if state.alive.is_empty() {
            return Err(SearchError::AllTrialsFailed { rung: state.completed_rungs - 1 });
        }
        if let Some(path) = &opts.checkpoint {
            save_checkpoint(path, &state)?;
        }
    }

    let trials = state.trials;
    let best_index = state.alive[0];
    let best = trials[best_index].clone();
    let total_episodes = trials.iter().map(|t| t.episodes_run).sum();
    Ok(StudyResult { best, trials, ledger: state.ledger, total_episodes })
}

fn run_rung<O: Objective + ?Sized>(objective: &O, state: &mut Checkpoint, utility: Option<&UtilityFn>, workers: usize) {
    let rung = state.completed_rungs;
    let episodes = state.config.episodes_per_rung[rung];
    let seed = state.seed;
    for &i in &state.alive {
        state.trials[i].status = TrialStatus::Running;
    }

    let jobs: Vec<(usize, Point)> = state.alive.iter().map(|&i| (i, state.trials[i].params.clone())).collect();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((i, params)) = jobs.get(k) else { break };
                let trial_seed = derive_key(&[seed, *i as u64, rung as u64]);
                let r = run_trial_samples(objective, params, &[trial_seed], episodes);
                if tx.send((*i, r)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut results: Vec<_> = rx.into_iter().collect();
    results.sort_by_key(|(i, _)| *i);
    for (i, r) in results {
        let t = &mut state.trials[i];
        t.rung = Some(rung);
        match r.and_then(|s| {
            t.samples.extend(s);
            estimate(&t.samples, utility)
        }) {
            Ok(est) => {
                t.episodes_run = t.samples.len() as u64;
                t.utility_estimate = Some(est);
            }
            Err(e) => {
                t.episodes_run = t.samples.len() as u64;
                t.utility_estimate = None;
                t.error = Some(e);
            }
        }
    }

    let mut ranked = state.alive.clone();
    ranked.sort_by(|&a, &b| {
        let (ta, tb) = (&state.trials[a], &state.trials[b]);
        let key = |t: &Trial| t.utility_estimate.filter(|_| !t.failed());
        match (key(ta), key(tb)) {
            (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(&b),
        }
    });
    let last = rung + 1 == state.config.rungs;
    let keep = if last { ranked.len() } else { ranked.len().div_ceil(state.config.reduction_factor) };
    for (pos, &i) in ranked.iter().enumerate() {
        let t = &mut state.trials[i];
        t.status = if t.failed() || pos >= keep {
            TrialStatus::Stopped
        } else if last {
            TrialStatus::Completed
        } else {
            TrialStatus::Running
        };
    }
    for &i in &state.alive {
        let t = &state.trials[i];
        state.ledger.push(LedgerRow {
            trial_index: i,
            rung,
            params: t.params.clone(),
            episodes: t.episodes_run,
            utility: t.utility_estimate,
            status: t.status,
        });
    }
    state.alive = ranked.into_iter().take(keep).filter(|&i| !state.trials[i].failed()).collect();
    state.completed_rungs += 1;
}

fn save_checkpoint(path: &Path, state: &Checkpoint) -> Result<(), SearchError> {
    let io = |e: std::io::Error| SearchError::Checkpoint(format!("{}: {e}", path.display()));
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    serde_json::to_writer(&mut f, state).map_err(|e| SearchError::Checkpoint(e.to_string()))?;
    f.flush().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, SearchError> {
    let text = std::fs::read_to_string(path).map_err(|e| SearchError::Checkpoint(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SearchError::Checkpoint(format!("{}: {e}", path.display())))
}

/// Ledger as CSV: `trial_index,rung,<param names…>,episodes,utility,status`.
pub fn write_ledger_csv<W: Write>(space: &ParamSpace, ledger: &[LedgerRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trial_index".to_string(), "rung".to_string()];
    header.extend(space.names().map(String::from));
    header.extend(["episodes", "utility", "status"].map(String::from));
    w.write_record(&header)?;
    for row in ledger {
        let mut rec = vec![row.trial_index.to_string(), row.rung.to_string()];
        rec.extend(row.params.iter().zip(&space.dims).map(|(v, d)| v.render(d)));
        rec.push(row.episodes.to_string());
        rec.push(row.utility.map(|u| u.to_string()).unwrap_or_default());
        rec.push(serde_json::to_value(row.status).expect("plain enum").as_str().unwrap_or_default().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
