use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    replay_rows, read_trace, render_table, write_episodes_csv, write_replay_csv, write_summary_csv, AgentKind,
    EpisodeReport, ExpError, Experiment, StudySummary,
};
use crate::book::{write_events_jsonl, write_trades_csv};
use crate::cerl::{QLearningConfig, QTable};
use crate::env::{rollout, write_trace_csv, ExecEnv, ExecPolicy, PovBaseline, RandomPolicy};
use crate::hier::{
    read_selector_csv, train_flat, train_local, write_selector_csv, EpochRule, FlatCePolicy, HierarchicalAgent,
    LocalPolicy, LocalPolicySpec, MetaPolicy,
};
use crate::rng::derive_key;
use crate::search::{
    successive_halving, write_ledger_csv, Dim, Objective, ParamSpace, ParamValue, SearchError, StudyOptions,
};

/// Knobs that change how a run executes, never what it produces.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for seeds, trials and option training; 0 means 1.
    pub workers: usize,
    /// Continue an interrupted meta search from its checkpoint.
    pub resume: bool,
    /// Stop the meta search after this many rungs.
    pub stop_after_rungs: Option<usize>,
}

/// Locations of every artifact inside an output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn options_json(&self) -> PathBuf {
        self.root.join("policies/options.json")
    }

    pub fn option_table(&self, i: usize, name: &str) -> PathBuf {
        self.root.join(format!("policies/option_{i}_{name}.csv"))
    }

    pub fn flat_table(&self) -> PathBuf {
        self.root.join("policies/flat.csv")
    }

    pub fn selector(&self) -> PathBuf {
        self.root.join("policies/selector.csv")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("search/study.json")
    }

    pub fn ledger(&self) -> PathBuf {
        self.root.join("search/ledger.csv")
    }

    pub fn manifest(&self, command: &str) -> PathBuf {
        self.root.join(format!("manifest_{command}.json"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

/// Self-description written next to the outputs of every command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<ArtifactEntry>,
}

/// Files written by one command, relative to the output directory.
#[derive(Clone, Debug, Default)]
struct Writer {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), written: Vec::new() }
    }

    fn put(&mut self, path: &Path, bytes: &[u8]) -> Result<(), ExpError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        fs::write(path, bytes).map_err(|e| io_err(path, e))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn record(&mut self, path: &Path) {
        self.written.push(path.to_path_buf());
    }

    fn finish(mut self, command: &str, exp: &Experiment, seeds: Vec<u64>) -> Result<Vec<PathBuf>, ExpError> {
        self.written.sort();
        self.written.dedup();
        let mut artifacts = Vec::new();
        for p in &self.written {
            let bytes = fs::read(p).map_err(|e| io_err(p, e))?;
            let rel = p.strip_prefix(&self.root).unwrap_or(p);
            artifacts.push(ArtifactEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let manifest = Manifest {
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: exp.config_sha256.clone(),
            seeds,
            artifacts,
        };
        let path = Layout::new(&self.root).manifest(command);
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        self.put(&path, &json)?;
        Ok(self.written)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> ExpError {
    ExpError::Io { path: path.to_path_buf(), source: e }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing CSV to memory");
    buf
}

fn stage(name: &'static str) -> impl Fn(String) -> ExpError {
    move |message| ExpError::Stage { stage: name, message }
}

/// Fresh environment for the configured market and parent order.
pub fn template_env(exp: &Experiment) -> Result<ExecEnv, ExpError> {
    let c = &exp.config;
    ExecEnv::new(c.flow.clone(), c.env.clone(), c.parent, 0).map_err(|e| stage("setup")(e.to_string()))
}

/// Map `f` over `items` on up to `workers` threads, keeping input order.
fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(items.len()) {
            let tx = tx.clone();
            let (next, f) = (&next, &f);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(k) else { break };
                if tx.send((k, f(item))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut out: Vec<(usize, R)> = rx.into_iter().collect();
    out.sort_by_key(|(k, _)| *k);
    out.into_iter().map(|(_, r)| r).collect()
}

/// A ready-to-run agent of any kind.
#[derive(Clone, Debug)]
pub enum Agent {
    Pov(PovBaseline),
    Random,
    Flat(FlatCePolicy),
    Hierarchical(MetaPolicy),
}

impl Agent {
    pub fn policy(&self) -> Box<dyn ExecPolicy> {
        match self {
            Agent::Pov(p) => Box::new(*p),
            Agent::Random => Box::new(RandomPolicy::default()),
            Agent::Flat(f) => Box::new(f.clone()),
            Agent::Hierarchical(m) => Box::new(HierarchicalAgent::new(m.clone())),
        }
    }
}

fn read_table(path: &Path, what: &str) -> Result<QTable, ExpError> {
    let file = fs::File::open(path).map_err(|_| ExpError::MissingArtifact { path: path.to_path_buf(), what: what.into() })?;
    QTable::read_csv(file).map_err(|e| stage("load")(format!("{}: {e}", path.display())))
}

/// Load the trained options listed in `policies/options.json`.
pub fn load_options(layout: &Layout) -> Result<Vec<LocalPolicy>, ExpError> {
    let path = layout.options_json();
    let text = fs::read_to_string(&path)
        .map_err(|_| ExpError::MissingArtifact { path: path.clone(), what: "trained option list (run train-local)".into() })?;
    let specs: Vec<LocalPolicySpec> =
        serde_json::from_str(&text).map_err(|e| stage("load")(format!("{}: {e}", path.display())))?;
    specs
        .into_iter()
        .enumerate()
        .map(|(i, spec)| {
            let table = read_table(&layout.option_table(i, &spec.name), "option table (run train-local)")?;
            LocalPolicy::new(spec, table).map_err(|e| stage("load")(e.to_string()))
        })
        .collect()
}

/// Build the configured agent, loading trained artifacts from `layout`.
pub fn load_agent(exp: &Experiment, kind: AgentKind, layout: &Layout) -> Result<Agent, ExpError> {
    let c = &exp.config;
    Ok(match kind {
        AgentKind::PovBaseline => Agent::Pov(PovBaseline::for_env(&template_env(exp)?)),
        AgentKind::Random => Agent::Random,
        AgentKind::FlatCerl => {
            let table = read_table(&layout.flat_table(), "flat Q table (run train-local with agent flat_cerl)")?;
            Agent::Flat(FlatCePolicy::new(table).map_err(|e| stage("load")(e.to_string()))?)
        }
        AgentKind::Hierarchical => {
            let options = load_options(layout)?;
            let path = layout.selector();
            let file = fs::File::open(&path)
                .map_err(|_| ExpError::MissingArtifact { path: path.clone(), what: "meta selector (run search-meta)".into() })?;
            let selector = read_selector_csv(file).map_err(|e| stage("load")(format!("{}: {e}", path.display())))?;
            let meta = MetaPolicy::new(options, selector, c.training.epoch_rule).map_err(|e| stage("load")(e.to_string()))?;
            Agent::Hierarchical(meta)
        }
    })
}

/// Run the configured agent on every seed and export the full book event
/// log, trade log and step trace of each episode.
pub fn run_simulate(exp: &Experiment, opts: &RunOptions) -> Result<Vec<PathBuf>, ExpError> {
    let c = &exp.config;
    let layout = Layout::new(&c.output_dir);
    let agent = load_agent(exp, c.agent, &layout)?;
    let template = template_env(exp)?;
    let seeds = c.seeds.to_vec();
    let outputs = par_map(&seeds, opts.workers, |&seed| -> Result<_, String> {
        let mut env = template.clone();
        let ep = rollout(&mut env, seed, agent.policy().as_mut()).map_err(|e| e.to_string())?;
        let mut events = Vec::new();
        write_events_jsonl(env.book().events(), &mut events).map_err(|e| e.to_string())?;
        let trades = csv_bytes(|b| write_trades_csv(env.book().trades(), b));
        let trace = csv_bytes(|b| write_trace_csv(&ep.trace, b));
        Ok((seed, events, trades, trace))
    });
    let mut w = Writer::new(&c.output_dir);
    for out in outputs {
        let (seed, events, trades, trace) = out.map_err(stage("simulate"))?;
        let dir = c.output_dir.join(format!("simulate/seed_{seed}"));
        w.put(&dir.join("events.jsonl"), &events)?;
        w.put(&dir.join("trades.csv"), &trades)?;
        w.put(&dir.join("trace.csv"), &trace)?;
    }
    w.finish("simulate", exp, seeds)
}

fn option_training_config(base: &QLearningConfig, i: usize) -> QLearningConfig {
    QLearningConfig { seed: derive_key(&[base.seed, i as u64, 0x0971]), ..base.clone() }
}

/// Train every configured option, plus the flat table when the agent is
/// `flat_cerl`.
pub fn run_train_local(exp: &Experiment, opts: &RunOptions) -> Result<Vec<PathBuf>, ExpError> {
    let c = &exp.config;
    let layout = Layout::new(&c.output_dir);
    let template = template_env(exp)?;
    let specs: Vec<(usize, LocalPolicySpec)> = c.training.options.iter().cloned().enumerate().collect();
    let trained = par_map(&specs, opts.workers, |(i, spec)| {
        train_local(&template, spec, &c.utility, &option_training_config(&c.training.local, *i))
    });
    let mut w = Writer::new(&c.output_dir);
    let mut names = Vec::new();
    for ((i, spec), policy) in specs.iter().zip(trained) {
        let policy = policy.map_err(|e| stage("train-local")(e.to_string()))?;
        w.put(&layout.option_table(*i, &spec.name), &csv_bytes(|b| policy.table.write_csv(b)))?;
        names.push(spec.clone());
    }
    let mut json = serde_json::to_vec_pretty(&names).expect("specs serialize");
    json.push(b'\n');
    w.put(&layout.options_json(), &json)?;
    if c.agent == AgentKind::FlatCerl {
        let flat = train_flat(&template, &c.utility, &c.training.flat).map_err(|e| stage("train-local")(e.to_string()))?;
        w.put(&layout.flat_table(), &csv_bytes(|b| flat.table.write_csv(b)))?;
    }
    w.finish("train-local", exp, Vec::new())
}

/// Selector search space: one categorical dimension per
/// (deviation, spread) cell, valued over option names.
pub fn meta_space(options: &[LocalPolicy]) -> ParamSpace {
    let names: Vec<&str> = options.iter().map(|o| o.spec.name.as_str()).collect();
    let cells = ["behind_tight", "on_tight", "ahead_tight", "behind_wide", "on_wide", "ahead_wide"];
    ParamSpace::new(cells.iter().map(|c| Dim::categorical(c, names.iter())).collect())
}

/// Episode reward of the hierarchical agent built from a selector point.
pub struct MetaObjective {
    pub template: ExecEnv,
    pub options: Vec<LocalPolicy>,
    pub epoch_rule: EpochRule,
}

impl MetaObjective {
    pub fn meta(&self, params: &[ParamValue]) -> Result<MetaPolicy, String> {
        let mut table = [0usize; 6];
        if params.len() != 6 {
            return Err(format!("expected 6 selector cells, got {}", params.len()));
        }
        for (t, p) in table.iter_mut().zip(params) {
            *t = p.as_choice().ok_or("selector cells are categorical")?;
        }
        MetaPolicy::by_deviation_and_spread(self.options.clone(), &table, self.epoch_rule).map_err(|e| e.to_string())
    }
}

impl Objective for MetaObjective {
    fn evaluate(&self, params: &[ParamValue], seed: u64) -> Result<f64, String> {
        let mut agent = HierarchicalAgent::new(self.meta(params)?);
        let mut env = self.template.clone();
        let ep = rollout(&mut env, seed, &mut agent).map_err(|e| e.to_string())?;
        Ok(ep.outcome.total_reward)
    }
}

/// Successive halving over the meta selector. Writes the ledger, the
/// winning selector and a per-rung checkpoint.
pub fn run_search_meta(exp: &Experiment, opts: &RunOptions) -> Result<Vec<PathBuf>, ExpError> {
    let c = &exp.config;
    let search = c.search.as_ref().ok_or(ExpError::Config {
        field: "search".into(),
        reason: "search-meta needs a search section".into(),
    })?;
    let layout = Layout::new(&c.output_dir);
    let options = load_options(&layout)?;
    let objective = MetaObjective { template: template_env(exp)?, options, epoch_rule: c.training.epoch_rule };
    let space = meta_space(&objective.options);
    let checkpoint = layout.checkpoint();
    if let Some(dir) = checkpoint.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let study_opts = StudyOptions {
        workers: opts.workers,
        checkpoint: Some(checkpoint.clone()),
        resume: opts.resume,
        stop_after_rungs: opts.stop_after_rungs,
    };
    let result = successive_halving(&objective, &space, &search.halving(), Some(&c.utility), search.seed, &study_opts)
        .map_err(|e| match e {
            SearchError::InvalidConfig(m) | SearchError::InvalidSpace(m) => {
                ExpError::Config { field: "search".into(), reason: m }
            }
            other => stage("search-meta")(other.to_string()),
        })?;
    let mut w = Writer::new(&c.output_dir);
    w.record(&checkpoint);
    w.put(&layout.ledger(), &csv_bytes(|b| write_ledger_csv(&space, &result.ledger, b)))?;
    let meta = objective.meta(&result.best.params).map_err(stage("search-meta"))?;
    w.put(&layout.selector(), &csv_bytes(|b| write_selector_csv(meta.selector(), b)))?;
    w.finish("search-meta", exp, Vec::new())
}

/// Results of [`run_evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub reports: Vec<EpisodeReport>,
    pub summary: StudySummary,
    pub artifacts: Vec<PathBuf>,
}

/// Run the configured agent on every seed; write per-episode reports, the
/// summary, and each episode's trace and trade log.
pub fn run_evaluate(exp: &Experiment, opts: &RunOptions) -> Result<Evaluation, ExpError> {
    let c = &exp.config;
    let layout = Layout::new(&c.output_dir);
    let agent = load_agent(exp, c.agent, &layout)?;
    let template = template_env(exp)?;
    let seeds = c.seeds.to_vec();
    let outputs = par_map(&seeds, opts.workers, |&seed| -> Result<_, String> {
        let mut env = template.clone();
        let ep = rollout(&mut env, seed, agent.policy().as_mut()).map_err(|e| e.to_string())?;
        let report = EpisodeReport::from_episode(&ep, &c.parent);
        let trace = csv_bytes(|b| write_trace_csv(&ep.trace, b));
        let trades = csv_bytes(|b| write_trades_csv(env.book().trades(), b));
        Ok((report, trace, trades))
    });
    let dir = c.output_dir.join("evaluate");
    let mut w = Writer::new(&c.output_dir);
    let mut reports = Vec::with_capacity(seeds.len());
    for out in outputs {
        let (report, trace, trades) = out.map_err(stage("evaluate"))?;
        w.put(&dir.join(format!("traces/seed_{}.csv", report.seed)), &trace)?;
        w.put(&dir.join(format!("trades/seed_{}.csv", report.seed)), &trades)?;
        reports.push(report);
    }
    let summary = StudySummary::new(c.agent.name(), &reports, &c.utility, c.parent.pov_target);
    w.put(&dir.join("episodes.csv"), &csv_bytes(|b| write_episodes_csv(&reports, b)))?;
    w.put(&dir.join("summary.csv"), &csv_bytes(|b| write_summary_csv(std::slice::from_ref(&summary), b)))?;
    let artifacts = w.finish("evaluate", exp, seeds)?;
    Ok(Evaluation { reports, summary, artifacts })
}

/// Train options, search the meta selector, then evaluate the winner.
pub fn run_pipeline(exp: &Experiment, opts: &RunOptions) -> Result<Evaluation, ExpError> {
    let c = &exp.config;
    if c.agent != AgentKind::Hierarchical {
        return Err(ExpError::Config { field: "agent".into(), reason: "pipeline needs agent = hierarchical".into() });
    }
    if c.search.is_none() {
        return Err(ExpError::Config { field: "search".into(), reason: "pipeline needs a search section".into() });
    }
    let layout = Layout::new(&c.output_dir);
    let resumable = opts.resume && layout.options_json().exists() && layout.checkpoint().exists();
    let mut written = Vec::new();
    if !resumable {
        written.extend(run_train_local(exp, opts)?);
    }
    written.extend(run_search_meta(exp, opts)?);
    let eval = run_evaluate(exp, opts)?;
    written.extend(eval.artifacts.iter().cloned());
    let mut w = Writer::new(&c.output_dir);
    for p in &written {
        w.record(p);
    }
    for extra in [layout.options_json(), layout.manifest("train-local")] {
        if extra.exists() {
            w.record(&extra);
        }
    }
    for (i, spec) in c.training.options.iter().enumerate() {
        let p = layout.option_table(i, &spec.name);
        if p.exists() {
            w.record(&p);
        }
    }
    let artifacts = w.finish("pipeline", exp, c.seeds.to_vec())?;
    Ok(Evaluation { artifacts, ..eval })
}

/// Turn an evaluation trace into plot-ready series. Returns the written
/// CSV path and a text rendering of the steps.
pub fn run_replay(trace_path: &Path, out_dir: &Path) -> Result<(PathBuf, String), ExpError> {
    let file = fs::File::open(trace_path)
        .map_err(|_| ExpError::MissingArtifact { path: trace_path.to_path_buf(), what: "episode trace".into() })?;
    let trace = read_trace(file).map_err(|m| ExpError::Stage { stage: "replay", message: format!("{}: {m}", trace_path.display()) })?;
    let stem = trace_path.file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
    let out = out_dir.join(format!("replay_{stem}.csv"));
    let mut w = Writer::new(out_dir);
    w.put(&out, &csv_bytes(|b| write_replay_csv(&replay_rows(&trace), b)))?;
    Ok((out, render_table(&trace)))
}
