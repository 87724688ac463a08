use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use exec_sim::expctl::{
    load_config, run_evaluate, run_pipeline, run_replay, run_search_meta, run_simulate, run_train_local, Evaluation,
    ExpError, Experiment, RunOptions,
};

#[derive(Parser)]
#[command(name = "exec-sim", version, about = "Order-book execution simulator and agent trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured agent and export book events, trades and traces.
    Simulate(Common),
    /// Train the local option policies (and the flat table for flat_cerl).
    TrainLocal(Common),
    /// Search the meta selector with successive halving.
    SearchMeta(Common),
    /// Evaluate the configured agent on the configured seeds.
    Evaluate(Common),
    /// Train, search and evaluate in one go.
    Pipeline(Common),
    /// Turn an episode trace into plot-ready series.
    Replay {
        /// Trace CSV written by `evaluate`.
        trace: PathBuf,
        /// Directory for the replay CSV.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "EXEC_SIM_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Continue an interrupted search from its checkpoint.
    #[arg(long)]
    resume: bool,
}

impl Common {
    fn load(&self) -> Result<(Experiment, RunOptions), ExpError> {
        let mut exp = load_config(&self.config)?;
        if let Some(out) = &self.out {
            exp = exp.with_output_dir(out);
        }
        Ok((exp, RunOptions { workers: self.workers, resume: self.resume, stop_after_rungs: None }))
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn print_evaluation(eval: &Evaluation) {
    let s = &eval.summary;
    println!("agent {} over {} episodes (slippage and participation are proxy metrics)", s.agent, s.episodes);
    println!("  slippage/share mean {:.5} stdev {:.5}", s.slippage_mean, s.slippage_stdev);
    println!("  slippage/share p5 {:.5} p95 {:.5}", s.slippage_p5, s.slippage_p95);
    match s.slippage_ce {
        Some(ce) => println!("  slippage/share CE {ce:.5}"),
        None => println!("  slippage/share CE undefined"),
    }
    println!("  mean |participation - target| {:.5}", s.mean_abs_participation_error);
    println!("  mean filled fraction {:.5}", s.mean_filled_fraction);
}

fn run(cli: Cli) -> Result<(), ExpError> {
    match cli.command {
        Command::Simulate(c) => {
            let (exp, opts) = c.load()?;
            print_paths(&run_simulate(&exp, &opts)?);
        }
        Command::TrainLocal(c) => {
            let (exp, opts) = c.load()?;
            print_paths(&run_train_local(&exp, &opts)?);
        }
        Command::SearchMeta(c) => {
            let (exp, opts) = c.load()?;
            print_paths(&run_search_meta(&exp, &opts)?);
        }
        Command::Evaluate(c) => {
            let (exp, opts) = c.load()?;
            print_evaluation(&run_evaluate(&exp, &opts)?);
        }
        Command::Pipeline(c) => {
            let (exp, opts) = c.load()?;
            print_evaluation(&run_pipeline(&exp, &opts)?);
        }
        Command::Replay { trace, out } => {
            let (path, table) = run_replay(&trace, &out)?;
            print!("{table}");
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
