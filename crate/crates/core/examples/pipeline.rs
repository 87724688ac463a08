//! Run the full train, search and evaluate pipeline from a JSON config and
//! print the evaluation summary. Pass a config path to override the bundled
//! small one.

use std::path::PathBuf;

use exec_sim::expctl::{load_config, run_pipeline, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/small.json")
    });
    let out = std::env::temp_dir().join("exec-sim-pipeline-example");
    let exp = load_config(&config)?.with_output_dir(&out);
    let eval = run_pipeline(&exp, &RunOptions { workers: 4, ..RunOptions::default() })?;

    let s = &eval.summary;
    println!("{} over {} episodes", s.agent, s.episodes);
    println!("  slippage/share mean {:.5} (p5 {:.5}, p95 {:.5})", s.slippage_mean, s.slippage_p5, s.slippage_p95);
    println!("  slippage/share CE   {:?}", s.slippage_ce);
    println!("  mean |participation - target| {:.4}", s.mean_abs_participation_error);
    println!("{} files under {}", eval.artifacts.len(), out.display());
    Ok(())
}
