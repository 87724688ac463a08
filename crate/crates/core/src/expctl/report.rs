use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cerl::UtilityFn;
use crate::env::{Episode, ParentOrder};

/// Per-episode metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub seed: u64,
    pub filled_fraction: f64,
    pub exec_vwap: Option<f64>,
    pub market_vwap: Option<f64>,
    /// `sign(side) · (market_vwap − exec_vwap)` over executed shares, 0 when
    /// nothing executed. Positive is better than the all-trades VWAP.
    #[serde(rename = "proxy_slippage_per_share")]
    pub slippage_per_share: f64,
    #[serde(rename = "proxy_participation")]
    pub participation: f64,
    pub total_reward: f64,
    /// Executed and liquidated shares together versus market VWAP, per
    /// share of the parent order.
    pub all_in_reward: f64,
    pub option_switches: Option<usize>,
}

impl EpisodeReport {
    pub fn from_episode(ep: &Episode, parent: &ParentOrder) -> Self {
        let o = &ep.outcome;
        let slippage_per_share = match (o.market_vwap, o.exec_vwap) {
            (Some(m), Some(e)) => parent.side.sign() * (m - e),
            _ => 0.0,
        };
        Self {
            seed: ep.seed,
            filled_fraction: o.filled_fraction,
            exec_vwap: o.exec_vwap,
            market_vwap: o.market_vwap,
            slippage_per_share,
            participation: o.participation,
            total_reward: o.total_reward,
            all_in_reward: o.benchmark_reward,
            option_switches: ep.option_switches,
        }
    }
}

pub fn write_episodes_csv<W: Write>(reports: &[EpisodeReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    if reports.is_empty() {
        w.write_record([
            "seed",
            "filled_fraction",
            "exec_vwap",
            "market_vwap",
            "proxy_slippage_per_share",
            "proxy_participation",
            "total_reward",
            "all_in_reward",
            "option_switches",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Distribution of per-share slippage over the evaluated seeds, plus
/// tracking statistics. The slippage figures are proxies for execution
/// quality measured against the all-trades VWAP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub agent: String,
    pub episodes: usize,
    #[serde(rename = "proxy_slippage_mean")]
    pub slippage_mean: f64,
    #[serde(rename = "proxy_slippage_stdev")]
    pub slippage_stdev: f64,
    #[serde(rename = "proxy_slippage_p5")]
    pub slippage_p5: f64,
    #[serde(rename = "proxy_slippage_p95")]
    pub slippage_p95: f64,
    /// Certainty equivalent of slippage under the configured utility; empty
    /// when a value falls outside the utility's domain.
    #[serde(rename = "proxy_slippage_ce")]
    pub slippage_ce: Option<f64>,
    #[serde(rename = "proxy_mean_abs_participation_error")]
    pub mean_abs_participation_error: f64,
    pub mean_filled_fraction: f64,
}

impl StudySummary {
    pub fn new(agent: &str, reports: &[EpisodeReport], u: &UtilityFn, pov_target: f64) -> Self {
        let n = reports.len();
        assert!(n > 0, "summary of no episodes");
        let xs: Vec<f64> = reports.iter().map(|r| r.slippage_per_share).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let ce = u.ce_samples(&xs).ok();
        Self {
            agent: agent.into(),
            episodes: n,
            slippage_mean: mean,
            slippage_stdev: var.sqrt(),
            slippage_p5: percentile(&sorted, 0.05),
            slippage_p95: percentile(&sorted, 0.95),
            slippage_ce: ce,
            mean_abs_participation_error: reports.iter().map(|r| (r.participation - pov_target).abs()).sum::<f64>()
                / n as f64,
            mean_filled_fraction: reports.iter().map(|r| r.filled_fraction).sum::<f64>() / n as f64,
        }
    }
}

pub fn write_summary_csv<W: Write>(rows: &[StudySummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
