use serde::{Deserialize, Serialize};

use crate::book::{DepthSnapshot, Level, Price, Qty};

/// Where the parent order stands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParentProgress {
    pub filled: Qty,
    pub total_qty: Qty,
    pub step: usize,
    pub horizon: usize,
}

impl ParentProgress {
    pub fn remaining_fraction(&self) -> f64 {
        (self.total_qty - self.filled) as f64 / self.total_qty as f64
    }

    pub fn time_fraction(&self) -> f64 {
        (self.step as f64 / self.horizon as f64).min(1.0)
    }

    /// Filled fraction minus elapsed fraction; negative means behind a
    /// linear schedule.
    pub fn schedule_deviation(&self) -> f64 {
        let (filled, total) = (self.filled as f64, self.total_qty as f64);
        let (step, horizon) = (self.step.min(self.horizon) as f64, self.horizon as f64);
        (filled * horizon - step * total) / (total * horizon)
    }
}

/// Fixed-length state summary: `K` levels per side as (offset from mid in
/// ticks, qty / init_depth_qty), bids then asks, followed by
/// `(remaining_fraction, time_fraction, schedule_deviation, spread_ticks)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub book_feats: Vec<f64>,
    pub parent_feats: [f64; 4],
}

impl Observation {
    pub fn dim(&self) -> usize {
        self.book_feats.len() + self.parent_feats.len()
    }

    pub fn levels(&self) -> usize {
        self.book_feats.len() / 4
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.book_feats.clone();
        v.extend_from_slice(&self.parent_feats);
        v
    }

    pub fn remaining_fraction(&self) -> f64 {
        self.parent_feats[0]
    }

    pub fn time_fraction(&self) -> f64 {
        self.parent_feats[1]
    }

    pub fn schedule_deviation(&self) -> f64 {
        self.parent_feats[2]
    }

    pub fn spread_ticks(&self) -> f64 {
        self.parent_feats[3]
    }

    /// (offset, normalized qty) pairs for the bid block.
    pub fn bid_block(&self) -> &[f64] {
        &self.book_feats[..self.book_feats.len() / 2]
    }

    pub fn ask_block(&self) -> &[f64] {
        &self.book_feats[self.book_feats.len() / 2..]
    }
}

/// Summarize a depth snapshot of at least `k` levels. Offsets are measured
/// from the mid, or from `fallback_ref` when one side is empty. Missing
/// levels are zero-filled.
pub fn featurize(
    depth: &DepthSnapshot,
    k: usize,
    fallback_ref: Price,
    init_depth_qty: Qty,
    progress: &ParentProgress,
) -> Observation {
    let reference = depth.mid().unwrap_or(fallback_ref as f64);
    let scale = init_depth_qty as f64;
    let mut book_feats = Vec::with_capacity(4 * k);
    let mut block = |levels: &[Level]| {
        for i in 0..k {
            match levels.get(i) {
                Some(l) => {
                    book_feats.push(l.price as f64 - reference);
                    book_feats.push(l.qty as f64 / scale);
                }
                None => book_feats.extend([0.0, 0.0]),
            }
        }
    };
    block(&depth.bids);
    block(&depth.asks);
    Observation {
        book_feats,
        parent_feats: [
            progress.remaining_fraction(),
            progress.time_fraction(),
            progress.schedule_deviation(),
            depth.spread.unwrap_or(0) as f64,
        ],
    }
}
