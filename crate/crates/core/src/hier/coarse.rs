use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::Observation;

/// Half-width of the "on schedule" band, inclusive.
pub const SCHEDULE_BAND: f64 = 0.05;
pub const FRACTION_BINS: usize = 4;
pub const N_BUCKETS: usize = FRACTION_BINS * FRACTION_BINS * 3 * 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Deviation {
    Behind,
    On,
    Ahead,
}

impl Deviation {
    pub const ALL: [Deviation; 3] = [Deviation::Behind, Deviation::On, Deviation::Ahead];

    pub fn of(schedule_deviation: f64) -> Self {
        if schedule_deviation < -SCHEDULE_BAND {
            Deviation::Behind
        } else if schedule_deviation > SCHEDULE_BAND {
            Deviation::Ahead
        } else {
            Deviation::On
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Deviation::Behind => "behind",
            Deviation::On => "on",
            Deviation::Ahead => "ahead",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadBucket {
    /// Exactly one tick.
    Tight,
    /// Wider than one tick, or one side of the book empty.
    Wide,
}

impl SpreadBucket {
    pub const ALL: [SpreadBucket; 2] = [SpreadBucket::Tight, SpreadBucket::Wide];

    pub fn of(spread_ticks: f64) -> Self {
        if spread_ticks == 1.0 {
            SpreadBucket::Tight
        } else {
            SpreadBucket::Wide
        }
    }
}

impl fmt::Display for SpreadBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpreadBucket::Tight => "tight",
            SpreadBucket::Wide => "wide",
        })
    }
}

/// Low-resolution view of an observation used by options and the meta
/// selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoarseState {
    /// Bin of the remaining fraction, 0 (nearly done) to 3 (untouched).
    pub remaining_bin: u8,
    /// Bin of the elapsed fraction, 0 (start) to 3 (end).
    pub time_bin: u8,
    pub deviation: Deviation,
    pub spread: SpreadBucket,
}

impl CoarseState {
    /// Dense index in `0..N_BUCKETS`.
    pub fn index(&self) -> usize {
        ((self.remaining_bin as usize * FRACTION_BINS + self.time_bin as usize) * 3 + self.deviation.index()) * 2
            + self.spread as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        if i >= N_BUCKETS {
            return None;
        }
        let spread = SpreadBucket::ALL[i % 2];
        let deviation = Deviation::ALL[(i / 2) % 3];
        let time_bin = ((i / 6) % FRACTION_BINS) as u8;
        let remaining_bin = (i / (6 * FRACTION_BINS)) as u8;
        Some(Self { remaining_bin, time_bin, deviation, spread })
    }

    pub fn all() -> impl Iterator<Item = CoarseState> {
        (0..N_BUCKETS).filter_map(Self::from_index)
    }
}

fn fraction_bin(x: f64) -> u8 {
    ((x.clamp(0.0, 1.0) * FRACTION_BINS as f64) as usize).min(FRACTION_BINS - 1) as u8
}

pub fn coarse_state(obs: &Observation) -> CoarseState {
    CoarseState {
        remaining_bin: fraction_bin(obs.remaining_fraction()),
        time_bin: fraction_bin(obs.time_fraction()),
        deviation: Deviation::of(obs.schedule_deviation()),
        spread: SpreadBucket::of(obs.spread_ticks()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(remaining: f64, time: f64, dev: f64, spread: f64) -> Observation {
        Observation { book_feats: vec![0.0; 8], parent_feats: [remaining, time, dev, spread] }
    }

    #[test]
    fn fresh_episode() {
        let c = coarse_state(&obs(1.0, 0.0, 0.0, 1.0));
        assert_eq!((c.remaining_bin, c.time_bin, c.deviation, c.spread), (3, 0, Deviation::On, SpreadBucket::Tight));
    }

    #[test]
    fn deviation_edges() {
        assert_eq!(Deviation::of(-0.2), Deviation::Behind);
        assert_eq!(Deviation::of(-0.05), Deviation::On);
        assert_eq!(Deviation::of(0.05), Deviation::On);
        assert_eq!(Deviation::of(0.0500001), Deviation::Ahead);
        assert_eq!(Deviation::of(-0.0500001), Deviation::Behind);
    }

    #[test]
    fn spread_buckets() {
        assert_eq!(SpreadBucket::of(1.0), SpreadBucket::Tight);
        assert_eq!(SpreadBucket::of(2.0), SpreadBucket::Wide);
        assert_eq!(SpreadBucket::of(0.0), SpreadBucket::Wide);
    }

    #[test]
    fn fraction_bins() {
        assert_eq!(fraction_bin(0.0), 0);
        assert_eq!(fraction_bin(0.2499), 0);
        assert_eq!(fraction_bin(0.25), 1);
        assert_eq!(fraction_bin(0.99), 3);
        assert_eq!(fraction_bin(1.0), 3);
    }

    #[test]
    fn index_round_trips_over_the_grid() {
        let all: Vec<_> = CoarseState::all().collect();
        assert_eq!(all.len(), N_BUCKETS);
        for (i, c) in all.iter().enumerate() {
            assert_eq!(c.index(), i);
        }
        assert!(CoarseState::from_index(N_BUCKETS).is_none());
    }
}
