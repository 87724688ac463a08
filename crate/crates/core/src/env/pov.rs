use super::{action_index, ActionSpec, ExecEnv, PassiveInstr, SizeBuckets};

/// Percentage-of-volume baseline.
///
/// Works a passive order at the touch sized to the expected per-step share
/// of volume, adds an aggressive take of the same size when participation
/// falls below `target - band`, and stands aside when above `target + band`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PovBaseline {
    pub target: f64,
    pub band: f64,
    pub sizes: SizeBuckets,
}

impl PovBaseline {
    pub fn for_env(env: &ExecEnv) -> Self {
        Self { target: env.parent().pov_target, band: env.config().pov_band, sizes: env.config().sizes }
    }

    pub fn decide(&self, participation_so_far: f64, trailing_market_volume: f64) -> ActionSpec {
        if participation_so_far > self.target + self.band {
            return ActionSpec::NOOP;
        }
        let desired = self.target * trailing_market_volume;
        let bucket = self.sizes.closest(desired);
        let passive = Some(PassiveInstr { offset: 0, size: bucket });
        let aggressive = (participation_so_far < self.target - self.band).then_some(bucket);
        ActionSpec { passive, aggressive, cancel_all_passive: false }
    }

    /// Decision for the current state of `env`, as an action index.
    pub fn act(&self, env: &ExecEnv) -> usize {
        let spec = self.decide(env.participation(), env.trailing_volume());
        action_index(&spec).expect("baseline emits enumerated actions")
    }
}
