use serde::{Deserialize, Serialize};

use crate::book::Qty;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBucket {
    Small,
    Large,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 2] = [SizeBucket::Small, SizeBucket::Large];
}

/// Resting child order `offset` ticks behind the same-side best.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PassiveInstr {
    pub offset: u8,
    pub size: SizeBucket,
}

/// One agent decision: any combination of a passive placement, an
/// aggressive take and a cancel of the resting passive order. All fields
/// empty is the no-op.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSpec {
    pub passive: Option<PassiveInstr>,
    pub aggressive: Option<SizeBucket>,
    pub cancel_all_passive: bool,
}

impl ActionSpec {
    pub const NOOP: ActionSpec = ActionSpec { passive: None, aggressive: None, cancel_all_passive: false };

    pub fn is_noop(&self) -> bool {
        *self == Self::NOOP
    }
}

pub const PASSIVE_OFFSETS: [u8; 3] = [0, 1, 2];

/// Number of enumerated actions: no-op, cancel, 6 passive, 2 aggressive,
/// 12 passive+aggressive.
pub const N_ACTIONS: usize = 22;

/// The fixed action list. Index order:
///
/// | index  | action                                   |
/// |--------|------------------------------------------|
/// | 0      | no-op                                    |
/// | 1      | cancel resting passive                   |
/// | 2..8   | passive (offset 0..2 × small, large)     |
/// | 8..10  | aggressive (small, large)                |
/// | 10..22 | passive (as above) × aggressive (as above) |
pub fn enumerate_actions() -> Vec<ActionSpec> {
    let passives: Vec<PassiveInstr> = PASSIVE_OFFSETS
        .iter()
        .flat_map(|&offset| SizeBucket::ALL.map(|size| PassiveInstr { offset, size }))
        .collect();
    let mut out = vec![ActionSpec::NOOP, ActionSpec { cancel_all_passive: true, ..ActionSpec::NOOP }];
    out.extend(passives.iter().map(|&p| ActionSpec { passive: Some(p), ..ActionSpec::NOOP }));
    out.extend(SizeBucket::ALL.map(|a| ActionSpec { aggressive: Some(a), ..ActionSpec::NOOP }));
    for &p in &passives {
        for a in SizeBucket::ALL {
            out.push(ActionSpec { passive: Some(p), aggressive: Some(a), cancel_all_passive: false });
        }
    }
    debug_assert_eq!(out.len(), N_ACTIONS);
    out
}

pub fn action_index(spec: &ActionSpec) -> Option<usize> {
    enumerate_actions().iter().position(|a| a == spec)
}

/// Indices of actions with no aggressive component.
pub fn passive_subspace() -> Vec<usize> {
    enumerate_actions()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.aggressive.is_none())
        .map(|(i, _)| i)
        .collect()
}

/// No-op plus the aggressive-only actions.
pub fn aggressive_subspace() -> Vec<usize> {
    enumerate_actions()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_noop() || (a.aggressive.is_some() && a.passive.is_none()))
        .map(|(i, _)| i)
        .collect()
}

/// Share counts for the two size buckets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeBuckets {
    pub small: Qty,
    pub large: Qty,
}

impl SizeBuckets {
    pub fn qty(&self, b: SizeBucket) -> Qty {
        match b {
            SizeBucket::Small => self.small,
            SizeBucket::Large => self.large,
        }
    }

    /// Bucket whose size is closest to `target`, small on ties.
    pub fn closest(&self, target: f64) -> SizeBucket {
        if (self.large as f64 - target).abs() < (self.small as f64 - target).abs() {
            SizeBucket::Large
        } else {
            SizeBucket::Small
        }
    }
}
