use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mapping::AngleDeg;
use crate::rng::{stream_rng, Stream};

/// Number of canonical target angles in a block.
pub const BLOCK_LEN: usize = 10;

/// Target angles 180, 165, …, 45.
pub fn canonical_angles() -> [AngleDeg; BLOCK_LEN] {
    std::array::from_fn(|i| AngleDeg::saturating(180.0 - 15.0 * i as f64))
}

/// Index of the canonical angle closest to `deg`.
pub fn nearest_canonical(deg: f64) -> usize {
    let idx = ((180.0 - deg) / 15.0).round();
    idx.clamp(0.0, (BLOCK_LEN - 1) as f64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Haptic {
    H,
    NH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visual {
    V,
    NV,
}

/// One of the four feedback combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub haptic: Haptic,
    pub visual: Visual,
}

impl Condition {
    pub const H_NV: Condition = Condition { haptic: Haptic::H, visual: Visual::NV };
    pub const H_V: Condition = Condition { haptic: Haptic::H, visual: Visual::V };
    pub const NH_NV: Condition = Condition { haptic: Haptic::NH, visual: Visual::NV };
    pub const NH_V: Condition = Condition { haptic: Haptic::NH, visual: Visual::V };

    /// Column order of the condition summary table.
    pub const SUMMARY_ORDER: [Condition; 4] = [Self::NH_V, Self::H_V, Self::NH_NV, Self::H_NV];

    pub fn has_haptic(self) -> bool {
        self.haptic == Haptic::H
    }

    pub fn has_visual(self) -> bool {
        self.visual == Visual::V
    }

    pub fn code(self) -> &'static str {
        match (self.haptic, self.visual) {
            (Haptic::H, Visual::NV) => "H nV",
            (Haptic::H, Visual::V) => "H V",
            (Haptic::NH, Visual::NV) => "nH nV",
            (Haptic::NH, Visual::V) => "nH V",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "H nV" => Ok(Self::H_NV),
            "H V" => Ok(Self::H_V),
            "nH nV" => Ok(Self::NH_NV),
            "nH V" => Ok(Self::NH_V),
            other => Err(format!("unknown condition '{other}'")),
        }
    }
}

/// Which haptic testing pair comes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    HapticFirst,
    NoHapticFirst,
}

impl Group {
    /// Alternating assignment used for synthetic cohorts.
    pub fn for_index(index: usize) -> Self {
        if index % 2 == 0 {
            Group::HapticFirst
        } else {
            Group::NoHapticFirst
        }
    }

    /// Testing order. Within each haptic pair the nV condition runs first.
    pub fn test_order(self) -> [Condition; 4] {
        match self {
            Group::HapticFirst => [Condition::H_NV, Condition::H_V, Condition::NH_NV, Condition::NH_V],
            Group::NoHapticFirst => [Condition::NH_NV, Condition::NH_V, Condition::H_NV, Condition::H_V],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::HapticFirst => "HapticFirst",
            Group::NoHapticFirst => "NoHapticFirst",
        }
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "HapticFirst" => Ok(Group::HapticFirst),
            "NoHapticFirst" => Ok(Group::NoHapticFirst),
            other => Err(format!("unknown group '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseKind {
    Calibration,
    Instructions,
    Explore,
    Target,
    HapticFeedback,
    Practice,
    Testing,
}

impl PhaseKind {
    pub fn id(self) -> &'static str {
        match self {
            PhaseKind::Calibration => "calibration",
            PhaseKind::Instructions => "instructions",
            PhaseKind::Explore => "explore",
            PhaseKind::Target => "target",
            PhaseKind::HapticFeedback => "haptic_feedback",
            PhaseKind::Practice => "practice",
            PhaseKind::Testing => "testing",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Some(match s {
            "calibration" => PhaseKind::Calibration,
            "instructions" => PhaseKind::Instructions,
            "explore" => PhaseKind::Explore,
            "target" => PhaseKind::Target,
            "haptic_feedback" => PhaseKind::HapticFeedback,
            "practice" => PhaseKind::Practice,
            "testing" => PhaseKind::Testing,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    Descending,
    Random,
    MixedBlock2,
}

/// Shape of the second practice block: an ascending run from 45°, then a
/// descending run from 180°, with the leftover angles inserted at random
/// run boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixedPattern {
    pub ascending: usize,
    pub descending: usize,
}

impl Default for MixedPattern {
    fn default() -> Self {
        Self {
            ascending: 4,
            descending: 4,
        }
    }
}

pub fn block_order<R: Rng + ?Sized>(kind: BlockKind, pattern: MixedPattern, rng: &mut R) -> Vec<AngleDeg> {
    let canonical = canonical_angles();
    match kind {
        BlockKind::Descending => canonical.to_vec(),
        BlockKind::Random => {
            let mut v = canonical.to_vec();
            v.shuffle(rng);
            v
        }
        BlockKind::MixedBlock2 => mixed_block(pattern, rng),
    }
}

fn mixed_block<R: Rng + ?Sized>(pattern: MixedPattern, rng: &mut R) -> Vec<AngleDeg> {
    let canonical = canonical_angles();
    let asc_len = pattern.ascending.min(BLOCK_LEN);
    let desc_len = pattern.descending.min(BLOCK_LEN - asc_len);
    // canonical is descending, so the ascending run is read from the tail
    let ascending: Vec<AngleDeg> = canonical.iter().rev().take(asc_len).copied().collect();
    let descending: Vec<AngleDeg> = canonical.iter().take(desc_len).copied().collect();
    let mut leftovers: Vec<AngleDeg> = canonical
        .iter()
        .filter(|a| !ascending.contains(a) && !descending.contains(a))
        .copied()
        .collect();
    leftovers.shuffle(rng);

    // gap 0: before the ascending run, 1: between runs, 2: after descending
    let mut gaps: [Vec<AngleDeg>; 3] = Default::default();
    for angle in leftovers {
        gaps[rng.random_range(0..3)].push(angle);
    }
    let mut out = Vec::with_capacity(BLOCK_LEN);
    out.extend(gaps[0].iter());
    out.extend(ascending);
    out.extend(gaps[1].iter());
    out.extend(descending);
    out.extend(gaps[2].iter());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub targets: Vec<AngleDeg>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub kind: PhaseKind,
    pub condition: Condition,
    pub blocks: Vec<Block>,
}

impl PhasePlan {
    pub fn trial_count(&self) -> usize {
        self.blocks.iter().map(|b| b.targets.len()).sum()
    }

    /// Whether the device follows the arm during this phase.
    pub fn haptic_active(&self) -> bool {
        self.condition.has_haptic()
    }
}

/// Full ordered protocol for one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionPlan {
    pub seed: u64,
    pub group: Group,
    pub phases: Vec<PhasePlan>,
}

impl SessionPlan {
    pub fn phases_of(&self, kind: PhaseKind) -> impl Iterator<Item = &PhasePlan> {
        self.phases.iter().filter(move |p| p.kind == kind)
    }

    pub fn trial_count(&self, kind: PhaseKind) -> usize {
        self.phases_of(kind).map(PhasePlan::trial_count).sum()
    }

    pub fn total_trials(&self) -> usize {
        self.phases.iter().map(PhasePlan::trial_count).sum()
    }
}

pub fn build_session_plan(seed: u64, group: Group, pattern: MixedPattern) -> SessionPlan {
    let mut rng = stream_rng(seed, Stream::Plan);
    let mut block = |kind| Block {
        kind,
        targets: block_order(kind, pattern, &mut rng),
    };

    let mut phases = vec![
        PhasePlan {
            kind: PhaseKind::Explore,
            condition: Condition::H_V,
            blocks: Vec::new(),
        },
        PhasePlan {
            kind: PhaseKind::Target,
            condition: Condition::H_V,
            blocks: vec![block(BlockKind::Descending), block(BlockKind::Random)],
        },
        PhasePlan {
            kind: PhaseKind::HapticFeedback,
            condition: Condition::H_NV,
            blocks: vec![block(BlockKind::Descending)],
        },
        PhasePlan {
            kind: PhaseKind::Practice,
            condition: Condition::H_NV,
            blocks: vec![
                block(BlockKind::Descending),
                block(BlockKind::MixedBlock2),
                block(BlockKind::Random),
                block(BlockKind::Random),
            ],
        },
    ];
    for condition in group.test_order() {
        phases.push(PhasePlan {
            kind: PhaseKind::Testing,
            condition,
            blocks: vec![block(BlockKind::Random)],
        });
    }
    SessionPlan { seed, group, phases }
}
