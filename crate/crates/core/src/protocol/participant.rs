use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::KeyDirection;
use crate::device::ForceN;
use crate::mapping::AngleDeg;

use super::plan::{Condition, PhaseKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CalibrationSignal {
    /// First felt pressure.
    Detection,
    /// Pressure becomes uncomfortable.
    Comfort,
}

/// Everything a participant can send.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Key(KeyDirection),
    Confirm,
    Signal(CalibrationSignal),
    Safety,
}

/// What the session is currently asking of the participant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stage {
    Calibration {
        /// Completed repetitions so far.
        completed: u32,
        required: u32,
        awaiting: CalibrationSignal,
    },
    Instructions {
        next: PhaseKind,
        remaining_s: f64,
    },
    Explore {
        remaining_s: f64,
    },
    Trial {
        phase: PhaseKind,
        condition: Condition,
        target: AngleDeg,
        block: u32,
        trial: u32,
    },
    /// Passive stimulus in the haptic feedback phase. Confirm advances once
    /// the minimum dwell has elapsed.
    Stimulus {
        target: AngleDeg,
        remaining_s: f64,
    },
    /// Post-trial display of the true arm angle next to the target.
    Corrective {
        target: AngleDeg,
        arm: AngleDeg,
        remaining_s: f64,
    },
}

impl Stage {
    pub fn phase(&self) -> PhaseKind {
        match self {
            Stage::Calibration { .. } => PhaseKind::Calibration,
            Stage::Instructions { .. } => PhaseKind::Instructions,
            Stage::Explore { .. } => PhaseKind::Explore,
            Stage::Trial { phase, .. } => *phase,
            Stage::Stimulus { .. } => PhaseKind::HapticFeedback,
            Stage::Corrective { .. } => PhaseKind::Practice,
        }
    }

    pub fn target(&self) -> Option<AngleDeg> {
        match self {
            Stage::Trial { target, .. } | Stage::Stimulus { target, .. } | Stage::Corrective { target, .. } => {
                Some(*target)
            }
            _ => None,
        }
    }

    pub fn countdown(&self) -> Option<f64> {
        match self {
            Stage::Instructions { remaining_s, .. }
            | Stage::Explore { remaining_s }
            | Stage::Stimulus { remaining_s, .. }
            | Stage::Corrective { remaining_s, .. } => Some(remaining_s.max(0.0)),
            _ => None,
        }
    }

    /// Whether arrow keys move the arm in this stage.
    pub fn accepts_keys(&self) -> bool {
        matches!(self, Stage::Explore { .. } | Stage::Trial { .. })
    }
}

/// Snapshot handed to the participant once per control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Session time, s.
    pub t: f64,
    pub stage: Stage,
    /// First tick of this stage instance.
    pub stage_started: bool,
    /// Arm angle, present only when the arm is on screen.
    pub arm: Option<AngleDeg>,
    pub haptic_active: bool,
    /// Force actually pressing on the forearm. Only a simulated wearer reads
    /// this; a human feels it.
    pub felt_force: ForceN,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParticipantError {
    #[error("participant disconnected")]
    Disconnected,
}

/// The boundary between the session and whoever is doing the task: a
/// synthetic model or a relay to a human's UI. Called once per tick and must
/// not block.
pub trait Participant {
    fn observe(&mut self, obs: &Observation) -> Result<Option<Action>, ParticipantError>;
}

impl<P: Participant + ?Sized> Participant for Box<P> {
    fn observe(&mut self, obs: &Observation) -> Result<Option<Action>, ParticipantError> {
        (**self).observe(obs)
    }
}

impl<P: Participant + ?Sized> Participant for &mut P {
    fn observe(&mut self, obs: &Observation) -> Result<Option<Action>, ParticipantError> {
        (**self).observe(obs)
    }
}
