//! Session orchestration: calibration dialogue, the four learning phases and
//! the four testing conditions.

mod participant;
mod plan;
mod session;

pub use participant::{Action, CalibrationSignal, Observation, Participant, ParticipantError, Stage};
pub use plan::{
    block_order, build_session_plan, canonical_angles, nearest_canonical, Block, BlockKind, Condition, Group,
    Haptic, MixedPattern, PhaseKind, PhasePlan, SessionPlan, Visual, BLOCK_LEN,
};
pub use session::{Pacer, Session, SessionError, Unpaced, WallClock};
