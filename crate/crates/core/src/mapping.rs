//! Elbow angle to tactor position mapping.
//!
//! A fully extended arm (180°) sits at the participant's minimum detectable
//! position; maximum flexion (45°) sits at the maximum comfortable position.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{ActuatorPos, ForceN};

pub const MIN_ANGLE_DEG: f64 = 45.0;
pub const MAX_ANGLE_DEG: f64 = 180.0;
pub const ANGLE_SPAN_DEG: f64 = MAX_ANGLE_DEG - MIN_ANGLE_DEG;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("angle {0}° outside [{MIN_ANGLE_DEG}, {MAX_ANGLE_DEG}]")]
    AngleOutOfRange(f64),
    #[error("position {pos} mm outside calibrated span [{min}, {max}]")]
    PositionOutOfSpan { pos: f64, min: f64, max: f64 },
    #[error("invalid calibration: {0}")]
    InvalidCalibration(&'static str),
}

/// Virtual elbow angle in degrees, within [45, 180].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub const FULL_EXTENSION: AngleDeg = AngleDeg(MAX_ANGLE_DEG);
    pub const FULL_FLEXION: AngleDeg = AngleDeg(MIN_ANGLE_DEG);

    pub fn new(deg: f64) -> Result<Self, MappingError> {
        if deg.is_finite() && (MIN_ANGLE_DEG..=MAX_ANGLE_DEG).contains(&deg) {
            Ok(Self(deg))
        } else {
            Err(MappingError::AngleOutOfRange(deg))
        }
    }

    pub fn saturating(deg: f64) -> Self {
        if deg.is_nan() {
            return Self::FULL_EXTENSION;
        }
        Self(deg.clamp(MIN_ANGLE_DEG, MAX_ANGLE_DEG))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Per-participant calibration: mean positions and forces at first felt
/// pressure (min) and onset of discomfort (max).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub min_pos: ActuatorPos,
    pub max_pos: ActuatorPos,
    pub min_force: ForceN,
    pub max_force: ForceN,
    pub repetitions: u32,
}

impl CalibrationResult {
    pub fn new(
        min_pos: f64,
        max_pos: f64,
        min_force: f64,
        max_force: f64,
        repetitions: u32,
    ) -> Result<Self, MappingError> {
        let bad_pos = |_| MappingError::InvalidCalibration("position outside actuator stroke");
        let bad_force = |_| MappingError::InvalidCalibration("force outside sensor range");
        let calib = Self {
            min_pos: ActuatorPos::new(min_pos).map_err(bad_pos)?,
            max_pos: ActuatorPos::new(max_pos).map_err(bad_pos)?,
            min_force: ForceN::new(min_force).map_err(bad_force)?,
            max_force: ForceN::new(max_force).map_err(bad_force)?,
            repetitions,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        if self.min_pos >= self.max_pos {
            return Err(MappingError::InvalidCalibration("min_pos must be below max_pos"));
        }
        if self.min_force >= self.max_force {
            return Err(MappingError::InvalidCalibration("min_force must be below max_force"));
        }
        if self.repetitions < 3 {
            return Err(MappingError::InvalidCalibration("at least three repetitions required"));
        }
        Ok(())
    }
}

/// Conversion between arm angle and tactor position. Alternate mappings
/// plug in here; only [`LinearMapping`] ships.
pub trait AngleMapping {
    fn to_position(&self, angle: AngleDeg) -> ActuatorPos;
    fn to_angle(&self, pos: ActuatorPos) -> Result<AngleDeg, MappingError>;
}

/// Affine map in actuator position space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMapping {
    calib: CalibrationResult,
}

impl LinearMapping {
    pub fn new(calib: CalibrationResult) -> Result<Self, MappingError> {
        calib.validate()?;
        Ok(Self { calib })
    }

    pub fn calibration(&self) -> &CalibrationResult {
        &self.calib
    }
}

impl AngleMapping for LinearMapping {
    fn to_position(&self, angle: AngleDeg) -> ActuatorPos {
        let min = self.calib.min_pos.get();
        let max = self.calib.max_pos.get();
        let frac = (MAX_ANGLE_DEG - angle.get()) / ANGLE_SPAN_DEG;
        if frac >= 1.0 {
            // min + 1·(max − min) can round below max
            return self.calib.max_pos;
        }
        ActuatorPos::saturating((min + frac * (max - min)).min(max))
    }

    fn to_angle(&self, pos: ActuatorPos) -> Result<AngleDeg, MappingError> {
        let min = self.calib.min_pos.get();
        let max = self.calib.max_pos.get();
        let p = pos.get();
        if p < min || p > max {
            return Err(MappingError::PositionOutOfSpan { pos: p, min, max });
        }
        let frac = (p - min) / (max - min);
        Ok(AngleDeg::saturating(MAX_ANGLE_DEG - frac * ANGLE_SPAN_DEG))
    }
}

pub fn angle_to_position(angle: f64, calib: &CalibrationResult) -> Result<ActuatorPos, MappingError> {
    let angle = AngleDeg::new(angle)?;
    Ok(LinearMapping::new(*calib)?.to_position(angle))
}

pub fn position_to_angle(pos: f64, calib: &CalibrationResult) -> Result<AngleDeg, MappingError> {
    let min = calib.min_pos.get();
    let max = calib.max_pos.get();
    let pos = ActuatorPos::new(pos).map_err(|_| MappingError::PositionOutOfSpan { pos, min, max })?;
    LinearMapping::new(*calib)?.to_angle(pos)
}
