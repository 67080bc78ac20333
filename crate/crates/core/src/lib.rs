//! Simulated wearable deep-pressure device for conveying elbow angle,
//! the angle-matching experiment protocol that runs on it, and the analysis
//! pipeline for the resulting session logs.

pub mod analysis;
pub mod arm;
pub mod cohort;
pub mod config;
pub mod device;
pub mod log;
pub mod mapping;
pub mod protocol;
pub mod rng;
pub mod synthetic;

pub use arm::{ArmState, KeyDirection};
pub use config::{ConfigError, SessionConfig};
pub use device::{ActuatorPos, Device, DeviceConfig, DeviceError, DeviceEvent, DeviceMode, ForceN};
pub use log::{SessionLog, SessionStatus};
pub use mapping::{AngleDeg, AngleMapping, CalibrationResult, LinearMapping};
