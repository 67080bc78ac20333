//! Session configuration file (TOML). Every section and field is optional;
//! missing values take the defaults below.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::device::{DeviceConfig, SkinModel, MAX_COMMANDED_FORCE_N, STROKE_MM};
use crate::protocol::{Group, MixedPattern, BLOCK_LEN};
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("{}", format_field_errors(.0))]
    Invalid(Vec<FieldError>),
}

fn format_field_errors(errors: &[FieldError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// A validation failure tied to a dotted config path.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// `auto` alternates groups by participant index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroupSetting {
    #[default]
    Auto,
    HapticFirst,
    NoHapticFirst,
}

impl GroupSetting {
    pub fn resolve(self, participant_index: usize) -> Group {
        match self {
            GroupSetting::Auto => Group::for_index(participant_index),
            GroupSetting::HapticFirst => Group::HapticFirst,
            GroupSetting::NoHapticFirst => Group::NoHapticFirst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub seed: u64,
    pub participant_id: String,
    pub group: GroupSetting,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self {
            seed: 1,
            participant_id: "p01".into(),
            group: GroupSetting::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    /// Ramp speed toward the skin, mm/s.
    pub ramp_rate: f64,
    pub repetitions: u32,
    /// Ramps attempted before giving up, including discarded ones.
    pub max_attempts: u32,
    /// Time allowed to return to the park position between ramps, s.
    pub settle_timeout_s: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            ramp_rate: 1.0,
            repetitions: 3,
            max_attempts: 10,
            settle_timeout_s: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub explore_s: f64,
    /// Minimum dwell per stimulus in the haptic feedback phase.
    pub haptic_dwell_s: f64,
    /// Corrective display after each practice trial.
    pub corrective_s: f64,
    /// Parked pause before each phase.
    pub instruction_s: f64,
    /// Averaging window for a trial's steady-state force.
    pub steady_window_s: f64,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            explore_s: 60.0,
            haptic_dwell_s: 10.0,
            corrective_s: 10.0,
            instruction_s: 5.0,
            steady_window_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoggingSection {
    /// Keep one sample every N control ticks.
    pub sample_decimation: u32,
}

impl Default for LoggingSection {
    fn default() -> Self {
        Self { sample_decimation: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    /// Simulated seconds per wall-clock second. 1.0 for real sessions.
    pub time_scale: f64,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { time_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub session: SessionSection,
    pub device: DeviceConfig,
    pub skin: SkinModel,
    pub calibration: CalibrationSection,
    pub timing: TimingSection,
    pub blocks: MixedPattern,
    pub participant: SyntheticConfig,
    pub logging: LoggingSection,
    pub serve: ServeSection,
}

impl SessionConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: SessionConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// The fully resolved config, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved config text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, field: &'static str, message: String| {
            if !ok {
                errs.push(FieldError { field, message });
            }
        };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;

        let d = &self.device;
        check(pos(d.max_speed), "device.max_speed", format!("must be > 0, got {}", d.max_speed));
        check(nonneg(d.kp), "device.kp", format!("must be >= 0, got {}", d.kp));
        check(nonneg(d.ki), "device.ki", format!("must be >= 0, got {}", d.ki));
        check(nonneg(d.kd), "device.kd", format!("must be >= 0, got {}", d.kd));
        check(pos(d.integral_limit), "device.integral_limit", format!("must be > 0, got {}", d.integral_limit));
        check(pos(d.dt) && d.dt <= 0.1, "device.dt", format!("must be in (0, 0.1], got {}", d.dt));
        check(
            d.park_pos.is_finite() && (0.0..=STROKE_MM).contains(&d.park_pos),
            "device.park_pos",
            format!("must be within [0, {STROKE_MM}], got {}", d.park_pos),
        );
        check(
            pos(d.force_limit) && d.force_limit <= MAX_COMMANDED_FORCE_N,
            "device.force_limit",
            format!("must be in (0, {MAX_COMMANDED_FORCE_N}], got {}", d.force_limit),
        );

        let s = &self.skin;
        check(
            s.contact_pos.is_finite() && (0.0..STROKE_MM).contains(&s.contact_pos),
            "skin.contact_pos",
            format!("must be within [0, {STROKE_MM}), got {}", s.contact_pos),
        );
        check(pos(s.stiffness), "skin.stiffness", format!("must be > 0, got {}", s.stiffness));
        check(
            nonneg(s.sensor_noise_sigma),
            "skin.sensor_noise_sigma",
            format!("must be >= 0, got {}", s.sensor_noise_sigma),
        );
        check(
            nonneg(s.quantization_step),
            "skin.quantization_step",
            format!("must be >= 0, got {}", s.quantization_step),
        );
        check(
            d.park_pos < s.contact_pos,
            "device.park_pos",
            format!("must be short of skin contact ({} mm)", s.contact_pos),
        );

        let c = &self.calibration;
        check(pos(c.ramp_rate), "calibration.ramp_rate", format!("must be > 0, got {}", c.ramp_rate));
        check(c.repetitions >= 3, "calibration.repetitions", format!("must be >= 3, got {}", c.repetitions));
        check(
            c.max_attempts >= c.repetitions,
            "calibration.max_attempts",
            format!("must be >= repetitions ({})", c.repetitions),
        );
        check(pos(c.settle_timeout_s), "calibration.settle_timeout_s", "must be > 0".into());

        let t = &self.timing;
        check(nonneg(t.explore_s), "timing.explore_s", format!("must be >= 0, got {}", t.explore_s));
        check(nonneg(t.haptic_dwell_s), "timing.haptic_dwell_s", "must be >= 0".into());
        check(nonneg(t.corrective_s), "timing.corrective_s", "must be >= 0".into());
        check(nonneg(t.instruction_s), "timing.instruction_s", "must be >= 0".into());
        check(pos(t.steady_window_s), "timing.steady_window_s", "must be > 0".into());

        check(
            self.blocks.ascending + self.blocks.descending <= BLOCK_LEN,
            "blocks",
            format!("ascending + descending must be <= {BLOCK_LEN}"),
        );

        check(self.logging.sample_decimation >= 1, "logging.sample_decimation", "must be >= 1".into());
        check(pos(self.serve.time_scale), "serve.time_scale", "must be > 0".into());

        let p = &self.participant;
        check(nonneg(p.weber_fraction), "participant.weber_fraction", "must be >= 0".into());
        check(nonneg(p.memory_noise), "participant.memory_noise", "must be >= 0".into());
        check(
            pos(p.detection_threshold) && p.detection_threshold < p.comfort_limit,
            "participant.detection_threshold",
            "must be > 0 and below comfort_limit".into(),
        );
        // the calibrated maximum must land inside the device's force envelope
        check(
            p.comfort_limit.is_finite() && (1.0..=MAX_COMMANDED_FORCE_N.min(d.force_limit)).contains(&p.comfort_limit),
            "participant.comfort_limit",
            format!(
                "must produce a force within [1, {}] N, got {}",
                MAX_COMMANDED_FORCE_N.min(d.force_limit),
                p.comfort_limit
            ),
        );
        if pos(s.stiffness) {
            check(
                s.position_for_force(p.comfort_limit) <= STROKE_MM,
                "participant.comfort_limit",
                "requires an extension beyond the actuator stroke".into(),
            );
        }
        check(nonneg(p.detection_sd), "participant.detection_sd", "must be >= 0".into());
        check(nonneg(p.comfort_sd), "participant.comfort_sd", "must be >= 0".into());
        check(pos(p.key_interval_s), "participant.key_interval_s", "must be > 0".into());
        check(nonneg(p.think_time_s), "participant.think_time_s", "must be >= 0".into());
        check(nonneg(p.confirm_tolerance_deg), "participant.confirm_tolerance_deg", "must be >= 0".into());
        check(nonneg(p.learn_window_deg), "participant.learn_window_deg", "must be >= 0".into());
        check(pos(p.initial_uncertainty), "participant.initial_uncertainty", "must be > 0".into());
        check(
            nonneg(p.uncertainty_floor) && p.uncertainty_floor <= p.initial_uncertainty,
            "participant.uncertainty_floor",
            "must be in [0, initial_uncertainty]".into(),
        );
        check(p.max_presses >= 1, "participant.max_presses", "must be >= 1".into());

        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Ticks per simulated second.
    pub fn ticks(&self, seconds: f64) -> u64 {
        (seconds / self.device.dt).round().max(0.0) as u64
    }
}
