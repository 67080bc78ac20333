//! Simulated wearable stimulator: a rate-limited linear actuator pushing a
//! tactor into the forearm, a capacitive force sensor, a PID position loop
//! and the calibration/runtime/e-stop mode machine.

mod fsm;
mod pid;
mod skin;

pub use fsm::{fsm_transition, DeviceEvent, DeviceMode};
pub use pid::PidState;
pub use skin::{read_force_sensor, skin_force, SkinModel};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Actuator stroke, mm.
pub const STROKE_MM: f64 = 30.0;
/// Force sensor full scale, N.
pub const SENSOR_FULL_SCALE_N: f64 = 45.0;
/// Hard ceiling on the force the device will ever command, N.
pub const MAX_COMMANDED_FORCE_N: f64 = 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("actuator position {0} mm outside [0, {STROKE_MM}]")]
    PositionOutOfRange(f64),
    #[error("force {0} N outside [0, {SENSOR_FULL_SCALE_N}]")]
    ForceOutOfRange(f64),
    #[error("timestep must be finite and positive, got {0}")]
    InvalidTimestep(f64),
    #[error("device state is not finite")]
    NonFiniteState,
    #[error("device is in EStop")]
    EStopped,
}

/// Actuator extension in millimetres, within the stroke.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ActuatorPos(f64);

impl ActuatorPos {
    pub fn new(mm: f64) -> Result<Self, DeviceError> {
        if mm.is_finite() && (0.0..=STROKE_MM).contains(&mm) {
            Ok(Self(mm))
        } else {
            Err(DeviceError::PositionOutOfRange(mm))
        }
    }

    /// Clamp into the stroke. NaN maps to 0.
    pub fn saturating(mm: f64) -> Self {
        if mm.is_nan() {
            return Self(0.0);
        }
        Self(mm.clamp(0.0, STROKE_MM))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Force in newtons, within the sensor range.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ForceN(f64);

impl ForceN {
    pub const ZERO: ForceN = ForceN(0.0);

    pub fn new(n: f64) -> Result<Self, DeviceError> {
        if n.is_finite() && (0.0..=SENSOR_FULL_SCALE_N).contains(&n) {
            Ok(Self(n))
        } else {
            Err(DeviceError::ForceOutOfRange(n))
        }
    }

    pub fn saturating(n: f64) -> Self {
        if n.is_nan() {
            return Self(0.0);
        }
        Self(n.clamp(0.0, SENSOR_FULL_SCALE_N))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Actuator and controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    /// mm/s
    pub max_speed: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// mm·s
    pub integral_limit: f64,
    /// Control tick, s.
    pub dt: f64,
    /// Pre-contact rest position used whenever haptics are off, mm.
    pub park_pos: f64,
    /// N, at most [`MAX_COMMANDED_FORCE_N`].
    pub force_limit: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            max_speed: 12.0,
            kp: 8.0,
            ki: 2.0,
            kd: 0.1,
            integral_limit: 5.0,
            dt: 0.01,
            park_pos: 6.0,
            force_limit: MAX_COMMANDED_FORCE_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub mode: DeviceMode,
    pub pos: ActuatorPos,
    pub target_pos: ActuatorPos,
    pub pid: PidState,
    pub measured_force: ForceN,
    /// Simulated time, s.
    pub clock: f64,
}

/// The simulated wearable. Single owner, advanced by [`Device::step`].
#[derive(Debug, Clone)]
pub struct Device {
    config: DeviceConfig,
    skin: SkinModel,
    state: DeviceState,
    true_force: ForceN,
    velocity: f64,
    rng: ChaCha8Rng,
}

impl Device {
    /// A device powered up in calibration mode, resting at the park position.
    pub fn new(config: DeviceConfig, skin: SkinModel, sensor_seed: u64) -> Self {
        let park = ActuatorPos::saturating(config.park_pos);
        let pid = PidState::new(config.kp, config.ki, config.kd, config.max_speed, config.integral_limit);
        let true_force = skin_force(park, &skin);
        Self {
            state: DeviceState {
                mode: DeviceMode::Calibration,
                pos: park,
                target_pos: park,
                pid,
                measured_force: true_force,
                clock: 0.0,
            },
            config,
            skin,
            true_force,
            velocity: 0.0,
            rng: ChaCha8Rng::seed_from_u64(sensor_seed),
        }
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn skin(&self) -> &SkinModel {
        &self.skin
    }

    pub fn mode(&self) -> DeviceMode {
        self.state.mode
    }

    pub fn position(&self) -> f64 {
        self.state.pos.get()
    }

    pub fn target(&self) -> f64 {
        self.state.target_pos.get()
    }

    pub fn measured_force(&self) -> f64 {
        self.state.measured_force.get()
    }

    /// Force actually pressing on the skin, i.e. what a wearer feels.
    pub fn true_force(&self) -> ForceN {
        self.true_force
    }

    /// Velocity commanded on the last step, mm/s.
    pub fn commanded_velocity(&self) -> f64 {
        self.velocity
    }

    /// Deepest extension the device will command given the force ceiling.
    pub fn max_safe_position(&self) -> f64 {
        self.skin
            .position_for_force(self.config.force_limit.min(MAX_COMMANDED_FORCE_N))
            .min(STROKE_MM)
    }

    /// Set the position setpoint, clamped to the stroke and force ceiling.
    pub fn set_target(&mut self, mm: f64) -> Result<(), DeviceError> {
        if self.state.mode == DeviceMode::EStop {
            return Err(DeviceError::EStopped);
        }
        if !mm.is_finite() {
            return Err(DeviceError::PositionOutOfRange(mm));
        }
        let limited = mm.min(self.max_safe_position());
        self.state.target_pos = ActuatorPos::saturating(limited);
        Ok(())
    }

    pub fn park(&mut self) -> Result<(), DeviceError> {
        self.set_target(self.config.park_pos)
    }

    pub fn handle(&mut self, event: DeviceEvent) -> DeviceMode {
        let before = self.state.mode;
        let after = fsm_transition(before, event);
        if after != before {
            self.state.pid.reset();
            if after == DeviceMode::EStop {
                self.velocity = 0.0;
                self.state.target_pos = self.state.pos;
            }
        }
        self.state.mode = after;
        after
    }

    /// Advance the closed loop by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> Result<(), DeviceError> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(DeviceError::InvalidTimestep(dt));
        }
        let pos = self.state.pos.get();
        let target = self.state.target_pos.get();
        if !pos.is_finite() || !target.is_finite() || !self.state.clock.is_finite() {
            return Err(DeviceError::NonFiniteState);
        }

        self.velocity = if self.state.mode == DeviceMode::EStop {
            0.0
        } else {
            self.state.pid.update(target - pos, dt)
        };
        let max_step = self.config.max_speed * dt;
        let delta = (self.velocity * dt).clamp(-max_step, max_step);
        // hard stop at the force ceiling even if the loop overshoots
        let next = (pos + delta).min(self.max_safe_position().max(pos.min(STROKE_MM)));
        self.state.pos = ActuatorPos::saturating(next);
        self.state.clock += dt;

        self.true_force = skin_force(self.state.pos, &self.skin);
        self.state.measured_force = read_force_sensor(self.true_force, &self.skin, &mut self.rng);
        Ok(())
    }
}

/// Step `device` until `pred` holds or `max_time` seconds elapse. Returns the
/// simulated time spent.
pub fn run_until<F>(device: &mut Device, max_time: f64, mut pred: F) -> Result<f64, DeviceError>
where
    F: FnMut(&Device) -> bool,
{
    let dt = device.config.dt;
    let mut t = 0.0;
    let steps = (max_time / dt).ceil() as u64;
    for _ in 0..steps {
        if pred(device) {
            return Ok(t);
        }
        device.step(dt)?;
        t += dt;
    }
    Ok(t)
}
