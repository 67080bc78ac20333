use std::collections::VecDeque;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::arm::ArmState;
use crate::config::SessionConfig;
use crate::device::{Device, DeviceError, DeviceEvent, DeviceMode};
use crate::log::{LogError, LogHeader, SampleRecord, SessionLog, SessionStatus, TrialRecord, SCHEMA_VERSION};
use crate::mapping::{AngleDeg, AngleMapping, CalibrationResult, LinearMapping, MappingError};
use crate::rng::{stream_rng, Stream};

use super::participant::{Action, CalibrationSignal, Observation, Participant, ParticipantError, Stage};
use super::plan::{build_session_plan, Condition, Group, PhaseKind, PhasePlan, SessionPlan};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("device must be in calibration mode to calibrate, found {0:?}")]
    NotInCalibration(DeviceMode),
    #[error("session has already run")]
    AlreadyRun,
}

/// Paces the control loop. Simulated participants run unpaced; live
/// sessions sleep to wall-clock tick boundaries.
pub trait Pacer {
    fn wait_tick(&mut self);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Unpaced;

impl Pacer for Unpaced {
    fn wait_tick(&mut self) {}
}

#[derive(Debug)]
pub struct WallClock {
    period: Duration,
    next: Option<Instant>,
}

impl WallClock {
    /// `time_scale` simulated seconds elapse per wall-clock second.
    pub fn new(dt: f64, time_scale: f64) -> Self {
        Self {
            period: Duration::from_secs_f64(dt / time_scale),
            next: None,
        }
    }
}

impl Pacer for WallClock {
    fn wait_tick(&mut self) {
        let now = Instant::now();
        let next = self.next.unwrap_or(now) + self.period;
        if next > now {
            std::thread::sleep(next - now);
            self.next = Some(next);
        } else {
            // fell behind; resynchronise rather than burst
            self.next = Some(now);
        }
    }
}

/// Why the run loop stopped early.
enum Interrupt {
    Safety,
    Disconnected,
    CalibrationFailed,
    Fault(SessionError),
}

macro_rules! fault_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Interrupt {
            fn from(e: $t) -> Self {
                Interrupt::Fault(e.into())
            }
        }
    )*};
}

fault_from!(DeviceError, LogError, MappingError);

#[derive(Debug, Clone, Copy, PartialEq)]
enum Drive {
    Park,
    FollowArm,
    Position(f64),
}

struct Tick {
    stage: Stage,
    started: bool,
    drive: Drive,
    arm_visible: bool,
    condition: Option<Condition>,
}

/// One participant's session: calibration, the learning phases and the four
/// testing conditions, run tick by tick against the simulated device.
pub struct Session<P, C = Unpaced> {
    cfg: SessionConfig,
    plan: SessionPlan,
    device: Device,
    arm: ArmState,
    mapping: Option<LinearMapping>,
    participant: P,
    pacer: C,
    log: SessionLog,
    tick: u64,
    force_window: VecDeque<f64>,
    window_len: usize,
    finished: bool,
}

impl<P: Participant> Session<P, Unpaced> {
    pub fn new(cfg: &SessionConfig, participant_id: &str, group: Group, participant: P) -> Result<Self, SessionError> {
        Session::with_pacer(cfg, participant_id, group, participant, Unpaced)
    }
}

impl<P: Participant, C: Pacer> Session<P, C> {
    pub fn with_pacer(
        cfg: &SessionConfig,
        participant_id: &str,
        group: Group,
        participant: P,
        pacer: C,
    ) -> Result<Self, SessionError> {
        let seed = cfg.session.seed;
        let plan = build_session_plan(seed, group, cfg.blocks);
        let log = SessionLog::new(LogHeader {
            schema_version: SCHEMA_VERSION,
            seed,
            config_hash: cfg.hash(),
            participant_id: participant_id.to_string(),
            group,
            status: SessionStatus::Complete,
        })?;
        let sensor_seed = {
            use rand::Rng;
            stream_rng(seed, Stream::Sensor).random::<u64>()
        };
        let window_len = cfg.ticks(cfg.timing.steady_window_s).max(1) as usize;
        Ok(Self {
            plan,
            device: Device::new(cfg.device.clone(), cfg.skin.clone(), sensor_seed),
            arm: ArmState::with_rng(stream_rng(seed, Stream::Arm)),
            mapping: None,
            participant,
            pacer,
            log,
            tick: 0,
            force_window: VecDeque::with_capacity(window_len),
            window_len,
            finished: false,
            cfg: cfg.clone(),
        })
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Run to completion or interruption. Safety stops, disconnects and
    /// failed calibration still return the partial log with its status set;
    /// only internal faults are errors. The session keeps its final device
    /// state for inspection and cannot be run again.
    pub fn run(&mut self) -> Result<SessionLog, SessionError> {
        if self.finished {
            return Err(SessionError::AlreadyRun);
        }
        self.finished = true;
        let status = match self.run_inner() {
            Ok(()) => SessionStatus::Complete,
            Err(Interrupt::Safety) => SessionStatus::SafetyStop,
            Err(Interrupt::Disconnected) => SessionStatus::Disconnected,
            Err(Interrupt::CalibrationFailed) => SessionStatus::CalibrationFailed,
            Err(Interrupt::Fault(e)) => return Err(e),
        };
        self.log.header.status = status;
        let empty = SessionLog::new(self.log.header.clone())?;
        Ok(std::mem::replace(&mut self.log, empty))
    }

    fn run_inner(&mut self) -> Result<(), Interrupt> {
        let calib = self.run_calibration()?;
        self.log.set_calibration(calib);
        self.mapping = Some(LinearMapping::new(calib)?);
        let phases = self.plan.phases.clone();
        for phase in &phases {
            self.instructions(phase.kind)?;
            self.run_phase(phase)?;
        }
        Ok(())
    }

    fn dt(&self) -> f64 {
        self.cfg.device.dt
    }

    fn now(&self) -> f64 {
        self.tick as f64 * self.dt()
    }

    fn step(&mut self, tick: Tick) -> Result<Option<Action>, Interrupt> {
        let target_mm = match tick.drive {
            Drive::Park => self.cfg.device.park_pos,
            Drive::FollowArm => match &self.mapping {
                Some(m) => m.to_position(self.arm.angle()).get(),
                None => self.cfg.device.park_pos,
            },
            Drive::Position(mm) => mm,
        };
        self.device.set_target(target_mm)?;
        self.device.step(self.dt())?;
        self.tick += 1;
        let t = self.now();

        let measured = self.device.measured_force();
        if self.force_window.len() == self.window_len {
            self.force_window.pop_front();
        }
        self.force_window.push_back(measured);

        if self.tick % u64::from(self.cfg.logging.sample_decimation) == 0 {
            self.log.append_sample(SampleRecord {
                t,
                actuator_pos: self.device.position(),
                commanded_pos: self.device.target(),
                force: measured,
                arm_angle: self.arm.angle().get(),
                phase: tick.stage.phase(),
                condition: tick.condition,
            })?;
        }

        self.pacer.wait_tick();

        let obs = Observation {
            t,
            stage: tick.stage,
            stage_started: tick.started,
            arm: tick.arm_visible.then(|| self.arm.angle()),
            haptic_active: tick.drive != Drive::Park,
            felt_force: self.device.true_force(),
        };
        match self.participant.observe(&obs) {
            Err(ParticipantError::Disconnected) => Err(Interrupt::Disconnected),
            Ok(Some(Action::Safety)) => {
                self.device.handle(DeviceEvent::SafetyPressed);
                Err(Interrupt::Safety)
            }
            Ok(action) => Ok(action),
        }
    }

    fn steady_force(&self) -> f64 {
        if self.force_window.is_empty() {
            return 0.0;
        }
        self.force_window.iter().sum::<f64>() / self.force_window.len() as f64
    }

    fn run_calibration(&mut self) -> Result<CalibrationResult, Interrupt> {
        if self.device.mode() != DeviceMode::Calibration {
            return Err(Interrupt::Fault(SessionError::NotInCalibration(self.device.mode())));
        }
        let cal = self.cfg.calibration.clone();
        let dt = self.dt();
        let park = self.cfg.device.park_pos;
        let limit = self.device.max_safe_position();
        let settle_ticks = self.cfg.ticks(cal.settle_timeout_s);

        // (min_pos, max_pos, min_force, max_force)
        let mut reps: Vec<[f64; 4]> = Vec::new();
        let mut attempts = 0;
        while reps.len() < cal.repetitions as usize {
            if attempts >= cal.max_attempts {
                return Err(Interrupt::CalibrationFailed);
            }
            attempts += 1;

            let mut started = true;
            for i in 0..settle_ticks {
                if (self.device.position() - park).abs() < 0.01 && self.device.commanded_velocity().abs() < 1e-3 {
                    break;
                }
                self.step(Tick {
                    stage: Stage::Instructions {
                        next: PhaseKind::Calibration,
                        remaining_s: (settle_ticks - i) as f64 * dt,
                    },
                    started,
                    drive: Drive::Park,
                    arm_visible: false,
                    condition: None,
                })?;
                started = false;
            }

            let mut command = self.device.position();
            let mut awaiting = CalibrationSignal::Detection;
            let mut detection: Option<(f64, f64)> = None;
            let mut started = true;
            let mut ticks_at_limit = 0;
            loop {
                command = (command + cal.ramp_rate * dt).min(limit);
                let action = self.step(Tick {
                    stage: Stage::Calibration {
                        completed: reps.len() as u32,
                        required: cal.repetitions,
                        awaiting,
                    },
                    started,
                    drive: Drive::Position(command),
                    arm_visible: false,
                    condition: None,
                })?;
                started = false;
                match (action, awaiting) {
                    (Some(Action::Signal(CalibrationSignal::Detection)), CalibrationSignal::Detection) => {
                        detection = Some((self.device.position(), self.device.measured_force()));
                        awaiting = CalibrationSignal::Comfort;
                        started = true;
                    }
                    (Some(Action::Signal(CalibrationSignal::Comfort)), CalibrationSignal::Comfort) => {
                        let (min_pos, min_force) = detection.expect("detection recorded first");
                        reps.push([min_pos, self.device.position(), min_force, self.device.measured_force()]);
                        break;
                    }
                    // discomfort reported before any pressure was felt
                    (Some(Action::Signal(CalibrationSignal::Comfort)), CalibrationSignal::Detection) => break,
                    _ => {}
                }
                if command >= limit {
                    ticks_at_limit += 1;
                    if ticks_at_limit > settle_ticks {
                        // ramp exhausted without a comfort signal
                        break;
                    }
                }
            }
        }

        let n = reps.len() as f64;
        let mean = |k: usize| reps.iter().map(|r| r[k]).sum::<f64>() / n;
        let calib = CalibrationResult::new(mean(0), mean(1), mean(2), mean(3), reps.len() as u32)
            .map_err(|_| Interrupt::CalibrationFailed)?;
        self.device.handle(DeviceEvent::CalibrationDone);
        Ok(calib)
    }

    fn instructions(&mut self, next: PhaseKind) -> Result<(), Interrupt> {
        let ticks = self.cfg.ticks(self.cfg.timing.instruction_s);
        for i in 0..ticks {
            self.step(Tick {
                stage: Stage::Instructions {
                    next,
                    remaining_s: (ticks - i) as f64 * self.dt(),
                },
                started: i == 0,
                drive: Drive::Park,
                arm_visible: false,
                condition: None,
            })?;
        }
        Ok(())
    }

    fn run_phase(&mut self, phase: &PhasePlan) -> Result<(), Interrupt> {
        self.arm.reset();
        match phase.kind {
            PhaseKind::Explore => self.explore(phase),
            PhaseKind::HapticFeedback => self.haptic_feedback(phase),
            PhaseKind::Target | PhaseKind::Practice | PhaseKind::Testing => self.matching(phase),
            PhaseKind::Calibration | PhaseKind::Instructions => Ok(()),
        }
    }

    fn explore(&mut self, phase: &PhasePlan) -> Result<(), Interrupt> {
        let ticks = self.cfg.ticks(self.cfg.timing.explore_s);
        for i in 0..ticks {
            let action = self.step(Tick {
                stage: Stage::Explore {
                    remaining_s: (ticks - i) as f64 * self.dt(),
                },
                started: i == 0,
                drive: Drive::FollowArm,
                arm_visible: true,
                condition: Some(phase.condition),
            })?;
            if let Some(Action::Key(dir)) = action {
                self.arm.apply_key(dir);
            }
        }
        Ok(())
    }

    fn haptic_feedback(&mut self, phase: &PhasePlan) -> Result<(), Interrupt> {
        let dwell = self.cfg.timing.haptic_dwell_s;
        let mapping = self.mapping.expect("calibrated before learning");
        for (b, block) in phase.blocks.iter().enumerate() {
            for (i, &target) in block.targets.iter().enumerate() {
                let start = self.tick;
                let position = mapping.to_position(target).get();
                self.force_window.clear();
                let mut started = true;
                loop {
                    let elapsed = (self.tick - start) as f64 * self.dt();
                    let action = self.step(Tick {
                        stage: Stage::Stimulus {
                            target,
                            // time left once this tick has elapsed
                            remaining_s: dwell - elapsed - self.dt(),
                        },
                        started,
                        drive: Drive::Position(position),
                        arm_visible: false,
                        condition: Some(phase.condition),
                    })?;
                    started = false;
                    let elapsed = (self.tick - start) as f64 * self.dt();
                    // a tick of slack absorbs the rounding in tick counting
                    if action == Some(Action::Confirm) && elapsed + 0.5 * self.dt() >= dwell {
                        break;
                    }
                }
                self.record_trial(phase, b, i, target, target, start, 0)?;
            }
        }
        Ok(())
    }

    fn matching(&mut self, phase: &PhasePlan) -> Result<(), Interrupt> {
        let condition = phase.condition;
        let drive = if condition.has_haptic() {
            Drive::FollowArm
        } else {
            Drive::Park
        };
        for (b, block) in phase.blocks.iter().enumerate() {
            for (i, &target) in block.targets.iter().enumerate() {
                self.arm.clear_key_count();
                self.force_window.clear();
                let start = self.tick;
                let mut started = true;
                loop {
                    let action = self.step(Tick {
                        stage: Stage::Trial {
                            phase: phase.kind,
                            condition,
                            target,
                            block: b as u32,
                            trial: i as u32,
                        },
                        started,
                        drive,
                        arm_visible: condition.has_visual(),
                        condition: Some(condition),
                    })?;
                    started = false;
                    match action {
                        Some(Action::Key(dir)) => {
                            self.arm.apply_key(dir);
                        }
                        Some(Action::Confirm) => break,
                        _ => {}
                    }
                }
                let final_angle = self.arm.angle();
                let presses = self.arm.key_count();
                self.record_trial(phase, b, i, target, final_angle, start, presses)?;

                if phase.kind == PhaseKind::Practice {
                    self.corrective(phase, target)?;
                }
            }
        }
        Ok(())
    }

    fn corrective(&mut self, phase: &PhasePlan, target: AngleDeg) -> Result<(), Interrupt> {
        let ticks = self.cfg.ticks(self.cfg.timing.corrective_s);
        for i in 0..ticks {
            self.step(Tick {
                stage: Stage::Corrective {
                    target,
                    arm: self.arm.angle(),
                    remaining_s: (ticks - i) as f64 * self.dt(),
                },
                started: i == 0,
                drive: Drive::FollowArm,
                arm_visible: true,
                condition: Some(phase.condition),
            })?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn record_trial(
        &mut self,
        phase: &PhasePlan,
        block: usize,
        trial: usize,
        target: AngleDeg,
        final_angle: AngleDeg,
        start_tick: u64,
        key_presses: u32,
    ) -> Result<(), Interrupt> {
        let record = TrialRecord {
            phase: phase.kind,
            condition: phase.condition,
            block_index: block as u32,
            trial_index: trial as u32,
            target,
            final_angle,
            signed_error: final_angle.get() - target.get(),
            duration: (self.tick - start_tick) as f64 * self.dt(),
            key_presses,
            steady_force: self.steady_force(),
            end_time: self.now(),
        };
        self.log.append_trial(record)?;
        Ok(())
    }
}
