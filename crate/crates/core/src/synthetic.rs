//! Synthetic participants.
//!
//! A participant keeps a running estimate of its arm angle. Key presses move
//! the estimate by the expected step (2°) and grow its variance; when the
//! arm is on screen the estimate is simply the displayed angle. With haptic
//! feedback but no display, each felt force is compared with the remembered
//! force for the target angle and converted to an angle reading through the
//! slope of the remembered force table, then fused with the estimate by
//! inverse-variance weighting. Without either channel the participant counts
//! presses (pure feedforward).
//!
//! Perception follows Weber's law: a felt force is the true force times
//! `1 + ε`, `ε ~ N(0, w²)`, and nothing is felt below the detection
//! threshold.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arm::KeyDirection;
use crate::device::ForceN;
use crate::mapping::{AngleDeg, MAX_ANGLE_DEG, MIN_ANGLE_DEG};
use crate::protocol::{
    canonical_angles, nearest_canonical, Action, CalibrationSignal, Condition, Observation, Participant,
    ParticipantError, Stage, BLOCK_LEN,
};
use crate::rng::{stream_rng, Stream};

/// Expected angle change per key press, deg.
pub const EXPECTED_STEP_DEG: f64 = 2.0;
/// Variance of a single press around the expected step, deg².
pub const STEP_VARIANCE: f64 = 1.0;

/// Cohort-level parameters of the synthetic participant model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub weber_fraction: f64,
    /// Cohort mean, N.
    pub detection_threshold: f64,
    /// Cohort mean, N.
    pub comfort_limit: f64,
    /// Between-participant spread of the detection threshold, N.
    pub detection_sd: f64,
    /// Between-participant spread of the comfort limit, N.
    pub comfort_sd: f64,
    /// Drift of the remembered arm angle at the start of each unseen trial, deg.
    pub memory_noise: f64,
    pub key_interval_s: f64,
    pub think_time_s: f64,
    pub confirm_tolerance_deg: f64,
    /// Learn from a known angle only when it is this close to a target angle.
    pub learn_window_deg: f64,
    /// Reference uncertainty after a single exposure, N.
    pub initial_uncertainty: f64,
    pub uncertainty_floor: f64,
    pub max_presses: u32,
    /// Extra presses toward a bound when the target sits on it.
    pub bound_extra_presses: u32,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            weber_fraction: 0.10,
            detection_threshold: 0.41,
            comfort_limit: 6.42,
            detection_sd: 0.1,
            comfort_sd: 1.5,
            memory_noise: 16.0,
            key_interval_s: 0.3,
            think_time_s: 1.0,
            confirm_tolerance_deg: 1.0,
            learn_window_deg: 7.5,
            initial_uncertainty: 1.0,
            uncertainty_floor: 0.02,
            max_presses: 200,
            bound_extra_presses: 3,
        }
    }
}

impl SyntheticConfig {
    /// No perceptual, memory or between-participant noise.
    pub fn noiseless(self) -> Self {
        Self {
            weber_fraction: 0.0,
            memory_noise: 0.0,
            detection_sd: 0.0,
            comfort_sd: 0.0,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionModel {
    pub weber_fraction: f64,
    pub detection_threshold: f64,
    pub comfort_limit: f64,
    /// deg
    pub memory_noise: f64,
}

impl PerceptionModel {
    pub fn new(weber_fraction: f64, detection_threshold: f64, comfort_limit: f64, memory_noise: f64) -> Result<Self, String> {
        if !(weber_fraction >= 0.0 && weber_fraction.is_finite()) {
            return Err(format!("weber_fraction must be >= 0, got {weber_fraction}"));
        }
        if !(detection_threshold < comfort_limit) {
            return Err("detection_threshold must be below comfort_limit".into());
        }
        if !(memory_noise >= 0.0 && memory_noise.is_finite()) {
            return Err(format!("memory_noise must be >= 0, got {memory_noise}"));
        }
        Ok(Self {
            weber_fraction,
            detection_threshold,
            comfort_limit,
            memory_noise,
        })
    }
}

/// Felt magnitude of `f_true`, or `None` when below the detection threshold.
pub fn perceive_force<R: Rng + ?Sized>(f_true: ForceN, model: &PerceptionModel, rng: &mut R) -> Option<f64> {
    let f = f_true.get();
    if f < model.detection_threshold {
        return None;
    }
    let eps = if model.weber_fraction > 0.0 {
        Normal::new(0.0, model.weber_fraction).expect("finite sigma").sample(rng)
    } else {
        0.0
    };
    Some((f * (1.0 + eps)).max(0.0))
}

/// Remembered force for one target angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceEntry {
    pub angle: f64,
    pub exposures: u32,
    pub mean: f64,
    m2: f64,
    /// N
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Flex,
    Extend,
    Confirm,
}

/// Mutable internal state of one synthetic participant.
#[derive(Debug, Clone)]
pub struct ParticipantState {
    references: [ReferenceEntry; BLOCK_LEN],
    initial_uncertainty: f64,
    uncertainty_floor: f64,
    /// Believed arm angle, deg.
    pub estimate: f64,
    /// deg²
    pub estimate_var: f64,
    recalled: Option<f64>,
    presses: u32,
    extra_remaining: u32,
}

impl ParticipantState {
    pub fn new(initial_uncertainty: f64, uncertainty_floor: f64) -> Self {
        let canonical = canonical_angles();
        Self {
            references: std::array::from_fn(|i| ReferenceEntry {
                angle: canonical[i].get(),
                exposures: 0,
                mean: 0.0,
                m2: 0.0,
                uncertainty: initial_uncertainty,
            }),
            initial_uncertainty,
            uncertainty_floor,
            estimate: MAX_ANGLE_DEG,
            estimate_var: 0.0,
            recalled: None,
            presses: 0,
            extra_remaining: 0,
        }
    }

    pub fn references(&self) -> &[ReferenceEntry; BLOCK_LEN] {
        &self.references
    }

    pub fn learned_count(&self) -> usize {
        self.references.iter().filter(|r| r.exposures > 0).count()
    }

    /// The arm is known to be at `angle` (it was reset or is on screen).
    pub fn know_angle(&mut self, angle: f64) {
        self.estimate = angle;
        self.estimate_var = 0.0;
    }

    /// Least-squares slope of the remembered force table, N/deg.
    pub fn reference_slope(&self) -> Option<f64> {
        let learned: Vec<&ReferenceEntry> = self.references.iter().filter(|r| r.exposures > 0).collect();
        if learned.len() < 2 {
            return None;
        }
        let n = learned.len() as f64;
        let ma = learned.iter().map(|r| r.angle).sum::<f64>() / n;
        let mf = learned.iter().map(|r| r.mean).sum::<f64>() / n;
        let sxy: f64 = learned.iter().map(|r| (r.angle - ma) * (r.mean - mf)).sum();
        let sxx: f64 = learned.iter().map(|r| (r.angle - ma).powi(2)).sum();
        let slope = sxy / sxx;
        // more pressure must mean more flexion, otherwise the table is useless
        (slope < 0.0).then_some(slope)
    }

    /// Start an unseen or seen trial toward `target`.
    pub fn begin_trial<R: Rng + ?Sized>(
        &mut self,
        target: AngleDeg,
        condition: Condition,
        cfg: &SyntheticConfig,
        rng: &mut R,
    ) {
        self.presses = 0;
        self.extra_remaining = if target.get() <= MIN_ANGLE_DEG || target.get() >= MAX_ANGLE_DEG {
            cfg.bound_extra_presses
        } else {
            0
        };
        if !condition.has_visual() && cfg.memory_noise > 0.0 {
            let drift = Normal::new(0.0, cfg.memory_noise).expect("finite sigma").sample(rng);
            self.estimate = (self.estimate + drift).clamp(MIN_ANGLE_DEG, MAX_ANGLE_DEG);
            self.estimate_var += cfg.memory_noise.powi(2);
        }
        self.recalled = None;
        if condition.has_haptic() {
            let entry = &self.references[nearest_canonical(target.get())];
            if entry.exposures > 0 {
                // zero memory noise turns off recall jitter as well as drift
                let sd = if cfg.memory_noise > 0.0 { entry.uncertainty.max(0.0) } else { 0.0 };
                let noise = Normal::new(0.0, sd).expect("finite sigma").sample(rng);
                self.recalled = Some(entry.mean + noise);
            }
        }
    }
}

/// Fold one exposure into the reference of the nearest target angle.
///
/// The mean is a running average. The uncertainty is a standard error whose
/// spread estimate pools the exposures with the initial uncertainty as one
/// prior pseudo-exposure, so a single exposure leaves it at the initial value
/// and identical exposures shrink it as `initial / n`. It never increases and
/// never drops below the floor.
pub fn learn_reference(state: &mut ParticipantState, angle: AngleDeg, percept: f64) {
    let floor = state.uncertainty_floor;
    let initial = state.initial_uncertainty;
    let entry = &mut state.references[nearest_canonical(angle.get())];
    entry.exposures += 1;
    let n = entry.exposures as f64;
    let delta = percept - entry.mean;
    entry.mean += delta / n;
    entry.m2 += delta * (percept - entry.mean);
    let spread = ((initial * initial + entry.m2.max(0.0)) / n).sqrt();
    let se = spread / n.sqrt();
    entry.uncertainty = if entry.exposures == 1 { se } else { entry.uncertainty.min(se) }.max(floor);
}

/// Choose the next key for a trial toward `target`.
///
/// `percept` is the felt force (`Some(0.0)` when nothing is felt) and is
/// only consulted under haptic conditions; `visible_arm` is the displayed
/// angle under visual conditions.
pub fn decide_key(
    state: &mut ParticipantState,
    target: AngleDeg,
    percept: Option<f64>,
    condition: Condition,
    visible_arm: Option<AngleDeg>,
    model: &PerceptionModel,
    cfg: &SyntheticConfig,
) -> Decision {
    let target = target.get();
    if let (true, Some(arm)) = (condition.has_visual(), visible_arm) {
        state.know_angle(arm.get());
    } else if condition.has_haptic() {
        if let (Some(p), Some(recalled), Some(slope)) = (percept, state.recalled, state.reference_slope()) {
            let reading = (target + (p - recalled) / slope).clamp(MIN_ANGLE_DEG, MAX_ANGLE_DEG);
            let entry = &state.references[nearest_canonical(target)];
            // judged against the expected force so low percepts are not over-trusted
            let force_var = (model.weber_fraction * recalled.max(model.detection_threshold)).powi(2) + entry.uncertainty.powi(2);
            let reading_var = force_var / slope.powi(2);
            let gain = (state.estimate_var + 1e-12) / (state.estimate_var + reading_var + 1e-12);
            state.estimate += gain * (reading - state.estimate);
            state.estimate_var *= 1.0 - gain;
        }
    }

    if state.presses >= cfg.max_presses {
        return Decision::Confirm;
    }
    let diff = state.estimate - target;
    let decision = if diff.abs() <= cfg.confirm_tolerance_deg {
        if state.extra_remaining > 0 && visible_arm.is_none() {
            state.extra_remaining -= 1;
            if target >= MAX_ANGLE_DEG {
                Decision::Extend
            } else {
                Decision::Flex
            }
        } else {
            Decision::Confirm
        }
    } else if diff > 0.0 {
        Decision::Flex
    } else {
        Decision::Extend
    };

    match decision {
        Decision::Flex => press(state, -EXPECTED_STEP_DEG),
        Decision::Extend => press(state, EXPECTED_STEP_DEG),
        Decision::Confirm => {}
    }
    decision
}

fn press(state: &mut ParticipantState, step: f64) {
    state.presses += 1;
    state.estimate = (state.estimate + step).clamp(MIN_ANGLE_DEG, MAX_ANGLE_DEG);
    state.estimate_var += STEP_VARIANCE;
}

/// A simulated participant wired to the session's participant boundary.
#[derive(Debug, Clone)]
pub struct SyntheticParticipant {
    cfg: SyntheticConfig,
    model: PerceptionModel,
    state: ParticipantState,
    rng: ChaCha8Rng,
    next_action_t: f64,
    explore_direction: KeyDirection,
}

impl SyntheticParticipant {
    /// Draws this participant's detection threshold and comfort limit around
    /// the cohort means.
    pub fn new(cfg: &SyntheticConfig, seed: u64, force_ceiling: f64) -> Self {
        let mut rng = stream_rng(seed, Stream::Participant);
        let mut draw = |mean: f64, sd: f64| {
            if sd > 0.0 {
                Normal::new(mean, sd).expect("finite sigma").sample(&mut rng)
            } else {
                mean
            }
        };
        let detection = draw(cfg.detection_threshold, cfg.detection_sd).max(0.05);
        let comfort = draw(cfg.comfort_limit, cfg.comfort_sd)
            .max(detection + 1.0)
            .min(force_ceiling - 0.5);
        let model = PerceptionModel {
            weber_fraction: cfg.weber_fraction,
            detection_threshold: detection,
            comfort_limit: comfort.max(detection + 0.1),
            memory_noise: cfg.memory_noise,
        };
        Self::with_model(cfg, model, rng)
    }

    pub fn with_model(cfg: &SyntheticConfig, model: PerceptionModel, rng: ChaCha8Rng) -> Self {
        Self {
            cfg: cfg.clone(),
            model,
            state: ParticipantState::new(cfg.initial_uncertainty, cfg.uncertainty_floor),
            rng,
            next_action_t: 0.0,
            explore_direction: KeyDirection::Flex,
        }
    }

    pub fn model(&self) -> &PerceptionModel {
        &self.model
    }

    pub fn state(&self) -> &ParticipantState {
        &self.state
    }

    fn felt(&mut self, obs: &Observation) -> Option<f64> {
        perceive_force(obs.felt_force, &self.model, &mut self.rng)
    }

    /// Learn from a known arm angle. Off a target angle the percept is
    /// carried to the nearest one along the remembered slope, once there is
    /// a slope to use.
    fn maybe_learn(&mut self, angle: AngleDeg, obs: &Observation) {
        if !obs.haptic_active {
            return;
        }
        let canonical = canonical_angles()[nearest_canonical(angle.get())];
        let offset = canonical.get() - angle.get();
        if offset.abs() > self.cfg.learn_window_deg {
            return;
        }
        let percept = self.felt(obs).unwrap_or(0.0);
        if offset == 0.0 {
            learn_reference(&mut self.state, canonical, percept);
        } else if let Some(slope) = self.state.reference_slope() {
            learn_reference(&mut self.state, canonical, (percept + slope * offset).max(0.0));
        }
    }

    fn due(&mut self, t: f64) -> bool {
        if t + 1e-9 < self.next_action_t {
            return false;
        }
        self.next_action_t = t + self.cfg.key_interval_s;
        true
    }
}

impl Participant for SyntheticParticipant {
    fn observe(&mut self, obs: &Observation) -> Result<Option<Action>, ParticipantError> {
        let action = match obs.stage {
            // limits are judged on the pressure itself, not a noisy percept
            Stage::Calibration { awaiting, .. } => {
                let f = obs.felt_force.get();
                let signal = match awaiting {
                    CalibrationSignal::Detection => f >= self.model.detection_threshold,
                    CalibrationSignal::Comfort => f >= self.model.comfort_limit,
                };
                signal.then_some(Action::Signal(awaiting))
            }
            Stage::Instructions { .. } => {
                if obs.stage_started {
                    // every phase starts from full extension
                    self.state.know_angle(MAX_ANGLE_DEG);
                }
                None
            }
            Stage::Explore { .. } => {
                if obs.stage_started {
                    self.next_action_t = obs.t + self.cfg.think_time_s;
                }
                if !self.due(obs.t) {
                    return Ok(None);
                }
                // free play: target angles are not known yet, so nothing is memorised
                let arm = obs.arm.unwrap_or(AngleDeg::FULL_EXTENSION);
                if arm.get() <= MIN_ANGLE_DEG {
                    self.explore_direction = KeyDirection::Extend;
                } else if arm.get() >= MAX_ANGLE_DEG {
                    self.explore_direction = KeyDirection::Flex;
                }
                Some(Action::Key(self.explore_direction))
            }
            Stage::Trial { condition, target, .. } => {
                if obs.stage_started {
                    self.state.begin_trial(target, condition, &self.cfg, &mut self.rng);
                    self.next_action_t = obs.t + self.cfg.think_time_s;
                }
                if !self.due(obs.t) {
                    return Ok(None);
                }
                let percept = if obs.haptic_active {
                    Some(self.felt(obs).unwrap_or(0.0))
                } else {
                    None
                };
                let decision = decide_key(
                    &mut self.state,
                    target,
                    percept,
                    condition,
                    obs.arm,
                    &self.model,
                    &self.cfg,
                );
                match decision {
                    Decision::Flex => Some(Action::Key(KeyDirection::Flex)),
                    Decision::Extend => Some(Action::Key(KeyDirection::Extend)),
                    Decision::Confirm => {
                        if let Some(arm) = obs.arm {
                            self.maybe_learn(arm, obs);
                        }
                        Some(Action::Confirm)
                    }
                }
            }
            Stage::Stimulus { target, remaining_s } => {
                if remaining_s <= 1e-9 {
                    self.maybe_learn(target, obs);
                    Some(Action::Confirm)
                } else {
                    None
                }
            }
            Stage::Corrective { arm, .. } => {
                if obs.stage_started {
                    self.state.know_angle(arm.get());
                    self.maybe_learn(arm, obs);
                }
                None
            }
        };
        Ok(action)
    }
}
