//! One-degree-of-freedom virtual elbow driven by keypad presses.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mapping::{AngleDeg, MAX_ANGLE_DEG};

/// Possible step sizes for a single key press, degrees.
pub const STEP_SIZES_DEG: [f64; 2] = [1.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyDirection {
    /// Decrease the elbow angle.
    Flex,
    /// Increase the elbow angle.
    Extend,
}

#[derive(Debug, Clone)]
pub struct ArmState {
    angle: AngleDeg,
    key_count: u32,
    last_step: Option<f64>,
    rng: ChaCha8Rng,
}

impl ArmState {
    pub fn new(seed: u64) -> Self {
        Self::with_rng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(rng: ChaCha8Rng) -> Self {
        Self {
            angle: AngleDeg::FULL_EXTENSION,
            key_count: 0,
            last_step: None,
            rng,
        }
    }

    /// Start from `angle` instead of full extension.
    pub fn starting_at(mut self, angle: AngleDeg) -> Self {
        self.angle = angle;
        self
    }

    pub fn angle(&self) -> AngleDeg {
        self.angle
    }

    pub fn key_count(&self) -> u32 {
        self.key_count
    }

    /// Unclamped magnitude drawn for the most recent press.
    pub fn last_step(&self) -> Option<f64> {
        self.last_step
    }

    /// Apply one key press. The step is 1° or 3° with equal probability; a
    /// press against a bound still counts.
    pub fn apply_key(&mut self, direction: KeyDirection) -> AngleDeg {
        let step = STEP_SIZES_DEG[self.rng.random_range(0..STEP_SIZES_DEG.len())];
        let signed = match direction {
            KeyDirection::Flex => -step,
            KeyDirection::Extend => step,
        };
        self.angle = AngleDeg::saturating(self.angle.get() + signed);
        self.key_count += 1;
        self.last_step = Some(step);
        self.angle
    }

    /// Back to full extension with the press counter cleared. The random
    /// stream keeps its position.
    pub fn reset(&mut self) {
        self.angle = AngleDeg::new(MAX_ANGLE_DEG).expect("180 is in range");
        self.key_count = 0;
        self.last_step = None;
    }

    /// Clear only the press counter, e.g. at the start of a trial.
    pub fn clear_key_count(&mut self) {
        self.key_count = 0;
    }
}
