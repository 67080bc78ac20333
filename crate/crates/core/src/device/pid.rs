use serde::{Deserialize, Serialize};

/// Position loop controller. Error is in millimetres, output is a velocity
/// command in mm/s.
///
/// Anti-windup is two-fold: the integral is clamped to `±integral_limit`, and
/// it is frozen on any step where the unclamped output already saturates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// mm·s
    pub integral: f64,
    /// mm
    pub prev_error: Option<f64>,
    /// mm/s
    pub output_limit: f64,
    /// mm·s
    pub integral_limit: f64,
}

impl PidState {
    pub fn new(kp: f64, ki: f64, kd: f64, output_limit: f64, integral_limit: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integral: 0.0,
            prev_error: None,
            output_limit,
            integral_limit,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    /// Advance the controller by `dt` seconds and return the clamped command.
    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        // no derivative kick on the first sample after a reset
        let derivative = match self.prev_error {
            Some(prev) => (error - prev) / dt,
            None => 0.0,
        };
        self.prev_error = Some(error);

        let candidate = (self.integral + error * dt).clamp(-self.integral_limit, self.integral_limit);
        let raw = self.kp * error + self.ki * candidate + self.kd * derivative;
        if raw.abs() <= self.output_limit {
            self.integral = candidate;
        }
        raw.clamp(-self.output_limit, self.output_limit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_gives_zero_command() {
        let mut pid = PidState::new(8.0, 2.0, 0.1, 12.0, 5.0);
        for _ in 0..10 {
            assert_eq!(pid.update(0.0, 0.01), 0.0);
        }
        assert_eq!(pid.integral, 0.0);
    }

    #[test]
    fn output_is_clamped() {
        let mut pid = PidState::new(8.0, 2.0, 0.1, 12.0, 5.0);
        assert_eq!(pid.update(100.0, 0.01), 12.0);
        assert_eq!(pid.update(-100.0, 0.01), -12.0);
    }

    #[test]
    fn integral_respects_bound() {
        let mut pid = PidState::new(0.0, 1.0, 0.0, 1e9, 5.0);
        for _ in 0..10_000 {
            pid.update(1.0, 0.01);
        }
        assert!((pid.integral - 5.0).abs() < 1e-12);
    }

    #[test]
    fn integral_frozen_while_saturated() {
        let mut pid = PidState::new(8.0, 2.0, 0.0, 12.0, 5.0);
        for _ in 0..100 {
            pid.update(10.0, 0.01);
        }
        assert_eq!(pid.integral, 0.0);
    }
}
