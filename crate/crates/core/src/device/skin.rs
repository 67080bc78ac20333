use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ActuatorPos, ForceN};

/// Linear spring tissue model plus the force sensor's noise envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkinModel {
    /// Extension at which the tactor first touches the skin, mm.
    pub contact_pos: f64,
    /// N/mm, strictly positive.
    pub stiffness: f64,
    /// Standard deviation of additive sensor noise, N.
    pub sensor_noise_sigma: f64,
    /// Sensor resolution, N. Zero disables quantization.
    pub quantization_step: f64,
}

impl Default for SkinModel {
    fn default() -> Self {
        Self {
            contact_pos: 8.0,
            stiffness: 1.5,
            sensor_noise_sigma: 0.05,
            quantization_step: 0.02,
        }
    }
}

impl SkinModel {
    /// Noise-free variant, used by deterministic tests.
    pub fn noiseless(self) -> Self {
        Self {
            sensor_noise_sigma: 0.0,
            quantization_step: 0.0,
            ..self
        }
    }

    /// Extension that produces `force` under this model.
    pub fn position_for_force(&self, force: f64) -> f64 {
        self.contact_pos + force.max(0.0) / self.stiffness
    }
}

/// Force exerted on the skin at a given extension. Zero up to contact.
pub fn skin_force(extension: ActuatorPos, skin: &SkinModel) -> ForceN {
    let indentation = (extension.get() - skin.contact_pos).max(0.0);
    ForceN::saturating(skin.stiffness * indentation)
}

/// One reading of the capacitive force sensor: additive Gaussian noise,
/// quantization, then clamp to the sensor's full scale.
pub fn read_force_sensor<R: Rng + ?Sized>(true_force: ForceN, skin: &SkinModel, rng: &mut R) -> ForceN {
    let mut f = true_force.get();
    if skin.sensor_noise_sigma > 0.0 {
        // sigma is validated positive and finite, construction cannot fail
        let noise = Normal::new(0.0, skin.sensor_noise_sigma).expect("valid sigma");
        f += noise.sample(rng);
    }
    if skin.quantization_step > 0.0 {
        f = (f / skin.quantization_step).round() * skin.quantization_step;
    }
    ForceN::saturating(f)
}
