use super::{MlpArchitecture, MlpError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Draws weights from N(0, (scale / sqrt(fan_in))^2). First-layer weights and
/// biases use fan-in `d`; second-layer weights and output biases use `M`.
pub fn init_weights(arch: &MlpArchitecture, seed: u64, scale: f64) -> Result<Vec<f64>, MlpError> {
    arch.validate()?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(MlpError::NonFinite("init scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = Normal::new(0.0, scale / (arch.inputs as f64).sqrt()).expect("positive deviation");
    let second = Normal::new(0.0, scale / (arch.hidden as f64).sqrt()).expect("positive deviation");
    let split = arch.second_weight_offset();
    Ok((0..arch.num_weights())
        .map(|i| {
            if i < split {
                first.sample(&mut rng)
            } else {
                second.sample(&mut rng)
            }
        })
        .collect())
}
