use super::ControlError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    pub initial_temperature: f64,
    /// Temperature multiplier applied after every step.
    pub cooling_factor: f64,
    pub steps: usize,
    /// Deviation of the Gaussian proposal in scaled units.
    pub proposal_scale: f64,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            initial_temperature: 0.1,
            cooling_factor: 0.995,
            steps: 1500,
            proposal_scale: 0.15,
            seed: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidConfig(m.into()));
        if !(self.initial_temperature >= 0.0 && self.initial_temperature.is_finite()) {
            return bad("initial_temperature must be finite and non-negative");
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return bad("cooling_factor must lie in (0, 1)");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.proposal_scale >= 0.0 && self.proposal_scale.is_finite()) {
            return bad("proposal_scale must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    /// Best cost so far: at the start, then after every step.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Folds `v` into [0, 1] by mirror reflection at the bounds.
pub fn reflect_unit(v: f64) -> f64 {
    let r = v.rem_euclid(2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

/// Simulated annealing on the unit box from `start`. Stops early once the
/// best cost falls below `target`. Returns the best point visited, so `f`
/// never exceeds the starting cost.
pub fn sa_minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    config: &SaConfig,
    target: Option<f64>,
) -> Result<SaOutcome, ControlError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ControlError::NonFinite(format!("objective at {x:?}")))
        }
    };
    let mut x: Vec<f64> = start.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut fx = eval(&x)?;
    let (mut best_x, mut best_f) = (x.clone(), fx);
    let mut trace = vec![fx];
    let mut temperature = config.initial_temperature;

    for _ in 0..config.steps {
        if target.is_some_and(|t| best_f < t) {
            break;
        }
        let y: Vec<f64> = x
            .iter()
            .map(|&v| {
                let step: f64 = rng.sample(StandardNormal);
                reflect_unit(v + config.proposal_scale * step)
            })
            .collect();
        let fy = eval(&y)?;
        let accept = fy <= fx || (temperature > 0.0 && rng.random::<f64>() < (-(fy - fx) / temperature).exp());
        if accept {
            x = y;
            fx = fy;
            if fx < best_f {
                best_f = fx;
                best_x.clone_from(&x);
            }
        }
        trace.push(best_f);
        temperature *= config.cooling_factor;
    }
    Ok(SaOutcome {
        x: best_x,
        f: best_f,
        trace,
        evaluations,
    })
}
