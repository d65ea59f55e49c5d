use super::BayesError;
use crate::mlp::MlpArchitecture;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Dispute probability in [0, 1].
    pub probability: f64,
    /// In [0, 1]; 1 means fully confident.
    pub confidence: f64,
}

fn output(arch: &MlpArchitecture, w: &[f64], x: &[f64]) -> Result<f64, BayesError> {
    Ok(arch.forward(w, x)?[0].clamp(0.0, 1.0))
}

/// Single-network prediction; confidence is the margin `2 |p - 0.5|`.
pub fn predictive_map(arch: &MlpArchitecture, weights: &[f64], x: &[f64]) -> Result<Prediction, BayesError> {
    let p = output(arch, weights, x)?;
    Ok(Prediction {
        probability: p,
        confidence: 2.0 * (p - 0.5).abs(),
    })
}

/// Ensemble mean; confidence is `1 - 2 * std` of the member outputs (population
/// deviation), floored at 0.
pub fn predictive_ensemble(arch: &MlpArchitecture, samples: &[Vec<f64>], x: &[f64]) -> Result<Prediction, BayesError> {
    if samples.is_empty() {
        return Err(BayesError::EmptyEnsemble);
    }
    let ys = samples
        .iter()
        .map(|w| output(arch, w, x))
        .collect::<Result<Vec<f64>, _>>()?;
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    Ok(Prediction {
        probability: mean.clamp(0.0, 1.0),
        confidence: (1.0 - 2.0 * var.sqrt()).clamp(0.0, 1.0),
    })
}
