//! Two-layer perceptron: forward pass, penalized cross-entropy objective with
//! backpropagated gradients, scaled conjugate gradient training.
//!
//! Weight layout (tag [`WEIGHT_LAYOUT`]), for `d` inputs, `M` hidden units and
//! `K` outputs, concatenated in this order:
//!
//! | block | length | element for (row, col)        |
//! |-------|--------|-------------------------------|
//! | first-layer weights  | `M*d` | hidden `j`, input `i` at `j*d + i` |
//! | first-layer biases   | `M`   | hidden `j` at `j` |
//! | second-layer weights | `K*M` | output `k`, hidden `j` at `k*M + j` |
//! | output biases        | `K`   | output `k` at `k` |

mod init;
mod objective;
mod scg;

pub use init::init_weights;
pub use objective::{
    data_error, gauss_newton_hessian, gradient, objective, objective_and_gradient, ObjectiveConfig,
    TrainingSet, WeightGrouping, PREDICTION_CLAMP,
};
pub use scg::{scg_minimize, ScgLimits, ScgOutcome, ScgTermination};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WEIGHT_LAYOUT: &str = "w1-b1-w2-b2/row-major";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("empty training data")]
    EmptyData,
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Logistic,
    #[serde(alias = "tanh")]
    HyperbolicTangent,
    Softmax,
}

impl Activation {
    pub fn parse(s: &str) -> Option<Activation> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Some(Activation::Linear),
            "logistic" | "sigmoid" => Some(Activation::Logistic),
            "tanh" | "hyperbolic_tangent" => Some(Activation::HyperbolicTangent),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Logistic => "logistic",
            Activation::HyperbolicTangent => "tanh",
            Activation::Softmax => "softmax",
        }
    }

    /// True when outputs are probabilities in (0, 1).
    pub fn is_probabilistic(self) -> bool {
        matches!(self, Activation::Logistic | Activation::Softmax)
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn apply_hidden(act: Activation, a: f64) -> f64 {
    match act {
        Activation::Linear => a,
        Activation::Logistic => logistic(a),
        Activation::HyperbolicTangent => a.tanh(),
        Activation::Softmax => unreachable!("softmax is rejected for hidden layers"),
    }
}

/// Derivative of a hidden activation expressed through its output `z`.
fn hidden_derivative(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Linear => 1.0,
        Activation::Logistic => z * (1.0 - z),
        Activation::HyperbolicTangent => 1.0 - z * z,
        Activation::Softmax => unreachable!("softmax is rejected for hidden layers"),
    }
}

/// Applies the output activation in place. A single softmax output is the
/// two-class softmax against a fixed zero logit, i.e. the logistic function.
fn apply_output(act: Activation, a: &mut [f64]) {
    match act {
        Activation::Linear => {}
        Activation::Logistic => a.iter_mut().for_each(|x| *x = logistic(*x)),
        Activation::HyperbolicTangent => a.iter_mut().for_each(|x| *x = x.tanh()),
        Activation::Softmax if a.len() == 1 => a[0] = logistic(a[0]),
        Activation::Softmax => {
            let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for x in a.iter_mut() {
                *x = (*x - m).exp();
                s += *x;
            }
            a.iter_mut().for_each(|x| *x /= s);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpArchitecture {
    pub fn new(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, MlpError> {
        let arch = MlpArchitecture {
            inputs,
            hidden,
            outputs,
            hidden_activation,
            output_activation,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// `inputs` → `hidden` tanh units → one logistic output.
    pub fn classifier(inputs: usize, hidden: usize) -> Self {
        MlpArchitecture {
            inputs,
            hidden,
            outputs: 1,
            hidden_activation: Activation::HyperbolicTangent,
            output_activation: Activation::Logistic,
        }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if self.inputs == 0 || self.hidden == 0 || self.outputs == 0 {
            return Err(MlpError::InvalidArchitecture(
                "inputs, hidden and outputs must all be at least 1".into(),
            ));
        }
        if self.hidden_activation == Activation::Softmax {
            return Err(MlpError::InvalidArchitecture(
                "softmax is only allowed at the output layer".into(),
            ));
        }
        Ok(())
    }

    pub fn num_weights(&self) -> usize {
        let (d, m, k) = (self.inputs, self.hidden, self.outputs);
        m * d + m + k * m + k
    }

    pub fn first_bias_offset(&self) -> usize {
        self.hidden * self.inputs
    }

    pub fn second_weight_offset(&self) -> usize {
        self.first_bias_offset() + self.hidden
    }

    pub fn output_bias_offset(&self) -> usize {
        self.second_weight_offset() + self.outputs * self.hidden
    }

    pub fn check_weights(&self, w: &[f64]) -> Result<(), MlpError> {
        if w.len() != self.num_weights() {
            return Err(MlpError::DimensionMismatch {
                expected: self.num_weights(),
                got: w.len(),
            });
        }
        if let Some(i) = w.iter().position(|x| !x.is_finite()) {
            return Err(MlpError::NonFinite(format!("weight {i}")));
        }
        Ok(())
    }

    /// Hidden activations into `z` and outputs into `y`.
    pub(crate) fn forward_into(&self, w: &[f64], x: &[f64], z: &mut [f64], y: &mut [f64]) {
        let (d, m) = (self.inputs, self.hidden);
        let b1 = self.first_bias_offset();
        let w2 = self.second_weight_offset();
        let b2 = self.output_bias_offset();
        for j in 0..m {
            let row = &w[j * d..(j + 1) * d];
            let a: f64 = row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + w[b1 + j];
            z[j] = apply_hidden(self.hidden_activation, a);
        }
        for (k, yk) in y.iter_mut().enumerate() {
            let row = &w[w2 + k * m..w2 + (k + 1) * m];
            *yk = row.iter().zip(z.iter()).map(|(wj, zj)| wj * zj).sum::<f64>() + w[b2 + k];
        }
        apply_output(self.output_activation, y);
    }

    /// Evaluates the network on one input vector.
    pub fn forward(&self, w: &[f64], x: &[f64]) -> Result<Vec<f64>, MlpError> {
        if w.len() != self.num_weights() {
            return Err(MlpError::DimensionMismatch {
                expected: self.num_weights(),
                got: w.len(),
            });
        }
        if x.len() != self.inputs {
            return Err(MlpError::DimensionMismatch {
                expected: self.inputs,
                got: x.len(),
            });
        }
        let mut z = vec![0.0; self.hidden];
        let mut y = vec![0.0; self.outputs];
        self.forward_into(w, x, &mut z, &mut y);
        Ok(y)
    }

    /// First output for an input vector whose dimensions are already known to
    /// match.
    pub fn forward_scalar(&self, w: &[f64], x: &[f64]) -> f64 {
        let mut z = vec![0.0; self.hidden];
        let mut y = vec![0.0; self.outputs];
        self.forward_into(w, x, &mut z, &mut y);
        y[0]
    }
}
