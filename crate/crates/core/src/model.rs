//! Persisted trained models and the prediction interface shared by
//! evaluation and control.

use crate::bayes::{predictive_ensemble, predictive_map, ArdResult, Prediction};
use crate::data::{DyadYearRecord, ScalingParams, VariableSchema, NUM_VARIABLES};
use crate::mlp::{MlpArchitecture, WeightGrouping, WEIGHT_LAYOUT};
use crate::pipeline::TrainRecipe;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_FORMAT: &str = "dispute-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Maps a scaled input vector in full schema order to a prediction.
pub trait Predictor: Sync {
    fn predict(&self, x: &[f64]) -> Prediction;
}

impl<F: Fn(&[f64]) -> Prediction + Sync> Predictor for F {
    fn predict(&self, x: &[f64]) -> Prediction {
        self(x)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format {format:?} version {version}")]
    UnsupportedFormat { format: String, version: u32 },
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Single most-probable network from evidence training.
    MapEvidence,
    /// Posterior samples from hybrid Monte Carlo.
    HmcEnsemble,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MapEvidence => "map_evidence",
            ModelKind::HmcEnsemble => "hmc_ensemble",
        }
    }
}

/// Versioned JSON model document. The network sees only `input_columns` of
/// the scaled schema-order input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub architecture: MlpArchitecture,
    pub weight_layout: String,
    pub schema: Vec<String>,
    pub input_columns: Vec<usize>,
    pub scaling: ScalingParams,
    pub grouping: WeightGrouping,
    pub alphas: Vec<f64>,
    /// Most probable weights; the HMC warm start for ensembles.
    pub weights: Vec<f64>,
    /// Posterior samples; empty for MAP models.
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: Option<f64>,
    /// Present when trained with one prior group per input.
    pub ard: Option<ArdResult>,
    pub recipe: TrainRecipe,
    pub notes: Vec<String>,
}

impl ModelArtifact {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: ModelKind,
        architecture: MlpArchitecture,
        input_columns: Vec<usize>,
        scaling: ScalingParams,
        grouping: WeightGrouping,
        alphas: Vec<f64>,
        weights: Vec<f64>,
        recipe: TrainRecipe,
    ) -> Self {
        ModelArtifact {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            kind,
            architecture,
            weight_layout: WEIGHT_LAYOUT.into(),
            schema: VariableSchema::standard().names(),
            input_columns,
            scaling,
            grouping,
            alphas,
            weights,
            samples: vec![],
            acceptance_rate: None,
            ard: None,
            recipe,
            notes: vec![],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Inconsistent(m));
        if self.format != MODEL_FORMAT || self.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedFormat {
                format: self.format.clone(),
                version: self.version,
            });
        }
        if self.weight_layout != WEIGHT_LAYOUT {
            return bad(format!("unknown weight layout {:?}", self.weight_layout));
        }
        if self.schema != VariableSchema::standard().names() {
            return bad("schema names differ from the standard schema".into());
        }
        if self.architecture.validate().is_err() || self.architecture.outputs != 1 {
            return bad("architecture must be valid with one output".into());
        }
        if self.input_columns.len() != self.architecture.inputs
            || self.input_columns.iter().any(|&c| c >= NUM_VARIABLES)
        {
            return bad("input columns do not match the architecture".into());
        }
        if self.scaling.len() != NUM_VARIABLES || !self.scaling.is_valid() {
            return bad("scaling must cover every schema variable with high > low".into());
        }
        if self.architecture.check_weights(&self.weights).is_err() {
            return bad("weights do not match the architecture".into());
        }
        if self.samples.iter().any(|s| self.architecture.check_weights(s).is_err()) {
            return bad("a posterior sample does not match the architecture".into());
        }
        match self.kind {
            ModelKind::HmcEnsemble if self.samples.is_empty() => return bad("ensemble has no samples".into()),
            ModelKind::MapEvidence if !self.samples.is_empty() => return bad("MAP model carries samples".into()),
            _ => {}
        }
        if let Some(ard) = &self.ard {
            if ard.relevance.len() != self.architecture.inputs {
                return bad("relevance length differs from the input count".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: ModelArtifact = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Scaled schema-order input vector for a record.
    pub fn scaled_input(&self, record: &DyadYearRecord) -> [f64; NUM_VARIABLES] {
        self.scaling.apply(record)
    }

    pub fn predict_record(&self, record: &DyadYearRecord) -> Prediction {
        self.predict(&self.scaled_input(record))
    }

    /// Prediction for every record, in order.
    pub fn scores(&self, records: &[DyadYearRecord]) -> Vec<f64> {
        crate::par::map_slice(records, |r| self.predict_record(r).probability)
    }

    /// Relevance by schema variable name, descending, when available.
    pub fn relevance_by_name(&self) -> Option<Vec<(String, f64)>> {
        let ard = self.ard.as_ref()?;
        Some(
            ard.ranking
                .iter()
                .map(|&i| (self.schema[self.input_columns[i]].clone(), ard.relevance[i]))
                .collect(),
        )
    }
}

impl Predictor for ModelArtifact {
    fn predict(&self, x: &[f64]) -> Prediction {
        let xs: Vec<f64> = self.input_columns.iter().map(|&c| x[c]).collect();
        let p = if self.samples.is_empty() {
            predictive_map(&self.architecture, &self.weights, &xs)
        } else {
            predictive_ensemble(&self.architecture, &self.samples, &xs)
        };
        p.expect("validated model dimensions")
    }
}
