//! Training recipes: scaled data in, persisted model out.

use crate::arch_ga::{ga_search, GaConfig, GaError, GaResult};
use crate::bayes::{
    evidence_train, hmc_sample_chains, ArdResult, BayesError, EvidenceConfig, HmcConfig,
};
use crate::data::{fit_scaling, DataError, Dataset, ScalingParams, NUM_VARIABLES};
use crate::mlp::{Activation, MlpArchitecture, MlpError, TrainingSet, WeightGrouping};
use crate::model::{ModelArtifact, ModelKind};
use crate::par;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    /// Evidence framework with one prior group per weight layer.
    Evidence,
    /// Evidence warm start, then hybrid Monte Carlo with alphas fixed.
    Hmc,
    /// Evidence framework with one prior group per input.
    Ard,
}

impl TrainMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "evidence" => Some(TrainMethod::Evidence),
            "hmc" => Some(TrainMethod::Hmc),
            "ard" => Some(TrainMethod::Ard),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRecipe {
    pub method: TrainMethod,
    pub hidden: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub evidence: EvidenceConfig,
    pub hmc: HmcConfig,
    pub chains: usize,
    /// When present, the architecture comes from a genetic search.
    pub ga: Option<GaConfig>,
    pub seed: u64,
}

impl Default for TrainRecipe {
    fn default() -> Self {
        TrainRecipe {
            method: TrainMethod::Evidence,
            hidden: 10,
            hidden_activation: Activation::HyperbolicTangent,
            output_activation: Activation::Logistic,
            evidence: EvidenceConfig::default(),
            hmc: HmcConfig::default(),
            chains: 1,
            ga: None,
            seed: 0,
        }
    }
}

const INIT_STREAM: u64 = 1;
const HMC_STREAM: u64 = 2;
const GA_STREAM: u64 = 3;

/// Scaled training pairs restricted to `columns` of the schema.
pub fn training_set(dataset: &Dataset, scaling: &ScalingParams, columns: &[usize]) -> Result<TrainingSet, PipelineError> {
    if dataset.is_empty() {
        return Err(DataError::Empty.into());
    }
    let rows: Vec<Vec<f64>> = dataset
        .records
        .iter()
        .map(|r| {
            let x = scaling.apply(r);
            columns.iter().map(|&c| x[c]).collect()
        })
        .collect();
    Ok(TrainingSet::from_rows(&rows, &dataset.labels())?)
}

/// Trains on all seven inputs.
pub fn train_model(train: &Dataset, recipe: &TrainRecipe) -> Result<ModelArtifact, PipelineError> {
    let all: Vec<usize> = (0..NUM_VARIABLES).collect();
    train_model_on(train, &all, recipe)
}

/// Trains on the listed schema columns only.
pub fn train_model_on(train: &Dataset, columns: &[usize], recipe: &TrainRecipe) -> Result<ModelArtifact, PipelineError> {
    Ok(train_detailed(train, columns, recipe)?.model)
}

/// A trained model with the architecture search that chose it, if any.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelArtifact,
    pub ga: Option<GaResult>,
}

pub fn train_detailed(train: &Dataset, columns: &[usize], recipe: &TrainRecipe) -> Result<TrainOutcome, PipelineError> {
    if columns.is_empty() || columns.iter().any(|&c| c >= NUM_VARIABLES) {
        return Err(PipelineError::InvalidRecipe("columns must be non-empty schema indices".into()));
    }
    if recipe.chains == 0 {
        return Err(PipelineError::InvalidRecipe("chains must be at least 1".into()));
    }
    let (disputes, peace) = train.class_counts();
    if disputes == 0 || peace == 0 {
        return Err(PipelineError::InvalidRecipe("training data needs both classes".into()));
    }
    let scaling = fit_scaling(train)?;
    let data = training_set(train, &scaling, columns)?;
    let mut notes = Vec::new();
    let mut ga_result = None;

    let mut arch = match &recipe.ga {
        Some(ga) => {
            let ga = GaConfig {
                seed: par::derive_seed(recipe.seed, &[GA_STREAM]),
                ..ga.clone()
            };
            let found = ga_search(&data, &ga)?;
            notes.push(format!(
                "architecture from genetic search: chromosome {} fitness {}",
                found.best.to_bit_string(),
                found.best_fitness
            ));
            let arch = found.best_architecture;
            ga_result = Some(found);
            arch
        }
        None => MlpArchitecture::new(
            columns.len(),
            recipe.hidden,
            1,
            recipe.hidden_activation,
            recipe.output_activation,
        )?,
    };
    if !arch.output_activation.is_probabilistic() {
        notes.push(format!(
            "output activation {} replaced by logistic for Bayesian training",
            arch.output_activation.name()
        ));
        arch.output_activation = Activation::Logistic;
    }

    let evidence_cfg = EvidenceConfig {
        grouping: match recipe.method {
            TrainMethod::Ard => WeightGrouping::Ard,
            _ => recipe.evidence.grouping,
        },
        ..recipe.evidence.clone()
    };
    let ev = evidence_train(&arch, &data, &evidence_cfg, par::derive_seed(recipe.seed, &[INIT_STREAM]))?;
    let kind = match recipe.method {
        TrainMethod::Hmc => ModelKind::HmcEnsemble,
        _ => ModelKind::MapEvidence,
    };
    let mut model = ModelArtifact::new(
        kind,
        arch,
        columns.to_vec(),
        scaling,
        evidence_cfg.grouping,
        ev.alphas.clone(),
        ev.weights.clone(),
        recipe.clone(),
    );
    if evidence_cfg.grouping == WeightGrouping::Ard {
        model.ard = Some(ArdResult::from_alphas(arch.inputs, &ev.alphas));
    }
    if recipe.method == TrainMethod::Hmc {
        let hmc = HmcConfig {
            seed: par::derive_seed(recipe.seed, &[HMC_STREAM]),
            ..recipe.hmc.clone()
        };
        let ens = hmc_sample_chains(&arch, &data, &ev.objective_config(), &ev.weights, &hmc, recipe.chains)?;
        model.samples = ens.samples;
        model.acceptance_rate = Some(ens.acceptance_rate);
        if ens.divergent > 0 {
            notes.push(format!("{} divergent trajectories rejected", ens.divergent));
        }
    }
    model.notes = notes;
    Ok(TrainOutcome { model, ga: ga_result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::mlp::ScgLimits;

    fn quick() -> TrainRecipe {
        TrainRecipe {
            hidden: 3,
            evidence: EvidenceConfig {
                outer_iterations: 3,
                inner: ScgLimits::iterations(40),
                ..EvidenceConfig::default()
            },
            hmc: HmcConfig {
                n_samples: 10,
                burn_in: 5,
                thinning: 1,
                leapfrog_steps: 5,
                ..HmcConfig::default()
            },
            ..TrainRecipe::default()
        }
    }

    #[test]
    fn methods_produce_consistent_artifacts() {
        let ds = synth_generate(&SynthConfig::separable(200), 1).unwrap();
        for method in [TrainMethod::Evidence, TrainMethod::Hmc, TrainMethod::Ard] {
            let recipe = TrainRecipe { method, ..quick() };
            let m = train_model(&ds, &recipe).unwrap();
            m.validate().unwrap();
            assert_eq!(m.kind == ModelKind::HmcEnsemble, method == TrainMethod::Hmc);
            assert_eq!(m.ard.is_some(), method == TrainMethod::Ard);
            let back = ModelArtifact::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m);
            assert_eq!(train_model(&ds, &recipe).unwrap(), m);
        }
    }

    #[test]
    fn column_subset_model() {
        let ds = synth_generate(&SynthConfig::separable(200), 2).unwrap();
        let m = train_model_on(&ds, &[4, 6], &quick()).unwrap();
        assert_eq!(m.architecture.inputs, 2);
        let p = m.predict_record(&ds.records[0]);
        assert!((0.0..=1.0).contains(&p.probability));
    }

    #[test]
    fn single_class_rejected() {
        let mut ds = synth_generate(&SynthConfig::separable(50), 3).unwrap();
        ds.records.retain(|r| r.outcome.is_dispute());
        assert!(matches!(train_model(&ds, &quick()), Err(PipelineError::InvalidRecipe(_))));
    }
}
