//! Bayesian training of the perceptron: evidence-framework hyperparameter
//! re-estimation, automatic relevance determination, hybrid Monte Carlo
//! posterior sampling and moderated prediction.

mod evidence;
mod hmc;
mod predictive;

pub use evidence::{
    alpha_update, ard_train, effective_parameters, evidence_train, evidence_train_from, ArdResult, EvidenceConfig, EvidenceIteration,
    EvidenceResult, ALPHA_MAX, ALPHA_MIN,
};
pub use hmc::{
    hmc_chain, hmc_sample, hmc_sample_chains, leapfrog, metropolis_accept, ChainOutcome, HmcConfig,
    PosteriorEnsemble, DIVERGENCE_THRESHOLD,
};
pub use predictive::{predictive_ensemble, predictive_map, Prediction};

use crate::mlp::MlpError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesError {
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error("Hessian evaluation failed at evidence iteration {iteration}: {message}")]
    Hessian { iteration: usize, message: String },
    #[error("non-finite gradient during leapfrog integration")]
    NonFiniteGradient,
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
