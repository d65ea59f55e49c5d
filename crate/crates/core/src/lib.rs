//! Bayesian multilayer-perceptron classifiers of militarized interstate
//! disputes, input relevance ranking, and a control search that proposes
//! changes to controllable dyadic variables.

pub mod arch_ga;
pub mod bayes;
pub mod control;
pub mod data;
pub mod eval;
pub mod mlp;
pub mod model;
pub mod par;
pub mod pipeline;
