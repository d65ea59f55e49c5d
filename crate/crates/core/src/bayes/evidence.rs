//! Gaussian-approximation evidence maximization.
//!
//! Each outer iteration minimizes the penalized objective with SCG at fixed
//! `alpha`, then re-estimates every group precision as
//! `alpha_g = gamma_g / |w_g|^2`, where `gamma_g` is the number of
//! well-determined parameters in group `g`.

use super::BayesError;
use crate::mlp::{
    gauss_newton_hessian, init_weights, objective, scg_minimize, objective_and_gradient, MlpArchitecture,
    MlpError, ObjectiveConfig, ScgLimits, TrainingSet, WeightGrouping,
};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub const ALPHA_MIN: f64 = 1e-6;
pub const ALPHA_MAX: f64 = 1e8;
/// Outer loop stops once every alpha moves by less than this fraction.
const ALPHA_RELATIVE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvidenceConfig {
    pub outer_iterations: usize,
    pub inner: ScgLimits,
    pub initial_alpha: f64,
    pub init_scale: f64,
    pub grouping: WeightGrouping,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        EvidenceConfig {
            outer_iterations: 10,
            inner: ScgLimits::iterations(100),
            initial_alpha: 10.0,
            init_scale: 1.0,
            grouping: WeightGrouping::ByLayer,
        }
    }
}

impl EvidenceConfig {
    pub fn validate(&self) -> Result<(), BayesError> {
        if self.outer_iterations == 0 {
            return Err(BayesError::InvalidConfig("outer_iterations must be at least 1".into()));
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            return Err(BayesError::InvalidConfig("initial_alpha must be positive".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(BayesError::InvalidConfig("init_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceIteration {
    pub iteration: usize,
    /// Penalized objective at the SCG solution, under the alphas it was
    /// trained with.
    pub objective: f64,
    pub weight_norm: f64,
    pub gammas: Vec<f64>,
    /// Alphas after this iteration's update.
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResult {
    pub architecture: MlpArchitecture,
    pub grouping: WeightGrouping,
    /// Most probable weights under the final `alphas`.
    pub weights: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Well-determined parameter counts from the last update.
    pub gammas: Vec<f64>,
    pub trace: Vec<EvidenceIteration>,
    pub converged: bool,
}

impl EvidenceResult {
    pub fn objective_config(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            beta: 1.0,
            groups: self.grouping.assign(&self.architecture),
            alphas: self.alphas.clone(),
        }
    }
}

/// `gamma / sum_sq`, clamped to `[ALPHA_MIN, ALPHA_MAX]`.
pub fn alpha_update(gamma: f64, sum_sq: f64) -> f64 {
    if sum_sq <= 0.0 {
        return ALPHA_MAX;
    }
    (gamma / sum_sq).clamp(ALPHA_MIN, ALPHA_MAX)
}

/// Well-determined parameter count per group for data Hessian `hessian`.
///
/// Negative eigenvalues of `hessian` are floored at zero. With one group this
/// is `sum_i lambda_i / (lambda_i + alpha)`; with several it is
/// `|g| - alpha_g * trace_g(A^-1)` for `A = H + diag(alpha)`, which reduces to
/// the same expression when all alphas are equal. Each result lies in
/// `[0, |g|]`.
pub fn effective_parameters(hessian: &DMatrix<f64>, groups: &[usize], alphas: &[f64]) -> Result<Vec<f64>, String> {
    let n = hessian.nrows();
    if hessian.ncols() != n || groups.len() != n {
        return Err(format!("Hessian is {}x{} for {} weights", n, hessian.ncols(), groups.len()));
    }
    let sym = (hessian + hessian.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lambdas = eig.eigenvalues.map(|l| l.max(0.0));
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err("non-finite Hessian eigenvalue".into());
    }
    let mut sizes = vec![0usize; alphas.len()];
    for &g in groups {
        sizes[g] += 1;
    }
    if alphas.len() == 1 {
        let a = alphas[0];
        return Ok(vec![lambdas.iter().map(|l| l / (l + a)).sum()]);
    }

    let floored = &eig.eigenvectors * DMatrix::from_diagonal(&lambdas) * eig.eigenvectors.transpose();
    let mut a = floored;
    for (i, &g) in groups.iter().enumerate() {
        a[(i, i)] += alphas[g];
    }
    let inv = a
        .cholesky()
        .ok_or_else(|| "regularized Hessian is not positive definite".to_string())?
        .inverse();
    let mut traces = vec![0.0; alphas.len()];
    for (i, &g) in groups.iter().enumerate() {
        traces[g] += inv[(i, i)];
    }
    Ok(sizes
        .iter()
        .zip(traces.iter().zip(alphas))
        .map(|(&size, (&tr, &a))| (size as f64 - a * tr).clamp(0.0, size as f64))
        .collect())
}

fn minimize(
    arch: &MlpArchitecture,
    data: &TrainingSet,
    cfg: &ObjectiveConfig,
    start: Vec<f64>,
    limits: &ScgLimits,
) -> Result<(Vec<f64>, f64), MlpError> {
    // validate dimensions once so the closures below cannot fail
    objective(arch, &start, data, cfg)?;
    let out = scg_minimize(
        |w| objective(arch, w, data, cfg).unwrap_or(f64::INFINITY),
        |w| objective_and_gradient(arch, w, data, cfg).map(|(_, g)| g).unwrap_or_else(|_| vec![f64::NAN; w.len()]),
        start,
        limits,
    )?;
    Ok((out.weights, out.objective))
}

/// Evidence-framework training from seeded random initial weights.
pub fn evidence_train(
    arch: &MlpArchitecture,
    data: &TrainingSet,
    config: &EvidenceConfig,
    seed: u64,
) -> Result<EvidenceResult, BayesError> {
    let w0 = init_weights(arch, seed, config.init_scale)?;
    evidence_train_from(arch, data, config, w0)
}

/// Evidence-framework training from the given initial weights.
pub fn evidence_train_from(
    arch: &MlpArchitecture,
    data: &TrainingSet,
    config: &EvidenceConfig,
    initial: Vec<f64>,
) -> Result<EvidenceResult, BayesError> {
    config.validate()?;
    arch.validate()?;
    if arch.outputs != 1 || !arch.output_activation.is_probabilistic() {
        return Err(BayesError::InvalidConfig(
            "evidence training needs a single logistic output".into(),
        ));
    }
    let groups = config.grouping.assign(arch);
    let mut alphas = vec![config.initial_alpha; config.grouping.num_groups(arch)];
    let mut w = initial;
    let mut gammas = vec![0.0; alphas.len()];
    let mut trace = Vec::with_capacity(config.outer_iterations);
    let mut converged = false;

    for iteration in 0..config.outer_iterations {
        let cfg = ObjectiveConfig::new(1.0, groups.clone(), alphas.clone())?;
        let (w_new, e) = minimize(arch, data, &cfg, w, &config.inner)?;
        w = w_new;
        let hessian = gauss_newton_hessian(arch, &w, data).map_err(|e| BayesError::Hessian {
            iteration,
            message: e.to_string(),
        })?;
        gammas = effective_parameters(&hessian, &groups, &alphas)
            .map_err(|message| BayesError::Hessian { iteration, message })?;
        let sums = cfg.group_sums_of_squares(&w);
        let updated: Vec<f64> = gammas.iter().zip(&sums).map(|(&g, &s)| alpha_update(g, s)).collect();
        converged = updated
            .iter()
            .zip(&alphas)
            .all(|(new, old)| ((new - old) / old).abs() < ALPHA_RELATIVE_TOLERANCE);
        alphas = updated;
        trace.push(EvidenceIteration {
            iteration,
            objective: e,
            weight_norm: w.iter().map(|x| x * x).sum::<f64>().sqrt(),
            gammas: gammas.clone(),
            alphas: alphas.clone(),
        });
        if converged {
            break;
        }
    }

    let cfg = ObjectiveConfig::new(1.0, groups, alphas.clone())?;
    let (w, _) = minimize(arch, data, &cfg, w, &config.inner)?;
    Ok(EvidenceResult {
        architecture: *arch,
        grouping: config.grouping,
        weights: w,
        alphas,
        gammas,
        trace,
        converged,
    })
}

/// Relevance of each input from per-input prior precisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArdResult {
    /// Precision of each input's fan-out weights, input order.
    pub input_alphas: Vec<f64>,
    /// Hidden biases, second-layer weights, output bias.
    pub shared_alphas: Vec<f64>,
    /// `1 / alpha` per input.
    pub relevance: Vec<f64>,
    /// Input indices by descending relevance; ties keep input order.
    pub ranking: Vec<usize>,
}

impl ArdResult {
    pub fn from_alphas(inputs: usize, alphas: &[f64]) -> ArdResult {
        let input_alphas = alphas[..inputs].to_vec();
        let relevance: Vec<f64> = input_alphas.iter().map(|a| 1.0 / a).collect();
        let mut ranking: Vec<usize> = (0..inputs).collect();
        ranking.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]));
        ArdResult {
            input_alphas,
            shared_alphas: alphas[inputs..].to_vec(),
            relevance,
            ranking,
        }
    }
}

/// Evidence training with one prior group per input.
pub fn ard_train(
    arch: &MlpArchitecture,
    data: &TrainingSet,
    config: &EvidenceConfig,
    seed: u64,
) -> Result<(EvidenceResult, ArdResult), BayesError> {
    let config = EvidenceConfig {
        grouping: WeightGrouping::Ard,
        ..config.clone()
    };
    let ev = evidence_train(arch, data, &config, seed)?;
    let ard = ArdResult::from_alphas(arch.inputs, &ev.alphas);
    Ok((ev, ard))
}
