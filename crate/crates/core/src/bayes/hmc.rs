//! Hybrid Monte Carlo over network weights.

use super::BayesError;
use crate::mlp::{objective, objective_and_gradient, MlpArchitecture, ObjectiveConfig, TrainingSet};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A trajectory whose total energy grows by more than this is treated as
/// divergent and rejected.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    /// Base leapfrog step size.
    pub epsilon0: f64,
    /// Leapfrog steps per trajectory.
    pub leapfrog_steps: usize,
    /// Retained samples per chain.
    pub n_samples: usize,
    /// Trajectories discarded before retention starts.
    pub burn_in: usize,
    /// Keep every `thinning`-th post-burn-in state.
    pub thinning: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            epsilon0: 0.005,
            leapfrog_steps: 30,
            n_samples: 100,
            burn_in: 50,
            thinning: 2,
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<(), BayesError> {
        let bad = |m: &str| Err(BayesError::InvalidConfig(m.into()));
        if !(self.epsilon0 > 0.0 && self.epsilon0.is_finite()) {
            return bad("epsilon0 must be positive");
        }
        if self.leapfrog_steps == 0 {
            return bad("leapfrog_steps must be at least 1");
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1");
        }
        if self.thinning == 0 {
            return bad("thinning must be at least 1");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        Ok(())
    }

    pub fn total_trajectories(&self) -> usize {
        self.burn_in + self.n_samples * self.thinning
    }
}

fn integrate<G>(w: &mut [f64], p: &mut [f64], g: &mut Vec<f64>, grad: &mut G, epsilon: f64, steps: usize) -> Result<(), BayesError>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    for _ in 0..steps {
        for (pi, gi) in p.iter_mut().zip(g.iter()) {
            *pi -= 0.5 * epsilon * gi;
        }
        for (wi, pi) in w.iter_mut().zip(p.iter()) {
            *wi += epsilon * pi;
        }
        *g = grad(w);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(BayesError::NonFiniteGradient);
        }
        for (pi, gi) in p.iter_mut().zip(g.iter()) {
            *pi -= 0.5 * epsilon * gi;
        }
    }
    Ok(())
}

/// `steps` leapfrog steps (half kick, drift, half kick) of size `epsilon` for
/// the Hamiltonian `E(w) + |p|^2 / 2`, where `gradient` is dE/dw.
pub fn leapfrog<G>(w: &[f64], p: &[f64], mut gradient: G, epsilon: f64, steps: usize) -> Result<(Vec<f64>, Vec<f64>), BayesError>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    if steps == 0 {
        return Err(BayesError::InvalidConfig("leapfrog needs at least one step".into()));
    }
    let mut g = gradient(w);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(BayesError::NonFiniteGradient);
    }
    let (mut w, mut p) = (w.to_vec(), p.to_vec());
    integrate(&mut w, &mut p, &mut g, &mut gradient, epsilon, steps)?;
    Ok((w, p))
}

/// Metropolis test on total energies. Uphill moves are accepted with
/// probability `exp(-dE / temperature)`; non-finite energies are rejected
/// without consuming randomness.
pub fn metropolis_accept<R: Rng + ?Sized>(e_old: f64, e_new: f64, temperature: f64, rng: &mut R) -> bool {
    let de = e_new - e_old;
    if de.is_nan() || de == f64::INFINITY {
        return false;
    }
    if de <= 0.0 {
        return true;
    }
    rng.random::<f64>() < (-de / temperature).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub samples: Vec<Vec<f64>>,
    pub accepted: usize,
    pub trajectories: usize,
    /// Rejections caused by divergence (also counted as rejections).
    pub divergent: usize,
}

/// Runs one chain on energy `energy` with gradient `gradient` from `initial`.
pub fn hmc_chain<E, G>(mut energy: E, mut gradient: G, initial: Vec<f64>, config: &HmcConfig) -> Result<ChainOutcome, BayesError>
where
    E: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = initial;
    let mut e = energy(&w);
    let mut g = gradient(&w);
    if !e.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(BayesError::InvalidConfig("non-finite energy at the initial state".into()));
    }
    let n = w.len();
    let total = config.total_trajectories();
    let mut out = ChainOutcome {
        samples: Vec::with_capacity(config.n_samples),
        accepted: 0,
        trajectories: total,
        divergent: 0,
    };

    for t in 0..total {
        let mut p: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let k: f64 = rng.random();
        let epsilon = direction * config.epsilon0 * (0.8 + 0.4 * k);
        let h_old = e + 0.5 * p.iter().map(|v| v * v).sum::<f64>();

        let mut w_new = w.clone();
        let mut g_new = g.clone();
        let integrated = integrate(&mut w_new, &mut p, &mut g_new, &mut gradient, epsilon, config.leapfrog_steps);
        let (e_new, h_new) = match integrated {
            Ok(()) => {
                let e_new = energy(&w_new);
                (e_new, e_new + 0.5 * p.iter().map(|v| v * v).sum::<f64>())
            }
            Err(_) => (f64::INFINITY, f64::INFINITY),
        };
        let de = h_new - h_old;
        if !de.is_finite() || de > DIVERGENCE_THRESHOLD {
            out.divergent += 1;
        } else if metropolis_accept(h_old, h_new, config.temperature, &mut rng) {
            w = w_new;
            e = e_new;
            g = g_new;
            out.accepted += 1;
        }
        if t >= config.burn_in && (t - config.burn_in + 1).is_multiple_of(config.thinning) {
            out.samples.push(w.clone());
        }
    }
    Ok(out)
}

/// Weight samples from the posterior of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub architecture: MlpArchitecture,
    pub samples: Vec<Vec<f64>>,
    /// `accepted / trajectories`.
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub trajectories: usize,
    pub divergent: usize,
    pub config: HmcConfig,
}

fn run_chain(
    arch: &MlpArchitecture,
    data: &TrainingSet,
    objective_config: &ObjectiveConfig,
    initial: &[f64],
    config: &HmcConfig,
) -> Result<ChainOutcome, BayesError> {
    objective(arch, initial, data, objective_config)?;
    hmc_chain(
        |w| objective(arch, w, data, objective_config).unwrap_or(f64::INFINITY),
        |w| {
            objective_and_gradient(arch, w, data, objective_config)
                .map(|(_, g)| g)
                .unwrap_or_else(|_| vec![f64::NAN; w.len()])
        },
        initial.to_vec(),
        config,
    )
}

/// Single chain on the penalized objective, seeded with `config.seed`.
pub fn hmc_sample(
    arch: &MlpArchitecture,
    data: &TrainingSet,
    objective_config: &ObjectiveConfig,
    initial: &[f64],
    config: &HmcConfig,
) -> Result<PosteriorEnsemble, BayesError> {
    hmc_sample_chains(arch, data, objective_config, initial, config, 1)
}

/// `chains` independent chains pooled in chain order. With more than one
/// chain, chain `c` is seeded with `derive_seed(config.seed, [c])`.
pub fn hmc_sample_chains(
    arch: &MlpArchitecture,
    data: &TrainingSet,
    objective_config: &ObjectiveConfig,
    initial: &[f64],
    config: &HmcConfig,
    chains: usize,
) -> Result<PosteriorEnsemble, BayesError> {
    config.validate()?;
    if chains == 0 {
        return Err(BayesError::InvalidConfig("chains must be at least 1".into()));
    }
    let outcomes = par::map_indexed(chains, |c| {
        let mut cfg = config.clone();
        if chains > 1 {
            cfg.seed = par::derive_seed(config.seed, &[c as u64]);
        }
        run_chain(arch, data, objective_config, initial, &cfg)
    });
    let mut pooled = ChainOutcome {
        samples: Vec::with_capacity(chains * config.n_samples),
        accepted: 0,
        trajectories: 0,
        divergent: 0,
    };
    for o in outcomes {
        let o = o?;
        pooled.samples.extend(o.samples);
        pooled.accepted += o.accepted;
        pooled.trajectories += o.trajectories;
        pooled.divergent += o.divergent;
    }
    Ok(PosteriorEnsemble {
        architecture: *arch,
        acceptance_rate: pooled.accepted as f64 / pooled.trajectories as f64,
        samples: pooled.samples,
        accepted: pooled.accepted,
        trajectories: pooled.trajectories,
        divergent: pooled.divergent,
        config: config.clone(),
    })
}
