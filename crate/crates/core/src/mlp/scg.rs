//! Scaled conjugate gradient minimization (Møller 1993).

use super::MlpError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScgLimits {
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Step collapse: stop when an accepted step moves every coordinate by
    /// less than this *and* the objective changes by less than
    /// `objective_tolerance`.
    pub step_tolerance: f64,
    pub objective_tolerance: f64,
}

impl Default for ScgLimits {
    fn default() -> Self {
        ScgLimits {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            objective_tolerance: 1e-12,
        }
    }
}

impl ScgLimits {
    pub fn iterations(max_iterations: usize) -> Self {
        ScgLimits {
            max_iterations,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScgTermination {
    MaxIterations,
    GradientTolerance,
    StepCollapse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgOutcome {
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Objective at the start followed by the value after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub termination: ScgTermination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const SIGMA0: f64 = 1e-4;
const LAMBDA_MIN: f64 = 1e-15;
const LAMBDA_MAX: f64 = 1e100;

/// Minimizes `f` from `initial` using its gradient `g`. The returned weights
/// never have a higher objective than `initial`.
pub fn scg_minimize<F, G>(mut f: F, mut g: G, initial: Vec<f64>, limits: &ScgLimits) -> Result<ScgOutcome, MlpError>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let nparams = initial.len();
    let mut x = initial;
    let mut fold = f(&x);
    if !fold.is_finite() {
        return Err(MlpError::NonFinite("objective at the initial point".into()));
    }
    let mut grad_new = g(&x);
    if grad_new.iter().any(|v| !v.is_finite()) {
        return Err(MlpError::NonFinite("gradient at the initial point".into()));
    }
    let mut grad_old = grad_new.clone();
    let mut trace = vec![fold];
    let outcome = |x: Vec<f64>, fval: f64, trace: Vec<f64>, iterations, accepted, termination| ScgOutcome {
        weights: x,
        objective: fval,
        trace,
        iterations,
        accepted_steps: accepted,
        termination,
    };
    if dot(&grad_new, &grad_new).sqrt() < limits.gradient_tolerance {
        return Ok(outcome(x, fold, trace, 0, 0, ScgTermination::GradientTolerance));
    }

    let mut d: Vec<f64> = grad_new.iter().map(|v| -v).collect();
    let mut success = true;
    let mut nsuccess = 0usize;
    let mut lambda = 1.0;
    let (mut mu, mut kappa, mut theta) = (0.0, 0.0, 0.0);
    let mut accepted = 0usize;
    let mut xplus = vec![0.0; nparams];
    let mut xnew = vec![0.0; nparams];

    for iter in 1..=limits.max_iterations {
        if success {
            mu = dot(&d, &grad_new);
            if mu >= 0.0 {
                d = grad_new.iter().map(|v| -v).collect();
                mu = dot(&d, &grad_new);
            }
            kappa = dot(&d, &d);
            if kappa < f64::EPSILON * f64::EPSILON {
                return Ok(outcome(x, fold, trace, iter, accepted, ScgTermination::GradientTolerance));
            }
            let sigma = SIGMA0 / kappa.sqrt();
            for i in 0..nparams {
                xplus[i] = x[i] + sigma * d[i];
            }
            let gplus = g(&xplus);
            theta = d.iter().zip(gplus.iter().zip(&grad_new)).map(|(di, (gp, gn))| di * (gp - gn)).sum::<f64>() / sigma;
        }

        // scale the curvature estimate so delta stays positive
        let mut delta = theta + lambda * kappa;
        if delta <= 0.0 {
            delta = lambda * kappa;
            lambda -= theta / kappa;
        }
        let alpha = -mu / delta;
        for i in 0..nparams {
            xnew[i] = x[i] + alpha * d[i];
        }
        let fnew = f(&xnew);
        let comparison = 2.0 * (fnew - fold) / (alpha * mu);
        if comparison >= 0.0 && fnew.is_finite() {
            success = true;
            nsuccess += 1;
            accepted += 1;
            let max_step = (0..nparams).map(|i| (alpha * d[i]).abs()).fold(0.0, f64::max);
            let fchange = (fnew - fold).abs();
            std::mem::swap(&mut x, &mut xnew);
            trace.push(fnew);
            if max_step < limits.step_tolerance && fchange < limits.objective_tolerance {
                return Ok(outcome(x, fnew, trace, iter, accepted, ScgTermination::StepCollapse));
            }
            fold = fnew;
            grad_old = std::mem::replace(&mut grad_new, g(&x));
            if dot(&grad_new, &grad_new).sqrt() < limits.gradient_tolerance {
                return Ok(outcome(x, fold, trace, iter, accepted, ScgTermination::GradientTolerance));
            }
        } else {
            success = false;
        }

        let comparison = if fnew.is_finite() { comparison } else { f64::NEG_INFINITY };
        if comparison < 0.25 {
            lambda = (4.0 * lambda).min(LAMBDA_MAX);
        }
        if comparison > 0.75 {
            lambda = (0.5 * lambda).max(LAMBDA_MIN);
        }
        if lambda >= LAMBDA_MAX {
            return Ok(outcome(x, fold, trace, iter, accepted, ScgTermination::StepCollapse));
        }

        if nsuccess == nparams {
            d = grad_new.iter().map(|v| -v).collect();
            nsuccess = 0;
        } else if success {
            let gamma = grad_old.iter().zip(&grad_new).map(|(o, n)| (o - n) * n).sum::<f64>() / mu;
            for i in 0..nparams {
                d[i] = gamma * d[i] - grad_new[i];
            }
        }
    }
    Ok(outcome(x, fold, trace, limits.max_iterations, accepted, ScgTermination::MaxIterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges() {
        let out = scg_minimize(
            |w| w.iter().map(|x| x * x).sum(),
            |w| w.iter().map(|x| 2.0 * x).collect(),
            vec![3.0, 4.0],
            &ScgLimits::iterations(50),
        )
        .unwrap();
        let norm = out.weights.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "{norm}");
        assert!(out.iterations <= 50);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let scales = [1.0, 10.0, 100.0, 1000.0];
        let out = scg_minimize(
            |w| w.iter().zip(&scales).map(|(x, s)| s * x * x).sum(),
            |w| w.iter().zip(&scales).map(|(x, s)| 2.0 * s * x).collect(),
            vec![1.0; 4],
            &ScgLimits::iterations(100),
        )
        .unwrap();
        assert!(out.objective < 1e-12, "{}", out.objective);
    }

    #[test]
    fn start_at_minimum_returns_immediately() {
        let out = scg_minimize(
            |w| w.iter().map(|x| x * x).sum(),
            |w| w.iter().map(|x| 2.0 * x).collect(),
            vec![0.0, 0.0],
            &ScgLimits::default(),
        )
        .unwrap();
        assert_eq!(out.accepted_steps, 0);
        assert_eq!(out.weights, vec![0.0, 0.0]);
        assert_eq!(out.termination, ScgTermination::GradientTolerance);
    }

    #[test]
    fn trace_non_increasing_on_rosenbrock() {
        let f = |w: &[f64]| (1.0 - w[0]).powi(2) + 100.0 * (w[1] - w[0] * w[0]).powi(2);
        let g = |w: &[f64]| {
            vec![
                -2.0 * (1.0 - w[0]) - 400.0 * w[0] * (w[1] - w[0] * w[0]),
                200.0 * (w[1] - w[0] * w[0]),
            ]
        };
        let out = scg_minimize(f, g, vec![-1.2, 1.0], &ScgLimits::iterations(500)).unwrap();
        assert!(out.trace.windows(2).all(|p| p[1] <= p[0]));
        assert!(out.objective <= out.trace[0]);
        assert!(out.objective < 1e-6, "{}", out.objective);
    }

    #[test]
    fn non_finite_start_rejected() {
        let r = scg_minimize(|_| f64::NAN, |w| w.to_vec(), vec![1.0], &ScgLimits::default());
        assert!(matches!(r, Err(MlpError::NonFinite(_))));
    }
}
