use super::{hidden_derivative, Activation, MlpArchitecture, MlpError};
use crate::par;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Predictions are clamped to `[PREDICTION_CLAMP, 1 - PREDICTION_CLAMP]`
/// before taking logarithms.
pub const PREDICTION_CLAMP: f64 = 1e-12;

/// Row-major input matrix with matching targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub dim: usize,
    pub outputs: usize,
}

impl TrainingSet {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, dim: usize, outputs: usize) -> Result<Self, MlpError> {
        if dim == 0 || outputs == 0 || !inputs.len().is_multiple_of(dim) {
            return Err(MlpError::DimensionMismatch {
                expected: dim,
                got: inputs.len(),
            });
        }
        let n = inputs.len() / dim;
        if targets.len() != n * outputs {
            return Err(MlpError::DimensionMismatch {
                expected: n * outputs,
                got: targets.len(),
            });
        }
        Ok(TrainingSet {
            inputs,
            targets,
            dim,
            outputs,
        })
    }

    /// Single-output set from input rows and binary labels.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: &[bool]) -> Result<Self, MlpError> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut inputs = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.as_ref().len() != dim {
                return Err(MlpError::DimensionMismatch {
                    expected: dim,
                    got: r.as_ref().len(),
                });
            }
            inputs.extend_from_slice(r.as_ref());
        }
        let targets = labels.iter().map(|&l| f64::from(l as u8)).collect();
        Self::new(inputs, targets, dim, 1)
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, n: usize) -> &[f64] {
        &self.inputs[n * self.dim..(n + 1) * self.dim]
    }

    pub fn target(&self, n: usize) -> &[f64] {
        &self.targets[n * self.outputs..(n + 1) * self.outputs]
    }

    pub fn labels(&self) -> Vec<bool> {
        (0..self.len()).map(|n| self.target(n)[0] >= 0.5).collect()
    }

    /// Keeps only the listed input columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> TrainingSet {
        let inputs = (0..self.len())
            .flat_map(|n| {
                let row = self.input(n);
                columns.iter().map(move |&c| row[c])
            })
            .collect();
        TrainingSet {
            inputs,
            targets: self.targets.clone(),
            dim: columns.len(),
            outputs: self.outputs,
        }
    }

    pub fn subset(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet {
            inputs: rows.iter().flat_map(|&n| self.input(n).iter().copied()).collect(),
            targets: rows.iter().flat_map(|&n| self.target(n).iter().copied()).collect(),
            dim: self.dim,
            outputs: self.outputs,
        }
    }
}

/// How weights are partitioned into prior hyperparameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightGrouping {
    /// One hyperparameter for every weight.
    Single,
    /// First-layer weights, first-layer biases, second-layer weights, output
    /// biases.
    ByLayer,
    /// One group per input's fan-out weights, then hidden biases,
    /// second-layer weights and output biases.
    Ard,
}

impl WeightGrouping {
    pub fn num_groups(self, arch: &MlpArchitecture) -> usize {
        match self {
            WeightGrouping::Single => 1,
            WeightGrouping::ByLayer => 4,
            WeightGrouping::Ard => arch.inputs + 3,
        }
    }

    /// Group index of every weight, following the documented layout.
    pub fn assign(self, arch: &MlpArchitecture) -> Vec<usize> {
        let (d, m, k) = (arch.inputs, arch.hidden, arch.outputs);
        let mut groups = Vec::with_capacity(arch.num_weights());
        let layer = |g_ard: usize, g_layer: usize| match self {
            WeightGrouping::Single => 0,
            WeightGrouping::ByLayer => g_layer,
            WeightGrouping::Ard => g_ard,
        };
        for _j in 0..m {
            for i in 0..d {
                groups.push(layer(i, 0));
            }
        }
        groups.extend(std::iter::repeat_n(layer(d, 1), m));
        groups.extend(std::iter::repeat_n(layer(d + 1, 2), k * m));
        groups.extend(std::iter::repeat_n(layer(d + 2, 3), k));
        groups
    }
}

/// Weighting of the data term and per-group prior precisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub beta: f64,
    pub groups: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl ObjectiveConfig {
    pub fn new(beta: f64, groups: Vec<usize>, alphas: Vec<f64>) -> Result<Self, MlpError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(MlpError::NonFinite("beta must be positive and finite".into()));
        }
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(MlpError::NonFinite("alphas must be finite and non-negative".into()));
        }
        if let Some(&g) = groups.iter().find(|&&g| g >= alphas.len()) {
            return Err(MlpError::DimensionMismatch {
                expected: alphas.len(),
                got: g + 1,
            });
        }
        Ok(ObjectiveConfig { beta, groups, alphas })
    }

    /// `beta = 1` and one shared `alpha`.
    pub fn uniform(arch: &MlpArchitecture, alpha: f64) -> Self {
        ObjectiveConfig {
            beta: 1.0,
            groups: vec![0; arch.num_weights()],
            alphas: vec![alpha],
        }
    }

    pub fn grouped(arch: &MlpArchitecture, grouping: WeightGrouping, alphas: Vec<f64>) -> Result<Self, MlpError> {
        Self::new(1.0, grouping.assign(arch), alphas)
    }

    pub fn num_groups(&self) -> usize {
        self.alphas.len()
    }

    pub fn prior_energy(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.groups)
            .map(|(wi, &g)| 0.5 * self.alphas[g] * wi * wi)
            .sum()
    }

    /// Sum of squared weights per group.
    pub fn group_sums_of_squares(&self, w: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.alphas.len()];
        for (wi, &g) in w.iter().zip(&self.groups) {
            s[g] += wi * wi;
        }
        s
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.alphas.len()];
        for &g in &self.groups {
            s[g] += 1;
        }
        s
    }
}

fn check(arch: &MlpArchitecture, w: &[f64], data: &TrainingSet, cfg: &ObjectiveConfig) -> Result<(), MlpError> {
    arch.check_weights(w)?;
    if data.is_empty() {
        return Err(MlpError::EmptyData);
    }
    if data.dim != arch.inputs {
        return Err(MlpError::DimensionMismatch {
            expected: arch.inputs,
            got: data.dim,
        });
    }
    if data.outputs != arch.outputs {
        return Err(MlpError::DimensionMismatch {
            expected: arch.outputs,
            got: data.outputs,
        });
    }
    if cfg.groups.len() != w.len() {
        return Err(MlpError::DimensionMismatch {
            expected: w.len(),
            got: cfg.groups.len(),
        });
    }
    Ok(())
}

/// Multi-class cross-entropy applies to softmax with more than one output;
/// every other case sums the binary cross-entropy over outputs.
fn multiclass(arch: &MlpArchitecture) -> bool {
    arch.output_activation == Activation::Softmax && arch.outputs > 1
}

fn pattern_error(arch: &MlpArchitecture, y: &[f64], t: &[f64]) -> f64 {
    let lo = PREDICTION_CLAMP;
    let hi = 1.0 - PREDICTION_CLAMP;
    if multiclass(arch) {
        -y.iter().zip(t).map(|(&yk, &tk)| tk * yk.clamp(lo, hi).ln()).sum::<f64>()
    } else {
        -y.iter()
            .zip(t)
            .map(|(&yk, &tk)| {
                let yc = yk.clamp(lo, hi);
                tk * yc.ln() + (1.0 - tk) * (1.0 - yc).ln()
            })
            .sum::<f64>()
    }
}

/// dE/da for the output pre-activations, excluding the factor beta.
fn output_delta(arch: &MlpArchitecture, y: &[f64], t: &[f64], delta: &mut [f64]) {
    match arch.output_activation {
        Activation::Logistic | Activation::Softmax => {
            for ((d, &yk), &tk) in delta.iter_mut().zip(y).zip(t) {
                *d = yk - tk;
            }
        }
        act => {
            for ((d, &yk), &tk) in delta.iter_mut().zip(y).zip(t) {
                // the clamp has zero derivative outside the open interval
                *d = if yk > PREDICTION_CLAMP && yk < 1.0 - PREDICTION_CLAMP {
                    let de_dy = (yk - tk) / (yk * (1.0 - yk));
                    let dy_da = if act == Activation::Linear { 1.0 } else { 1.0 - yk * yk };
                    de_dy * dy_da
                } else {
                    0.0
                };
            }
        }
    }
}

/// Unweighted data term `-sum_n sum_k [t ln y + (1-t) ln(1-y)]`.
pub fn data_error(arch: &MlpArchitecture, w: &[f64], data: &TrainingSet) -> f64 {
    par::sum(data.len(), |n| {
        let mut z = vec![0.0; arch.hidden];
        let mut y = vec![0.0; arch.outputs];
        arch.forward_into(w, data.input(n), &mut z, &mut y);
        pattern_error(arch, &y, data.target(n))
    })
}

/// Penalized cross-entropy: `beta * data_error + sum_g alpha_g/2 * |w_g|^2`,
/// the negative log posterior up to its normalizing constant.
pub fn objective(arch: &MlpArchitecture, w: &[f64], data: &TrainingSet, cfg: &ObjectiveConfig) -> Result<f64, MlpError> {
    check(arch, w, data, cfg)?;
    Ok(cfg.beta * data_error(arch, w, data) + cfg.prior_energy(w))
}

/// Exact gradient of [`objective`] by backpropagation.
pub fn gradient(arch: &MlpArchitecture, w: &[f64], data: &TrainingSet, cfg: &ObjectiveConfig) -> Result<Vec<f64>, MlpError> {
    objective_and_gradient(arch, w, data, cfg).map(|(_, g)| g)
}

pub fn objective_and_gradient(
    arch: &MlpArchitecture,
    w: &[f64],
    data: &TrainingSet,
    cfg: &ObjectiveConfig,
) -> Result<(f64, Vec<f64>), MlpError> {
    check(arch, w, data, cfg)?;
    let nw = arch.num_weights();
    // slot nw carries the data error alongside the gradient
    let acc = par::sum_vectors(data.len(), nw + 1, |range, acc| {
        let mut z = vec![0.0; arch.hidden];
        let mut y = vec![0.0; arch.outputs];
        let mut delta = vec![0.0; arch.outputs];
        let (grad, err) = acc.split_at_mut(nw);
        for n in range {
            let x = data.input(n);
            let t = data.target(n);
            arch.forward_into(w, x, &mut z, &mut y);
            err[0] += pattern_error(arch, &y, t);
            output_delta(arch, &y, t, &mut delta);
            backprop_pattern(arch, w, x, &z, &delta, grad);
        }
    });
    let mut grad: Vec<f64> = acc[..nw].iter().map(|g| cfg.beta * g).collect();
    for ((gi, wi), &g) in grad.iter_mut().zip(w).zip(&cfg.groups) {
        *gi += cfg.alphas[g] * wi;
    }
    Ok((cfg.beta * acc[nw] + cfg.prior_energy(w), grad))
}

/// Accumulates d(sum_k delta_k a_k)/dw into `grad`, where `a` are the output
/// pre-activations.
fn backprop_pattern(arch: &MlpArchitecture, w: &[f64], x: &[f64], z: &[f64], delta: &[f64], grad: &mut [f64]) {
    let (d, m) = (arch.inputs, arch.hidden);
    let b1 = arch.first_bias_offset();
    let w2 = arch.second_weight_offset();
    let b2 = arch.output_bias_offset();
    for (k, &dk) in delta.iter().enumerate() {
        for j in 0..m {
            grad[w2 + k * m + j] += dk * z[j];
        }
        grad[b2 + k] += dk;
    }
    for j in 0..m {
        let back: f64 = delta.iter().enumerate().map(|(k, &dk)| dk * w[w2 + k * m + j]).sum();
        let dj = back * hidden_derivative(arch.hidden_activation, z[j]);
        if dj == 0.0 {
            continue;
        }
        for i in 0..d {
            grad[j * d + i] += dj * x[i];
        }
        grad[b1 + j] += dj;
    }
}

/// Outer-product (Gauss-Newton) Hessian of the unweighted data term for a
/// single probabilistic output: `sum_n y_n (1 - y_n) g_n g_n^T` with `g_n` the
/// gradient of the output pre-activation.
pub fn gauss_newton_hessian(arch: &MlpArchitecture, w: &[f64], data: &TrainingSet) -> Result<DMatrix<f64>, MlpError> {
    arch.check_weights(w)?;
    if data.is_empty() {
        return Err(MlpError::EmptyData);
    }
    if arch.outputs != 1 || !arch.output_activation.is_probabilistic() {
        return Err(MlpError::InvalidArchitecture(
            "Gauss-Newton Hessian needs a single logistic output".into(),
        ));
    }
    let nw = arch.num_weights();
    let flat = par::sum_vectors(data.len(), nw * nw, |range, acc| {
        let mut z = vec![0.0; arch.hidden];
        let mut y = [0.0];
        let mut g = vec![0.0; nw];
        for n in range {
            let x = data.input(n);
            arch.forward_into(w, x, &mut z, &mut y);
            g.iter_mut().for_each(|v| *v = 0.0);
            backprop_pattern(arch, w, x, &z, &[1.0], &mut g);
            let s = y[0] * (1.0 - y[0]);
            for a in 0..nw {
                let ga = s * g[a];
                if ga == 0.0 {
                    continue;
                }
                let row = &mut acc[a * nw..(a + 1) * nw];
                for (r, gb) in row.iter_mut().zip(&g) {
                    *r += ga * gb;
                }
            }
        }
    });
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(MlpError::NonFinite("Hessian entry".into()));
    }
    Ok(DMatrix::from_row_slice(nw, nw, &flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_weight_arch() -> MlpArchitecture {
        MlpArchitecture::classifier(1, 1)
    }

    #[test]
    fn perfect_predictions_zero_error() {
        // output bias drives y to exactly 1.0 or 0.0 in floating point
        let arch = MlpArchitecture::classifier(1, 1);
        let mut w = vec![0.0; arch.num_weights()];
        w[arch.output_bias_offset()] = 800.0;
        let data = TrainingSet::new(vec![0.1, 0.7], vec![1.0, 1.0], 1, 1).unwrap();
        let cfg = ObjectiveConfig::uniform(&arch, 0.0);
        assert_eq!(arch.forward_scalar(&w, &[0.1]), 1.0);
        let e = objective(&arch, &w, &data, &cfg).unwrap();
        assert!(e.abs() < 1e-10, "{e}");
        let g = gradient(&arch, &w, &data, &cfg).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn half_everywhere_gives_n_ln2() {
        let arch = MlpArchitecture::classifier(2, 3);
        let w = vec![0.0; arch.num_weights()];
        let n = 37;
        let inputs: Vec<f64> = (0..n * 2).map(|i| (i as f64 * 0.13).sin()).collect();
        let targets: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let data = TrainingSet::new(inputs, targets, 2, 1).unwrap();
        let e = objective(&arch, &w, &data, &ObjectiveConfig::uniform(&arch, 0.0)).unwrap();
        assert!((e - n as f64 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn prior_only_energy_and_gradient() {
        // single weight w = 2 with alpha = 3 and beta so small the data term vanishes
        let arch = one_weight_arch();
        let cfg = ObjectiveConfig::new(
            1e-300,
            vec![1, 1, 0, 1],
            vec![3.0, 0.0],
        )
        .unwrap();
        let mut w = vec![0.0; arch.num_weights()];
        w[2] = 2.0;
        assert_eq!(cfg.prior_energy(&w), 6.0);
        let data = TrainingSet::new(vec![0.5], vec![1.0], 1, 1).unwrap();
        let g = gradient(&arch, &w, &data, &cfg).unwrap();
        assert!((g[2] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_objective_finite_for_huge_weights() {
        let arch = MlpArchitecture::classifier(2, 2);
        let w = vec![1e6; arch.num_weights()];
        let data = TrainingSet::new(vec![1.0, 1.0, 0.0, 1.0], vec![0.0, 1.0], 2, 1).unwrap();
        let e = objective(&arch, &w, &data, &ObjectiveConfig::uniform(&arch, 0.0)).unwrap();
        assert!(e.is_finite());
    }

    #[test]
    fn groupings_cover_every_weight() {
        let arch = MlpArchitecture::classifier(7, 5);
        for g in [WeightGrouping::Single, WeightGrouping::ByLayer, WeightGrouping::Ard] {
            let a = g.assign(&arch);
            assert_eq!(a.len(), arch.num_weights());
            assert!(a.iter().all(|&i| i < g.num_groups(&arch)));
        }
        let ard = WeightGrouping::Ard.assign(&arch);
        // input 3 fan-out: w1[j][3] for each hidden j
        for j in 0..5 {
            assert_eq!(ard[j * 7 + 3], 3);
        }
        assert_eq!(ard[arch.first_bias_offset()], 7);
        assert_eq!(ard[arch.second_weight_offset()], 8);
        assert_eq!(ard[arch.output_bias_offset()], 9);
    }

    #[test]
    fn empty_data_rejected() {
        let arch = MlpArchitecture::classifier(2, 2);
        let data = TrainingSet {
            inputs: vec![],
            targets: vec![],
            dim: 2,
            outputs: 1,
        };
        let w = vec![0.0; arch.num_weights()];
        assert_eq!(
            objective(&arch, &w, &data, &ObjectiveConfig::uniform(&arch, 0.0)),
            Err(MlpError::EmptyData)
        );
    }

    #[test]
    fn hidden_permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arch = MlpArchitecture::classifier(3, 4);
        let w: Vec<f64> = (0..arch.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let inputs: Vec<f64> = (0..30).map(|_| rng.random()).collect();
        let targets: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let data = TrainingSet::new(inputs, targets, 3, 1).unwrap();
        let cfg = ObjectiveConfig::grouped(&arch, WeightGrouping::Ard, vec![0.3, 0.1, 0.7, 0.2, 0.4, 0.05]).unwrap();
        let perm = [2, 0, 3, 1];
        let mut wp = w.clone();
        for (new_j, &old_j) in perm.iter().enumerate() {
            for i in 0..3 {
                wp[new_j * 3 + i] = w[old_j * 3 + i];
            }
            wp[arch.first_bias_offset() + new_j] = w[arch.first_bias_offset() + old_j];
            wp[arch.second_weight_offset() + new_j] = w[arch.second_weight_offset() + old_j];
        }
        let a = objective(&arch, &w, &data, &cfg).unwrap();
        let b = objective(&arch, &wp, &data, &cfg).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn gauss_newton_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let arch = MlpArchitecture::classifier(3, 3);
        let w: Vec<f64> = (0..arch.num_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let inputs: Vec<f64> = (0..60).map(|_| rng.random()).collect();
        let targets: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let data = TrainingSet::new(inputs, targets, 3, 1).unwrap();
        let h = gauss_newton_hessian(&arch, &w, &data).unwrap();
        assert!((&h - h.transpose()).abs().max() < 1e-12);
        let eig = h.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > -1e-10));
    }
}
