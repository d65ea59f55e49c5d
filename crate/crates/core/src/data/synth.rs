//! Synthetic dyad-year generator with a known logistic ground truth.
//!
//! Each variable is drawn independently over a fixed generation range, mapped
//! to a peace-oriented coordinate `u` in [0, 1] (1 = the peace-favoring end),
//! and the dispute probability is
//!
//! `logistic(intercept - sum_i c_i u_i - sum_(i,j) c_ij u_i u_j)`
//!
//! with every `c` non-negative, so the truth is monotone decreasing in each
//! peace-favoring direction.

use super::{
    DataError, Dataset, DyadYearRecord, Outcome, PeaceOrientation, Variable, VariableKind,
    VariableSchema, NUM_VARIABLES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    /// Exact fraction of disputes. `None` keeps the natural rate implied by
    /// the ground truth.
    pub class_balance: Option<f64>,
    pub intercept: f64,
    /// Peace strength of each variable, schema order.
    pub coefficients: [f64; NUM_VARIABLES],
    /// Pairwise peace-strength terms.
    #[serde(default)]
    pub interactions: Vec<(Variable, Variable, f64)>,
}

/// Raw generation range per variable (binary variables are fair coins and
/// Democracy is drawn on the integer scale).
const GEN_RANGE: [(f64, f64); NUM_VARIABLES] = [
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (1.5, 4.3),
    (0.0, 3.0),
    (-10.0, 10.0),
    (0.0, 0.2),
];

impl SynthConfig {
    /// Strong signal concentrated on the controllable variables; the
    /// Bayes-optimal AUC is about 0.985 and setting all four controllables to
    /// their peace end makes the logit at most -16.5.
    pub fn separable(count: usize) -> Self {
        let base = [1.0, 1.0, 1.0, 1.0, 3.0, 4.0, 6.0];
        let coefficients = base.map(|c| 3.0 * c);
        SynthConfig {
            count,
            class_balance: Some(0.5),
            intercept: coefficients.iter().sum::<f64>() / 2.0,
            coefficients,
            interactions: vec![],
        }
    }

    /// Labels independent of the inputs.
    pub fn noise(count: usize) -> Self {
        SynthConfig {
            count,
            class_balance: None,
            intercept: 0.0,
            coefficients: [0.0; NUM_VARIABLES],
            interactions: vec![],
        }
    }

    /// Only the listed variables carry signal, each with peace strength
    /// `strength`; the intercept centres the logit.
    pub fn informative(count: usize, variables: &[Variable], strength: f64) -> Self {
        let mut coefficients = [0.0; NUM_VARIABLES];
        for v in variables {
            coefficients[v.index()] = strength;
        }
        SynthConfig {
            count,
            class_balance: Some(0.5),
            intercept: coefficients.iter().sum::<f64>() / 2.0,
            coefficients,
            interactions: vec![],
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidConfig(m.to_string()));
        if self.count == 0 {
            return bad("count must be positive");
        }
        if let Some(b) = self.class_balance {
            if !(0.0..=1.0).contains(&b) {
                return bad("class_balance must lie in [0, 1]");
            }
        }
        if !self.intercept.is_finite() {
            return bad("intercept must be finite");
        }
        if self.coefficients.iter().any(|c| !c.is_finite() || *c < 0.0)
            || self.interactions.iter().any(|(_, _, c)| !c.is_finite() || *c < 0.0)
        {
            return bad("coefficients must be finite and non-negative");
        }
        Ok(())
    }

    /// Peace-oriented coordinate of each raw value over the generation range.
    pub fn peace_coordinates(values: &[f64; NUM_VARIABLES]) -> [f64; NUM_VARIABLES] {
        let schema = VariableSchema::standard();
        let mut u = [0.0; NUM_VARIABLES];
        for (i, spec) in schema.specs().iter().enumerate() {
            let (lo, hi) = GEN_RANGE[i];
            let s = ((values[i] - lo) / (hi - lo)).clamp(0.0, 1.0);
            u[i] = match spec.peace_orientation {
                PeaceOrientation::HighValueFavorsPeace => s,
                PeaceOrientation::LowValueFavorsPeace => 1.0 - s,
            };
        }
        u
    }

    /// Ground-truth dispute probability for raw values.
    pub fn dispute_probability(&self, values: &[f64; NUM_VARIABLES]) -> f64 {
        let u = Self::peace_coordinates(values);
        let mut z = self.intercept;
        for (c, x) in self.coefficients.iter().zip(u) {
            z -= c * x;
        }
        for &(a, b, c) in &self.interactions {
            z -= c * u[a.index()] * u[b.index()];
        }
        1.0 / (1.0 + (-z).exp())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthProvenance {
    pub generator: String,
    pub seed: u64,
    pub config: SynthConfig,
}

fn draw_values(rng: &mut ChaCha8Rng) -> [f64; NUM_VARIABLES] {
    let schema = VariableSchema::standard();
    let mut v = [0.0; NUM_VARIABLES];
    for (i, spec) in schema.specs().iter().enumerate() {
        let (lo, hi) = GEN_RANGE[i];
        v[i] = match spec.kind {
            VariableKind::Binary => f64::from(rng.random_bool(0.5) as u8),
            VariableKind::Ordinal => rng.random_range(lo as i32..=hi as i32) as f64,
            VariableKind::Continuous => rng.random_range(lo..hi),
        };
    }
    v
}

/// Generates a reproducible synthetic dataset. The configuration and seed are
/// recorded as JSON in the dataset provenance.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Dataset, DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quota = config.class_balance.map(|b| {
        let d = (b * config.count as f64).round() as usize;
        (d, config.count - d)
    });
    let max_attempts = config.count.saturating_mul(10_000).max(100_000);
    let (mut n_dispute, mut n_peace) = (0usize, 0usize);
    let mut records = Vec::with_capacity(config.count);
    let mut attempts = 0usize;
    while records.len() < config.count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(DataError::InvalidConfig(
                "class balance unreachable under this ground truth".into(),
            ));
        }
        let values = draw_values(&mut rng);
        let dispute = rng.random::<f64>() < config.dispute_probability(&values);
        if let Some((qd, qp)) = quota {
            if (dispute && n_dispute >= qd) || (!dispute && n_peace >= qp) {
                continue;
            }
        }
        if dispute {
            n_dispute += 1;
        } else {
            n_peace += 1;
        }
        let i = records.len();
        records.push(DyadYearRecord {
            state_a: format!("A{i:05}"),
            state_b: format!("B{i:05}"),
            year: 1946 + (i % 47) as i32,
            values,
            outcome: if dispute { Outcome::Dispute } else { Outcome::Peace },
        });
    }
    let provenance = serde_json::to_string(&SynthProvenance {
        generator: "logistic-v1".into(),
        seed,
        config: config.clone(),
    })
    .expect("config serializes");
    Dataset::new(VariableSchema::standard(), records, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let cfg = SynthConfig::separable(1000);
        let a = synth_generate(&cfg, 42).unwrap();
        let b = synth_generate(&cfg, 42).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.len(), 1000);
        assert_eq!(a.class_counts(), (500, 500));
        let p: SynthProvenance = serde_json::from_str(&a.provenance).unwrap();
        assert_eq!(p.config, cfg);
        assert_eq!(p.seed, 42);
    }

    #[test]
    fn zero_coefficients_give_even_rate_within_binomial_bounds() {
        let n = 4000;
        let ds = synth_generate(&SynthConfig::noise(n), 9).unwrap();
        let rate = ds.class_counts().0 as f64 / n as f64;
        // three binomial standard deviations around 0.5
        let sigma = (0.25 / n as f64).sqrt();
        assert!((rate - 0.5).abs() <= 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn ground_truth_monotone_in_peace_direction() {
        let cfg = SynthConfig::separable(10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let schema = VariableSchema::standard();
        for _ in 0..200 {
            let x = draw_values(&mut rng);
            let p0 = cfg.dispute_probability(&x);
            for spec in schema.specs() {
                let i = spec.variable.index();
                let mut y = x;
                let (lo, hi) = GEN_RANGE[i];
                y[i] = match spec.peace_orientation {
                    PeaceOrientation::HighValueFavorsPeace => hi,
                    PeaceOrientation::LowValueFavorsPeace => lo,
                };
                assert!(cfg.dispute_probability(&y) <= p0);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = SynthConfig::noise(0);
        assert!(matches!(synth_generate(&cfg, 0), Err(DataError::InvalidConfig(_))));
        cfg.count = 10;
        cfg.coefficients[2] = -1.0;
        assert!(matches!(synth_generate(&cfg, 0), Err(DataError::InvalidConfig(_))));
    }
}
