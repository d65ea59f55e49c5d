//! Genetic search over network architectures.
//!
//! An 11-bit chromosome encodes the hidden-unit count and both activations:
//!
//! | bits  | meaning |
//! |-------|---------|
//! | 0..=6 | raw hidden count, bit 0 most significant; `M = 1 + raw mod m_max` |
//! | 7..=8 | hidden activation: `00` linear, `01` logistic, `10`/`11` tanh |
//! | 9..=10| output activation: `00` logistic, `01` softmax, `10` linear, `11` tanh |

use crate::eval::auc_from_scores;
use crate::mlp::{
    init_weights, objective, objective_and_gradient, scg_minimize, Activation, MlpArchitecture, ObjectiveConfig,
    ScgLimits, TrainingSet,
};
use crate::par;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

pub const CHROMOSOME_BITS: usize = 11;
const HIDDEN_BITS: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("training data needs both classes")]
    SingleClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chromosome(pub [bool; CHROMOSOME_BITS]);

impl Chromosome {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bits = [false; CHROMOSOME_BITS];
        bits.iter_mut().for_each(|b| *b = rng.random_bool(0.5));
        Chromosome(bits)
    }

    /// Encodes a raw hidden count (lower 7 bits) and activation codes.
    pub fn encode(raw_hidden: usize, hidden_code: u8, output_code: u8) -> Self {
        let mut bits = [false; CHROMOSOME_BITS];
        for (i, b) in bits[..HIDDEN_BITS].iter_mut().enumerate() {
            *b = (raw_hidden >> (HIDDEN_BITS - 1 - i)) & 1 == 1;
        }
        bits[7] = hidden_code & 2 != 0;
        bits[8] = hidden_code & 1 != 0;
        bits[9] = output_code & 2 != 0;
        bits[10] = output_code & 1 != 0;
        Chromosome(bits)
    }

    pub fn raw_hidden(&self) -> usize {
        self.0[..HIDDEN_BITS].iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn hidden_activation(&self) -> Activation {
        match (self.0[7], self.0[8]) {
            (false, false) => Activation::Linear,
            (false, true) => Activation::Logistic,
            _ => Activation::HyperbolicTangent,
        }
    }

    pub fn output_activation(&self) -> Activation {
        match (self.0[9], self.0[10]) {
            (false, false) => Activation::Logistic,
            (false, true) => Activation::Softmax,
            (true, false) => Activation::Linear,
            (true, true) => Activation::HyperbolicTangent,
        }
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bits as `0`/`1` characters, bit 0 first.
    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn parse(s: &str) -> Option<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != CHROMOSOME_BITS {
            return None;
        }
        let mut bits = [false; CHROMOSOME_BITS];
        for (b, c) in bits.iter_mut().zip(chars) {
            *b = match c {
                '0' => false,
                '1' => true,
                _ => return None,
            };
        }
        Some(Chromosome(bits))
    }
}

/// Largest admissible hidden count `floor(n / (r (i + o)))`, at least 1.
pub fn m_max(n: usize, inputs: usize, outputs: usize, r: f64) -> usize {
    let bound = n as f64 / (r * (inputs + outputs) as f64);
    if bound.is_finite() && bound >= 1.0 {
        bound.floor() as usize
    } else {
        1
    }
}

/// Architecture with `inputs` inputs and one output.
pub fn decode(c: &Chromosome, m_max: usize, inputs: usize) -> MlpArchitecture {
    MlpArchitecture {
        inputs,
        hidden: 1 + c.raw_hidden() % m_max.max(1),
        outputs: 1,
        hidden_activation: c.hidden_activation(),
        output_activation: c.output_activation(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Independent flip probability per bit.
    pub mutation_rate: f64,
    /// Noise constant in the hidden-count bound.
    pub r: f64,
    pub elitism: usize,
    /// Stratified 80/20 repeats averaged per fitness evaluation.
    pub folds: usize,
    /// SCG iterations when training a candidate.
    pub train_iterations: usize,
    /// Fixed weight decay when training a candidate.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 20,
            generations: 10,
            crossover_rate: 0.8,
            mutation_rate: 0.05,
            r: 12.5,
            elitism: 1,
            folds: 2,
            train_iterations: 100,
            alpha: 0.01,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |m: &str| Err(GaError::InvalidConfig(m.into()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.generations == 0 {
            return bad("generations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad("r must be positive");
        }
        if self.elitism > self.population_size {
            return bad("elitism exceeds the population size");
        }
        if self.folds == 0 || self.train_iterations == 0 {
            return bad("folds and train_iterations must be at least 1");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and non-negative");
        }
        Ok(())
    }
}

fn stratified_holdout(labels: &[bool], rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut hold) = (Vec::new(), Vec::new());
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let n_hold = ((idx.len() as f64 * 0.2).round() as usize).clamp(1, idx.len().saturating_sub(1).max(1));
        hold.extend_from_slice(&idx[..n_hold]);
        train.extend_from_slice(&idx[n_hold..]);
    }
    train.sort_unstable();
    hold.sort_unstable();
    (train, hold)
}

fn fold_fitness(arch: &MlpArchitecture, data: &TrainingSet, labels: &[bool], config: &GaConfig, seed: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_idx, hold_idx) = stratified_holdout(labels, &mut rng);
    let train = data.subset(&train_idx);
    let hold = data.subset(&hold_idx);
    let cfg = ObjectiveConfig::uniform(arch, config.alpha);
    let w0 = init_weights(arch, par::derive_seed(seed, &[1]), 1.0).ok()?;
    objective(arch, &w0, &train, &cfg).ok()?;
    let out = scg_minimize(
        |w| objective(arch, w, &train, &cfg).unwrap_or(f64::INFINITY),
        |w| objective_and_gradient(arch, w, &train, &cfg).map(|(_, g)| g).unwrap_or_else(|_| vec![f64::NAN; w.len()]),
        w0,
        &ScgLimits::iterations(config.train_iterations),
    )
    .ok()?;
    let scores: Vec<f64> = (0..hold.len()).map(|n| arch.forward_scalar(&out.weights, hold.input(n))).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return None;
    }
    auc_from_scores(&scores, &hold.labels()).ok()
}

/// Mean held-out AUC over `config.folds` stratified 80/20 splits. Any
/// training failure gives fitness 0.
pub fn evaluate_fitness(arch: &MlpArchitecture, data: &TrainingSet, config: &GaConfig, seed: u64) -> f64 {
    let labels = data.labels();
    let positives = labels.iter().filter(|&&l| l).count();
    if positives < 2 || labels.len() - positives < 2 || arch.validate().is_err() {
        return 0.0;
    }
    let mut total = 0.0;
    for f in 0..config.folds {
        match fold_fitness(arch, data, &labels, config, par::derive_seed(seed, &[f as u64])) {
            Some(a) => total += a,
            None => return 0.0,
        }
    }
    total / config.folds as f64
}

/// Roulette-wheel pick proportional to fitness; uniform when every fitness
/// is zero.
pub fn roulette_select<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> usize {
    let total: f64 = fitness.iter().map(|f| f.max(0.0)).sum();
    if total <= 0.0 {
        return rng.random_range(0..fitness.len());
    }
    let mut spin = rng.random::<f64>() * total;
    for (i, f) in fitness.iter().enumerate() {
        spin -= f.max(0.0);
        if spin < 0.0 {
            return i;
        }
    }
    fitness.iter().rposition(|&f| f > 0.0).unwrap_or(0)
}

/// Children swapping tails after bit `point` (`1..CHROMOSOME_BITS`).
pub fn crossover(a: &Chromosome, b: &Chromosome, point: usize) -> (Chromosome, Chromosome) {
    let (mut c, mut d) = (*a, *b);
    c.0[point..].copy_from_slice(&b.0[point..]);
    d.0[point..].copy_from_slice(&a.0[point..]);
    (c, d)
}

pub fn mutate<R: Rng + ?Sized>(c: &mut Chromosome, rate: f64, rng: &mut R) {
    for b in c.0.iter_mut() {
        if rng.random_bool(rate) {
            *b = !*b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best fitness seen so far.
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_chromosome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Chromosome,
    pub best_architecture: MlpArchitecture,
    pub best_fitness: f64,
    pub m_max: usize,
    pub history: Vec<GenerationStats>,
    /// Populations in generation order.
    pub populations: Vec<Vec<Chromosome>>,
    /// Distinct architectures trained.
    pub evaluations: usize,
}

/// Generational search from a random initial population.
pub fn ga_search(data: &TrainingSet, config: &GaConfig) -> Result<GaResult, GaError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = (0..config.population_size).map(|_| Chromosome::random(&mut rng)).collect();
    ga_search_from(data, config, initial)
}

/// Generational search from a given population. Fitness depends only on the
/// decoded architecture and `config.seed`, so it is cached per architecture.
pub fn ga_search_from(data: &TrainingSet, config: &GaConfig, initial: Vec<Chromosome>) -> Result<GaResult, GaError> {
    config.validate()?;
    if initial.len() != config.population_size {
        return Err(GaError::InvalidConfig("initial population size differs from population_size".into()));
    }
    let labels = data.labels();
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(GaError::SingleClass);
    }
    let mm = m_max(data.len(), data.dim, 1, config.r);
    let mut cache: HashMap<MlpArchitecture, f64> = HashMap::new();
    let mut population = initial;
    let mut populations = Vec::with_capacity(config.generations);
    let mut history = Vec::with_capacity(config.generations);
    let mut best: Option<(Chromosome, f64)> = None;

    for generation in 0..config.generations {
        let archs: Vec<MlpArchitecture> = population.iter().map(|c| decode(c, mm, data.dim)).collect();
        let mut fresh: Vec<MlpArchitecture> = Vec::new();
        for a in &archs {
            if !cache.contains_key(a) && !fresh.contains(a) {
                fresh.push(*a);
            }
        }
        let scores = par::map_slice(&fresh, |a| evaluate_fitness(a, data, config, config.seed));
        cache.extend(fresh.into_iter().zip(scores));
        let fitness: Vec<f64> = archs.iter().map(|a| cache[a]).collect();

        for (c, &f) in population.iter().zip(&fitness) {
            if best.is_none_or(|(_, bf)| f > bf) {
                best = Some((*c, f));
            }
        }
        let (best_c, best_f) = best.expect("population is non-empty");
        history.push(GenerationStats {
            generation,
            best_fitness: best_f,
            mean_fitness: fitness.iter().sum::<f64>() / fitness.len() as f64,
            best_chromosome: best_c.to_bit_string(),
        });
        populations.push(population.clone());
        if generation + 1 == config.generations {
            break;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(config.seed, &[generation as u64]));
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
        let mut next: Vec<Chromosome> = order[..config.elitism].iter().map(|&i| population[i]).collect();
        while next.len() < config.population_size {
            let a = population[roulette_select(&fitness, &mut rng)];
            let b = population[roulette_select(&fitness, &mut rng)];
            let (mut c, mut d) = if rng.random_bool(config.crossover_rate) {
                crossover(&a, &b, rng.random_range(1..CHROMOSOME_BITS))
            } else {
                (a, b)
            };
            mutate(&mut c, config.mutation_rate, &mut rng);
            mutate(&mut d, config.mutation_rate, &mut rng);
            next.push(c);
            if next.len() < config.population_size {
                next.push(d);
            }
        }
        population = next;
    }

    let (best_c, best_f) = best.expect("at least one generation");
    Ok(GaResult {
        best: best_c,
        best_architecture: decode(&best_c, mm, data.dim),
        best_fitness: best_f,
        m_max: mm,
        history,
        populations,
        evaluations: cache.len(),
    })
}

/// `generation,best_fitness,mean_fitness,best_chromosome_bits` rows.
pub fn history_csv(history: &[GenerationStats]) -> String {
    let mut out = String::from("generation,best_fitness,mean_fitness,best_chromosome_bits\n");
    for h in history {
        out.push_str(&format!("{},{},{},{}\n", h.generation, h.best_fitness, h.mean_fitness, h.best_chromosome));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn m_max_examples() {
        assert_eq!(m_max(1000, 7, 1, 5.0), 25);
        assert_eq!(m_max(1000, 7, 1, 12.5), 10);
        assert_eq!(m_max(30, 7, 1, 5.0), 1);
    }

    #[test]
    fn decode_layout() {
        let zero = decode(&Chromosome([false; CHROMOSOME_BITS]), 10, 7);
        assert_eq!(zero.hidden, 1);
        assert_eq!(zero.hidden_activation, Activation::Linear);
        assert_eq!(zero.output_activation, Activation::Logistic);
        assert_eq!(decode(&Chromosome::encode(10, 0, 0), 10, 7).hidden, 1);
        assert_eq!(decode(&Chromosome::encode(9, 0, 0), 10, 7).hidden, 10);
        let paper = decode(&Chromosome::encode(9, 0b10, 0b00), 10, 7);
        assert_eq!(paper.hidden_activation, Activation::HyperbolicTangent);
        assert_eq!(paper.output_activation, Activation::Logistic);
        assert_eq!(Chromosome::encode(0, 0b11, 0).hidden_activation(), Activation::HyperbolicTangent);
        assert_eq!(Chromosome::encode(0, 0, 0b01).output_activation(), Activation::Softmax);
        assert_eq!(Chromosome::encode(0, 0, 0b10).output_activation(), Activation::Linear);
        assert_eq!(Chromosome::encode(0, 0, 0b11).output_activation(), Activation::HyperbolicTangent);
    }

    #[test]
    fn bit_string_round_trip() {
        let c = Chromosome::encode(77, 1, 3);
        assert_eq!(c.raw_hidden(), 77);
        assert_eq!(Chromosome::parse(&c.to_bit_string()), Some(c));
        assert_eq!(Chromosome::parse("0101"), None);
    }

    #[test]
    fn roulette_frequencies_match_shares() {
        let fitness = [0.1, 0.2, 0.3, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[roulette_select(&fitness, &mut rng)] += 1;
        }
        for (c, s) in counts.iter().zip(fitness) {
            let sigma = (s * (1.0 - s) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - s).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn roulette_uniform_on_equal_fitness() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[roulette_select(&[0.0; 5], &mut rng)] += 1;
        }
        let sigma = (0.2 * 0.8 / n as f64).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 / n as f64 - 0.2).abs() <= 3.0 * sigma));
    }

    #[test]
    fn mutation_rate_empirical() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rate = 0.1;
        let trials = 100_000 / CHROMOSOME_BITS + 1;
        let mut flips = 0;
        for _ in 0..trials {
            let mut c = Chromosome([false; CHROMOSOME_BITS]);
            mutate(&mut c, rate, &mut rng);
            flips += c.ones();
        }
        let n = (trials * CHROMOSOME_BITS) as f64;
        let sigma = (rate * (1.0 - rate) / n).sqrt();
        assert!((flips as f64 / n - rate).abs() <= 3.0 * sigma);
    }

    fn separable(n: usize, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] + r[1] > 1.0).collect();
        TrainingSet::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn fitness_deterministic_and_high_on_separable() {
        let data = separable(300, 1);
        let cfg = GaConfig::default();
        let arch = MlpArchitecture::classifier(3, 2);
        let a = evaluate_fitness(&arch, &data, &cfg, 5);
        assert_eq!(a, evaluate_fitness(&arch, &data, &cfg, 5));
        assert!(a >= 0.95, "{a}");
    }

    #[test]
    fn frozen_population_is_a_fixed_point() {
        let data = separable(100, 2);
        let cfg = GaConfig {
            population_size: 6,
            generations: 4,
            crossover_rate: 0.0,
            mutation_rate: 0.0,
            train_iterations: 20,
            folds: 1,
            ..GaConfig::default()
        };
        let c = Chromosome::encode(3, 2, 0);
        let out = ga_search_from(&data, &cfg, vec![c; 6]).unwrap();
        assert!(out.populations.iter().all(|p| p.iter().all(|x| *x == c)));
        assert_eq!(out.history.len(), 4);
        assert_eq!(out.evaluations, 1);
    }

    #[test]
    fn best_fitness_monotone_and_bounded_hidden() {
        let data = separable(200, 3);
        let cfg = GaConfig {
            population_size: 8,
            generations: 5,
            train_iterations: 30,
            folds: 1,
            r: 5.0,
            seed: 4,
            ..GaConfig::default()
        };
        let out = ga_search(&data, &cfg).unwrap();
        assert!(out.history.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        assert_eq!(out.m_max, m_max(200, 3, 1, 5.0));
        for pop in &out.populations {
            assert!(pop.iter().all(|c| decode(c, out.m_max, 3).hidden <= out.m_max));
        }
        let csv = history_csv(&out.history);
        assert_eq!(csv.lines().count(), 6);
    }

    proptest! {
        #[test]
        fn decode_is_total(bits in proptest::array::uniform11(any::<bool>()), mm in 1usize..200) {
            let arch = decode(&Chromosome(bits), mm, 7);
            prop_assert!(arch.validate().is_ok());
            prop_assert!(arch.hidden >= 1 && arch.hidden <= mm);
        }

        #[test]
        fn crossover_preserves_bits(
            a in proptest::array::uniform11(any::<bool>()),
            b in proptest::array::uniform11(any::<bool>()),
            point in 1usize..CHROMOSOME_BITS,
        ) {
            let (a, b) = (Chromosome(a), Chromosome(b));
            let (c, d) = crossover(&a, &b, point);
            prop_assert_eq!(c.ones() + d.ones(), a.ones() + b.ones());
        }
    }
}
