//! Feedback control over the controllable inputs of a predicted dispute.
//!
//! The plant is the trained classifier. For a case whose dispute probability
//! exceeds the peace threshold, the controller searches the scaled [0, 1]
//! range of the controllable inputs for values that minimize that
//! probability: golden-section search for one variable, simulated annealing
//! for all four jointly. Every other input is left untouched.

mod gss;
mod sa;

pub use gss::{gss_minimize, GssOutcome, GOLDEN_RATIO_CONJUGATE};
pub use sa::{reflect_unit, sa_minimize, SaConfig, SaOutcome};

use crate::bayes::Prediction;
use crate::data::{Dataset, DyadYearRecord, ScalingParams, Variable, VariableKind, VariableSchema, NUM_VARIABLES};
use crate::model::Predictor;
use crate::par;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("variable not controllable: {0}")]
    NotControllable(Variable),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid control configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Probabilities above this are predicted disputes.
    pub peace_threshold: f64,
    /// Annealing stops once the probability falls below this.
    pub success_target: f64,
    /// Predicted disputes below this confidence are not acted on.
    pub confidence_min: f64,
    /// Golden-section bracket width at termination, scaled units.
    pub gss_tolerance: f64,
    pub sa: SaConfig,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            peace_threshold: 0.5,
            success_target: 0.05,
            confidence_min: 0.0,
            gss_tolerance: 1e-4,
            sa: SaConfig::default(),
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: &str| Err(ControlError::InvalidConfig(m.into()));
        if !(self.peace_threshold > 0.0 && self.peace_threshold < 1.0) {
            return bad("peace_threshold must lie in (0, 1)");
        }
        if !(self.success_target.is_finite() && self.success_target <= self.peace_threshold) {
            return bad("success_target must not exceed peace_threshold");
        }
        if !(0.0..=1.0).contains(&self.confidence_min) {
            return bad("confidence_min must lie in [0, 1]");
        }
        if !(self.gss_tolerance > 0.0 && self.gss_tolerance < 1.0) {
            return bad("gss_tolerance must lie in (0, 1)");
        }
        self.sa.validate()
    }
}

/// Original and proposed value of one controllable input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableChange {
    pub variable: Variable,
    pub original_value: f64,
    pub proposed_value: f64,
    pub original_scaled: f64,
    pub proposed_scaled: f64,
    pub raw_delta: f64,
    pub scaled_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleStrategyResult {
    pub change: VariableChange,
    pub probability_before: f64,
    pub probability_after: f64,
    pub confidence_before: f64,
    /// `probability_after < peace_threshold`.
    pub success: bool,
    pub objective_evaluations: usize,
    pub scaled_before: [f64; NUM_VARIABLES],
    pub scaled_after: [f64; NUM_VARIABLES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStrategyResult {
    /// Democracy, Allies, Capability, Dependency.
    pub changes: Vec<VariableChange>,
    pub probability_before: f64,
    pub probability_after: f64,
    pub confidence_before: f64,
    pub success: bool,
    pub objective_evaluations: usize,
    /// Best cost so far, sampled at up to [`TRACE_SUMMARY_POINTS`] evenly
    /// spaced annealing steps including the first and last.
    pub sa_trace: Vec<f64>,
    pub scaled_before: [f64; NUM_VARIABLES],
    pub scaled_after: [f64; NUM_VARIABLES],
}

pub const TRACE_SUMMARY_POINTS: usize = 50;

/// Domain-clamped raw value for a scaled coordinate. Binary variables round
/// to 0 or 1.
fn raw_value(scaling: &ScalingParams, schema: &VariableSchema, v: Variable, scaled: f64) -> f64 {
    let spec = schema.spec(v);
    let raw = scaling.unscale_value(v.index(), scaled).clamp(spec.domain_min, spec.domain_max);
    match spec.kind {
        VariableKind::Binary => raw.round(),
        _ => raw,
    }
}

fn change(
    scaling: &ScalingParams,
    schema: &VariableSchema,
    case: &DyadYearRecord,
    v: Variable,
    before: f64,
    after: f64,
) -> VariableChange {
    let i = v.index();
    let proposed_value = if after == before {
        case.values[i]
    } else {
        raw_value(scaling, schema, v, after)
    };
    VariableChange {
        variable: v,
        original_value: case.values[i],
        proposed_value,
        original_scaled: before,
        proposed_scaled: after,
        raw_delta: proposed_value - case.values[i],
        scaled_delta: after - before,
    }
}

fn is_binary(schema: &VariableSchema, v: Variable) -> bool {
    schema.spec(v).kind == VariableKind::Binary
}

/// Scaled coordinate of the raw binary value nearest to scaled `u`.
fn snap_binary(scaling: &ScalingParams, i: usize, u: f64) -> f64 {
    let raw = scaling.unscale_value(i, u).clamp(0.0, 1.0).round();
    scaling.scale_value(i, raw)
}

/// Single-variable strategy. Continuous and ordinal variables use
/// golden-section search over the scaled range; binary variables try both
/// values. A search result no better than the current value keeps it.
pub fn control_single<P: Predictor + ?Sized>(
    predictor: &P,
    scaling: &ScalingParams,
    schema: &VariableSchema,
    case: &DyadYearRecord,
    variable: Variable,
    config: &ControlConfig,
) -> Result<SingleStrategyResult, ControlError> {
    config.validate()?;
    if !variable.is_controllable() {
        return Err(ControlError::NotControllable(variable));
    }
    let x = scaling.apply(case);
    let before = predictor.predict(&x);
    let i = variable.index();
    let mut proposed = x[i];
    let mut after = before.probability;
    let mut evaluations = 0;

    if before.probability > config.peace_threshold {
        let with = |v: f64| {
            let mut y = x;
            y[i] = v;
            predictor.predict(&y).probability
        };
        let (cand, p) = if is_binary(schema, variable) {
            evaluations = 2;
            let (s0, s1) = (scaling.scale_value(i, 0.0), scaling.scale_value(i, 1.0));
            let (p0, p1) = (with(s0), with(s1));
            if p1 < p0 {
                (s1, p1)
            } else {
                (s0, p0)
            }
        } else {
            let out = gss_minimize(with, 0.0, 1.0, config.gss_tolerance)?;
            evaluations = out.evaluations;
            (out.x, out.f)
        };
        if p < before.probability {
            proposed = cand;
            after = p;
        }
    }
    let mut y = x;
    y[i] = proposed;
    Ok(SingleStrategyResult {
        change: change(scaling, schema, case, variable, x[i], proposed),
        probability_before: before.probability,
        probability_after: after,
        confidence_before: before.confidence,
        success: after < config.peace_threshold,
        objective_evaluations: evaluations,
        scaled_before: x,
        scaled_after: y,
    })
}

fn summarize_trace(trace: &[f64]) -> Vec<f64> {
    if trace.len() <= TRACE_SUMMARY_POINTS {
        return trace.to_vec();
    }
    let last = trace.len() - 1;
    (0..TRACE_SUMMARY_POINTS)
        .map(|k| trace[k * last / (TRACE_SUMMARY_POINTS - 1)])
        .collect()
}

/// All four controllables jointly by simulated annealing, seeded with
/// `config.sa.seed`. Binary coordinates are snapped to their nearest value
/// before every evaluation.
pub fn control_multi<P: Predictor + ?Sized>(
    predictor: &P,
    scaling: &ScalingParams,
    schema: &VariableSchema,
    case: &DyadYearRecord,
    config: &ControlConfig,
) -> Result<MultiStrategyResult, ControlError> {
    config.validate()?;
    let dims = Variable::CONTROLLABLE;
    let x = scaling.apply(case);
    let before = predictor.predict(&x);
    let place = |u: &[f64]| {
        let mut y = x;
        for (&v, &ui) in dims.iter().zip(u) {
            let i = v.index();
            y[i] = if is_binary(schema, v) { snap_binary(scaling, i, ui) } else { ui };
        }
        y
    };
    let mut y = x;
    let mut after = before.probability;
    let mut evaluations = 0;
    let mut sa_trace = vec![];

    if before.probability > config.peace_threshold {
        let start: Vec<f64> = dims.iter().map(|v| x[v.index()]).collect();
        let out = sa_minimize(
            |u| predictor.predict(&place(u)).probability,
            &start,
            &config.sa,
            Some(config.success_target),
        )?;
        evaluations = out.evaluations;
        sa_trace = summarize_trace(&out.trace);
        if out.f < before.probability {
            y = place(&out.x);
            after = out.f;
        }
    }
    Ok(MultiStrategyResult {
        changes: dims
            .iter()
            .map(|&v| change(scaling, schema, case, v, x[v.index()], y[v.index()]))
            .collect(),
        probability_before: before.probability,
        probability_after: after,
        confidence_before: before.confidence,
        success: after < config.peace_threshold,
        objective_evaluations: evaluations,
        sa_trace,
        scaled_before: x,
        scaled_after: y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "variable")]
pub enum Strategy {
    Single(Variable),
    Multi,
}

impl Strategy {
    /// `multi` or the name of a controllable variable.
    pub fn parse(s: &str) -> Option<Strategy> {
        if s == "multi" {
            return Some(Strategy::Multi);
        }
        Variable::parse(s).filter(|v| v.is_controllable()).map(Strategy::Single)
    }

    pub fn label(&self) -> String {
        match self {
            Strategy::Single(v) => v.name().to_string(),
            Strategy::Multi => "multi".to_string(),
        }
    }

    pub fn variables(&self) -> Vec<Variable> {
        match self {
            Strategy::Single(v) => vec![*v],
            Strategy::Multi => Variable::CONTROLLABLE.to_vec(),
        }
    }

    /// The four single strategies followed by the multiple strategy.
    pub fn all() -> Vec<Strategy> {
        let mut s: Vec<Strategy> = Variable::CONTROLLABLE.iter().map(|&v| Strategy::Single(v)).collect();
        s.push(Strategy::Multi);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum ControlPlan {
    Single(SingleStrategyResult),
    Multi(MultiStrategyResult),
}

impl ControlPlan {
    pub fn probability_before(&self) -> f64 {
        match self {
            ControlPlan::Single(r) => r.probability_before,
            ControlPlan::Multi(r) => r.probability_before,
        }
    }

    pub fn probability_after(&self) -> f64 {
        match self {
            ControlPlan::Single(r) => r.probability_after,
            ControlPlan::Multi(r) => r.probability_after,
        }
    }

    pub fn success(&self) -> bool {
        match self {
            ControlPlan::Single(r) => r.success,
            ControlPlan::Multi(r) => r.success,
        }
    }

    pub fn changes(&self) -> Vec<&VariableChange> {
        match self {
            ControlPlan::Single(r) => vec![&r.change],
            ControlPlan::Multi(r) => r.changes.iter().collect(),
        }
    }

    pub fn scaled_before(&self) -> &[f64; NUM_VARIABLES] {
        match self {
            ControlPlan::Single(r) => &r.scaled_before,
            ControlPlan::Multi(r) => &r.scaled_before,
        }
    }

    pub fn scaled_after(&self) -> &[f64; NUM_VARIABLES] {
        match self {
            ControlPlan::Single(r) => &r.scaled_after,
            ControlPlan::Multi(r) => &r.scaled_after,
        }
    }

    pub fn objective_evaluations(&self) -> usize {
        match self {
            ControlPlan::Single(r) => r.objective_evaluations,
            ControlPlan::Multi(r) => r.objective_evaluations,
        }
    }
}

/// Runs `strategy` on one case.
pub fn control_case<P: Predictor + ?Sized>(
    predictor: &P,
    scaling: &ScalingParams,
    schema: &VariableSchema,
    case: &DyadYearRecord,
    strategy: Strategy,
    config: &ControlConfig,
) -> Result<ControlPlan, ControlError> {
    Ok(match strategy {
        Strategy::Single(v) => ControlPlan::Single(control_single(predictor, scaling, schema, case, v, config)?),
        Strategy::Multi => ControlPlan::Multi(control_multi(predictor, scaling, schema, case, config)?),
    })
}

/// Indices of predicted disputes split by `confidence >= confidence_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSplit {
    pub acted_on: Vec<usize>,
    pub skipped: Vec<usize>,
}

pub fn confidence_filter(predictions: &[Prediction], peace_threshold: f64, confidence_min: f64) -> ConfidenceSplit {
    let mut split = ConfidenceSplit {
        acted_on: vec![],
        skipped: vec![],
    };
    for (i, p) in predictions.iter().enumerate() {
        if p.probability > peace_threshold {
            if p.confidence >= confidence_min {
                split.acted_on.push(i);
            } else {
                split.skipped.push(i);
            }
        }
    }
    split
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    /// Row index in the campaign dataset.
    pub case_id: usize,
    pub state_a: String,
    pub state_b: String,
    pub year: i32,
    /// Whether the case is a recorded dispute.
    pub true_conflict: bool,
    pub confidence: f64,
    pub plan: ControlPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub strategy: String,
    pub n_cases: usize,
    pub n_predicted_conflicts: usize,
    pub n_filtered_by_confidence: usize,
    pub n_acted_on: usize,
    pub n_averted: usize,
    /// `n_averted / n_acted_on`; 1.0 with `no_action_needed` when nothing
    /// was acted on.
    pub averted_fraction: f64,
    pub no_action_needed: bool,
    /// Acted-on cases that are recorded disputes, and how many were averted.
    pub n_true_conflicts_acted_on: usize,
    pub n_true_conflicts_averted: usize,
    pub n_false_conflicts_acted_on: usize,
    pub cases: Vec<CaseResult>,
}

/// Acts on every confident predicted dispute in `test`. Case `k` anneals
/// with seed `derive_seed(config.sa.seed, [k])`.
pub fn control_campaign<P: Predictor + ?Sized>(
    predictor: &P,
    scaling: &ScalingParams,
    schema: &VariableSchema,
    test: &Dataset,
    strategy: Strategy,
    config: &ControlConfig,
) -> Result<CampaignReport, ControlError> {
    config.validate()?;
    let predictions = par::map_slice(&test.records, |r| predictor.predict(&scaling.apply(r)));
    let split = confidence_filter(&predictions, config.peace_threshold, config.confidence_min);
    let results = par::map_slice(&split.acted_on, |&k| {
        let mut cfg = config.clone();
        cfg.sa.seed = par::derive_seed(config.sa.seed, &[k as u64]);
        let r = &test.records[k];
        control_case(predictor, scaling, schema, r, strategy, &cfg).map(|plan| CaseResult {
            case_id: k,
            state_a: r.state_a.clone(),
            state_b: r.state_b.clone(),
            year: r.year,
            true_conflict: r.outcome.is_dispute(),
            confidence: predictions[k].confidence,
            plan,
        })
    });
    let cases = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let n_averted = cases.iter().filter(|c| c.plan.success()).count();
    let n_true = cases.iter().filter(|c| c.true_conflict).count();
    let n_true_averted = cases.iter().filter(|c| c.true_conflict && c.plan.success()).count();
    let n_acted_on = cases.len();
    Ok(CampaignReport {
        strategy: strategy.label(),
        n_cases: test.len(),
        n_predicted_conflicts: split.acted_on.len() + split.skipped.len(),
        n_filtered_by_confidence: split.skipped.len(),
        n_acted_on,
        n_averted,
        averted_fraction: if n_acted_on == 0 { 1.0 } else { n_averted as f64 / n_acted_on as f64 },
        no_action_needed: n_acted_on == 0,
        n_true_conflicts_acted_on: n_true,
        n_true_conflicts_averted: n_true_averted,
        n_false_conflicts_acted_on: n_acted_on - n_true,
        cases,
    })
}

/// Per-case rows:
/// `case_id,strategy,prob_before,prob_after,success,confidence` followed by
/// `<var>_orig,<var>_new` for each controlled variable.
pub fn campaign_csv(report: &CampaignReport, strategy: Strategy) -> String {
    let mut out = String::from("case_id,strategy,prob_before,prob_after,success,confidence");
    for v in strategy.variables() {
        out.push_str(&format!(",{0}_orig,{0}_new", v.name()));
    }
    out.push('\n');
    for c in &report.cases {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            c.case_id,
            report.strategy,
            c.plan.probability_before(),
            c.plan.probability_after(),
            c.plan.success(),
            c.confidence
        ));
        for ch in c.plan.changes() {
            out.push_str(&format!(",{},{}", ch.original_value, ch.proposed_value));
        }
        out.push('\n');
    }
    out
}

/// Averted fraction per strategy, for bar charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub n_predicted_conflicts: usize,
    pub n_acted_on: usize,
    pub n_averted: usize,
    pub averted_fraction: f64,
    pub no_action_needed: bool,
}

impl From<&CampaignReport> for StrategySummary {
    fn from(r: &CampaignReport) -> Self {
        StrategySummary {
            strategy: r.strategy.clone(),
            n_predicted_conflicts: r.n_predicted_conflicts,
            n_acted_on: r.n_acted_on,
            n_averted: r.n_averted,
            averted_fraction: r.averted_fraction,
            no_action_needed: r.no_action_needed,
        }
    }
}
