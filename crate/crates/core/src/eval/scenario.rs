use crate::data::{PeaceOrientation, ScalingParams, VariableSchema, NUM_VARIABLES};
use crate::model::Predictor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Peace,
    Conflict,
}

impl Verdict {
    /// Conflict iff `probability > threshold`.
    pub fn from_probability(probability: f64, threshold: f64) -> Verdict {
        if probability > threshold {
            Verdict::Conflict
        } else {
            Verdict::Peace
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Peace => "peace",
            Verdict::Conflict => "conflict",
        }
    }
}

/// One corner of the input space. `peace_coordinates` are 0 at a variable's
/// conflict-favoring end and 1 at its peace-favoring end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub label: String,
    pub peace_coordinates: [f64; NUM_VARIABLES],
    pub raw_values: [f64; NUM_VARIABLES],
    pub probability: f64,
    pub verdict: Verdict,
}

fn corners(schema: &VariableSchema) -> Vec<(String, [f64; NUM_VARIABLES])> {
    let mut out = vec![
        ("all_min".to_string(), [0.0; NUM_VARIABLES]),
        ("all_max".to_string(), [1.0; NUM_VARIABLES]),
    ];
    for spec in schema.specs() {
        let mut u = [0.0; NUM_VARIABLES];
        u[spec.variable.index()] = 1.0;
        out.push((format!("{}_max_rest_min", spec.variable.name()), u));
    }
    for spec in schema.specs() {
        let mut u = [1.0; NUM_VARIABLES];
        u[spec.variable.index()] = 0.0;
        out.push((format!("{}_min_rest_max", spec.variable.name()), u));
    }
    out
}

/// Evaluates the 16 corner scenarios: all variables at their peace minimum,
/// all at their peace maximum, and each variable alone at one end with the
/// rest at the other. Corners are the ends of the scaled training range.
pub fn scenario_sweep<P: Predictor + ?Sized>(
    predictor: &P,
    scaling: &ScalingParams,
    schema: &VariableSchema,
) -> Vec<ScenarioOutcome> {
    corners(schema)
        .into_iter()
        .map(|(label, u)| {
            let mut scaled = [0.0; NUM_VARIABLES];
            for (i, spec) in schema.specs().iter().enumerate() {
                scaled[i] = match spec.peace_orientation {
                    PeaceOrientation::HighValueFavorsPeace => u[i],
                    PeaceOrientation::LowValueFavorsPeace => 1.0 - u[i],
                };
            }
            let raw = scaling.unscale(&scaled);
            let probability = predictor.predict(&scaled).probability;
            ScenarioOutcome {
                label,
                peace_coordinates: u,
                raw_values: raw.try_into().expect("schema width"),
                probability,
                verdict: Verdict::from_probability(probability, 0.5),
            }
        })
        .collect()
}

/// `scenario,probability,verdict` rows.
pub fn scenario_csv(outcomes: &[ScenarioOutcome]) -> String {
    let mut out = String::from("scenario,probability,verdict\n");
    for o in outcomes {
        out.push_str(&format!("{},{},{}\n", o.label, o.probability, o.verdict.name()));
    }
    out
}
