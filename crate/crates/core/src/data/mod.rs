//! Dyad-year records, dataset ingestion, splitting, scaling and synthetic data.

mod csv_io;
mod scaling;
mod schema;
mod split;
mod synth;

pub use csv_io::{dataset_to_csv, parse_dataset, CSV_ID_COLUMNS};
pub use scaling::{fit_scaling, ScalingParams};
pub use schema::{
    PeaceOrientation, Variable, VariableKind, VariableSchema, VariableSpec, NUM_VARIABLES,
};
pub use split::{balanced_split, Split};
pub use synth::{synth_generate, SynthConfig, SynthProvenance};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: {variable} = {value} is outside its domain [{min}, {max}]")]
    OutOfDomain {
        line: u64,
        variable: Variable,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("insufficient {class} records: requested {requested}, available {available}")]
    InsufficientClass {
        class: Outcome,
        requested: usize,
        available: usize,
    },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// Binary outcome of a dyad-year: whether a militarized dispute began.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Outcome {
    Peace,
    Dispute,
}

impl Outcome {
    pub fn is_dispute(self) -> bool {
        self == Outcome::Dispute
    }

    pub fn target(self) -> f64 {
        match self {
            Outcome::Peace => 0.0,
            Outcome::Dispute => 1.0,
        }
    }
}

impl From<Outcome> for u8 {
    fn from(o: Outcome) -> u8 {
        o.is_dispute() as u8
    }
}

impl TryFrom<u8> for Outcome {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Outcome::Peace),
            1 => Ok(Outcome::Dispute),
            _ => Err(format!("outcome must be 0 or 1, got {v}")),
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Peace => "non-dispute",
            Outcome::Dispute => "dispute",
        })
    }
}

/// One dyad-year observation. `values` follow the schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadYearRecord {
    pub state_a: String,
    pub state_b: String,
    pub year: i32,
    pub values: [f64; NUM_VARIABLES],
    pub outcome: Outcome,
}

impl DyadYearRecord {
    pub fn value(&self, v: Variable) -> f64 {
        self.values[v.index()]
    }

    /// Returns the first variable whose value falls outside its domain.
    pub fn first_violation(&self, schema: &VariableSchema) -> Option<(Variable, f64)> {
        schema
            .specs()
            .iter()
            .find(|s| !s.contains(self.values[s.variable.index()]))
            .map(|s| (s.variable, self.values[s.variable.index()]))
    }
}

/// Validation failure for one named input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Builds an unlabelled case from raw values keyed by variable name or label.
/// Every missing, unknown, duplicated or out-of-domain field is reported. The
/// outcome is set to peace and plays no part in prediction or control.
pub fn case_from_values(
    schema: &VariableSchema,
    values: &std::collections::BTreeMap<String, f64>,
) -> Result<DyadYearRecord, Vec<FieldError>> {
    let mut out = [f64::NAN; NUM_VARIABLES];
    let mut errors = Vec::new();
    for (key, &value) in values {
        let Some(v) = Variable::parse(key) else {
            errors.push(FieldError {
                field: key.clone(),
                message: "unknown variable".into(),
            });
            continue;
        };
        let spec = schema.spec(v);
        if !out[v.index()].is_nan() {
            errors.push(FieldError {
                field: v.name().into(),
                message: "given more than once".into(),
            });
        } else if !spec.contains(value) {
            errors.push(FieldError {
                field: v.name().into(),
                message: match spec.kind {
                    VariableKind::Binary => format!("{v} = {value} must be 0 or 1"),
                    _ => format!("{v} = {value} is outside [{}, {}]", spec.domain_min, spec.domain_max),
                },
            });
        }
        out[v.index()] = value;
    }
    for v in Variable::ALL {
        if out[v.index()].is_nan() {
            errors.push(FieldError {
                field: v.name().into(),
                message: "missing".into(),
            });
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(DyadYearRecord {
        state_a: String::new(),
        state_b: String::new(),
        year: 0,
        values: out,
        outcome: Outcome::Peace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: VariableSchema,
    pub records: Vec<DyadYearRecord>,
    pub provenance: String,
}

impl Dataset {
    /// Builds a dataset after validating every record.
    pub fn new(
        schema: VariableSchema,
        records: Vec<DyadYearRecord>,
        provenance: impl Into<String>,
    ) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, r) in records.iter().enumerate() {
            if let Some((variable, value)) = r.first_violation(&schema) {
                let spec = schema.spec(variable);
                return Err(DataError::OutOfDomain {
                    line: i as u64 + 2,
                    variable,
                    value,
                    min: spec.domain_min,
                    max: spec.domain_max,
                });
            }
        }
        Ok(Dataset {
            schema,
            records,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (disputes, non-disputes)
    pub fn class_counts(&self) -> (usize, usize) {
        let d = self.records.iter().filter(|r| r.outcome.is_dispute()).count();
        (d, self.records.len() - d)
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.outcome.is_dispute()).collect()
    }
}
