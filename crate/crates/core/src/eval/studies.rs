//! Retraining studies. Every row uses the same recipe and seed so differences
//! reflect the inputs, not the initialization.

use super::{auc_from_scores, roc, EvalError, RocCurve};
use crate::data::{Dataset, Variable, NUM_VARIABLES};
use crate::par;
use crate::pipeline::{train_model_on, TrainRecipe};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmissionRow {
    /// `None` for the all-inputs baseline.
    pub omitted: Option<Variable>,
    pub auc: Option<f64>,
    pub error: Option<String>,
}

impl OmissionRow {
    pub fn label(&self) -> &'static str {
        self.omitted.map_or("none", |v| v.name())
    }
}

fn test_auc(train: &Dataset, test: &Dataset, columns: &[usize], recipe: &TrainRecipe) -> Result<f64, String> {
    let model = train_model_on(train, columns, recipe).map_err(|e| e.to_string())?;
    auc_from_scores(&model.scores(&test.records), &test.labels()).map_err(|e| e.to_string())
}

/// Baseline row, then one row per input retrained without it. Failures are
/// recorded in the row.
pub fn omission_study(train: &Dataset, test: &Dataset, recipe: &TrainRecipe) -> Vec<OmissionRow> {
    par::map_indexed(NUM_VARIABLES + 1, |row| {
        let omitted = row.checked_sub(1).and_then(Variable::from_index);
        let columns: Vec<usize> = (0..NUM_VARIABLES).filter(|&c| Some(c) != row.checked_sub(1)).collect();
        let result = test_auc(train, test, &columns, recipe);
        OmissionRow {
            omitted,
            auc: result.as_ref().ok().copied(),
            error: result.err(),
        }
    })
}

/// `omitted,auc` rows; failed rows leave `auc` empty.
pub fn omission_csv(rows: &[OmissionRow]) -> String {
    let mut out = String::from("omitted,auc\n");
    for r in rows {
        let auc = r.auc.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{}\n", r.label(), auc));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetComparison {
    pub subset_a: Vec<Variable>,
    pub subset_b: Vec<Variable>,
    pub curve_a: RocCurve,
    pub curve_b: RocCurve,
    pub auc_a: f64,
    pub auc_b: f64,
}

/// Trains one model per input subset and returns both test ROC curves.
pub fn subset_compare(
    train: &Dataset,
    test: &Dataset,
    subset_a: &[Variable],
    subset_b: &[Variable],
    recipe: &TrainRecipe,
    n_thresholds: usize,
) -> Result<SubsetComparison, String> {
    if subset_a.is_empty() || subset_b.is_empty() {
        return Err("subsets must be non-empty".into());
    }
    let labels = test.labels();
    let curve = |subset: &[Variable]| -> Result<(RocCurve, f64), String> {
        let columns: Vec<usize> = subset.iter().map(|v| v.index()).collect();
        let model = train_model_on(train, &columns, recipe).map_err(|e| e.to_string())?;
        let scores = model.scores(&test.records);
        let exact = auc_from_scores(&scores, &labels).map_err(|e: EvalError| e.to_string())?;
        Ok((roc(&scores, &labels, n_thresholds).map_err(|e| e.to_string())?, exact))
    };
    let (curve_a, auc_a) = curve(subset_a)?;
    let (curve_b, auc_b) = curve(subset_b)?;
    Ok(SubsetComparison {
        subset_a: subset_a.to_vec(),
        subset_b: subset_b.to_vec(),
        curve_a,
        curve_b,
        auc_a,
        auc_b,
    })
}
