use super::{DataError, Dataset, DyadYearRecord, NUM_VARIABLES};
use serde::{Deserialize, Serialize};

/// Per-variable min-max bounds fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ScalingParams {
    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }

    /// Maps a raw value of variable `i` into [0, 1], clamping values outside
    /// the fitted range.
    pub fn scale_value(&self, i: usize, x: f64) -> f64 {
        ((x - self.low[i]) / (self.high[i] - self.low[i])).clamp(0.0, 1.0)
    }

    pub fn unscale_value(&self, i: usize, v: f64) -> f64 {
        self.low[i] + v * (self.high[i] - self.low[i])
    }

    pub fn scale(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, &x)| self.scale_value(i, x))
            .collect()
    }

    pub fn unscale(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .enumerate()
            .map(|(i, &v)| self.unscale_value(i, v))
            .collect()
    }

    pub fn apply(&self, record: &DyadYearRecord) -> [f64; NUM_VARIABLES] {
        let mut out = [0.0; NUM_VARIABLES];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.scale_value(i, record.values[i]);
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.low.len() == self.high.len()
            && self
                .low
                .iter()
                .zip(&self.high)
                .all(|(l, h)| l.is_finite() && h.is_finite() && h > l)
    }
}

/// Fits min-max bounds per variable. A constant variable gets
/// `high = low + 1` so scaling stays defined.
pub fn fit_scaling(train: &Dataset) -> Result<ScalingParams, DataError> {
    if train.is_empty() {
        return Err(DataError::Empty);
    }
    let mut low = vec![f64::INFINITY; NUM_VARIABLES];
    let mut high = vec![f64::NEG_INFINITY; NUM_VARIABLES];
    for r in &train.records {
        for (i, &x) in r.values.iter().enumerate() {
            low[i] = low[i].min(x);
            high[i] = high[i].max(x);
        }
    }
    for (l, h) in low.iter().zip(high.iter_mut()) {
        if *h <= *l {
            *h = *l + 1.0;
        }
    }
    Ok(ScalingParams { low, high })
}
