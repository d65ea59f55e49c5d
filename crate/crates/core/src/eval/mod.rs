//! Confusion matrices, ROC curves and AUC in accuracy-versus-accuracy axes,
//! corner-scenario sweeps and retraining studies.
//!
//! ROC points are `(dispute_acc, peace_acc)`: the fraction of disputes scored
//! above the threshold and the fraction of non-disputes scored at or below it.
//! The conventional `(FPR, TPR)` point is `(1 - peace_acc, dispute_acc)`.

mod scenario;
mod studies;

pub use scenario::{scenario_csv, scenario_sweep, ScenarioOutcome, Verdict};
pub use studies::{omission_csv, omission_study, subset_compare, OmissionRow, SubsetComparison};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("both classes are required")]
    SingleClass,
    #[error("class total is zero")]
    ZeroClassTotal,
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("n_thresholds must be at least 1")]
    NoThresholds,
    #[error("score {0} is not finite")]
    NonFiniteScore(usize),
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    Ok(())
}

/// Counts labelled TC (true conflict), FP (false peace: dispute predicted as
/// peace), TP (true peace), FC (false conflict).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tc: usize,
    pub fp: usize,
    pub tp: usize,
    pub fc: usize,
    pub threshold: f64,
}

impl ConfusionMatrix {
    pub fn disputes(&self) -> usize {
        self.tc + self.fp
    }

    pub fn peace(&self) -> usize {
        self.tp + self.fc
    }

    pub fn total(&self) -> usize {
        self.disputes() + self.peace()
    }
}

/// A case is predicted conflict iff its score is strictly above `threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionMatrix, EvalError> {
    check(scores, labels)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(EvalError::InvalidThreshold(threshold));
    }
    let mut m = ConfusionMatrix {
        tc: 0,
        fp: 0,
        tp: 0,
        fc: 0,
        threshold,
    };
    for (&s, &dispute) in scores.iter().zip(labels) {
        match (dispute, s > threshold) {
            (true, true) => m.tc += 1,
            (true, false) => m.fp += 1,
            (false, false) => m.tp += 1,
            (false, true) => m.fc += 1,
        }
    }
    Ok(m)
}

/// `(TC / disputes, TP / non-disputes)`.
pub fn true_rates(m: &ConfusionMatrix) -> Result<(f64, f64), EvalError> {
    if m.disputes() == 0 || m.peace() == 0 {
        return Err(EvalError::ZeroClassTotal);
    }
    Ok((m.tc as f64 / m.disputes() as f64, m.tp as f64 / m.peace() as f64))
}

mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    /// The lowest endpoint's threshold is negative infinity, written as null.
    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_f64(*t)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub dispute_acc: f64,
    pub peace_acc: f64,
}

/// Points in ascending threshold order, from `(1, 0)` at negative infinity to
/// `(0, 1)` at the largest score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// Sweeps thresholds over the sorted unique scores. With more than
/// `n_thresholds` unique scores, evenly spaced quantiles of them are used; the
/// largest score is always kept.
pub fn roc(scores: &[f64], labels: &[bool], n_thresholds: usize) -> Result<RocCurve, EvalError> {
    check(scores, labels)?;
    if n_thresholds == 0 {
        return Err(EvalError::NoThresholds);
    }
    let mut pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let mut neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::SingleClass);
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut unique: Vec<f64> = scores.to_vec();
    unique.sort_by(f64::total_cmp);
    unique.dedup();

    let thresholds: Vec<f64> = if unique.len() <= n_thresholds {
        unique
    } else if n_thresholds == 1 {
        vec![*unique.last().unwrap()]
    } else {
        let last = unique.len() - 1;
        let mut picked: Vec<f64> = (0..n_thresholds)
            .map(|q| unique[(q * last + (n_thresholds - 1) / 2) / (n_thresholds - 1)])
            .collect();
        picked.dedup();
        picked
    };

    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let point = |t: f64| RocPoint {
        threshold: t,
        dispute_acc: (pos.len() - pos.partition_point(|&s| s <= t)) as f64 / np,
        peace_acc: neg.partition_point(|&s| s <= t) as f64 / nn,
    };
    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        dispute_acc: 1.0,
        peace_acc: 0.0,
    });
    points.extend(thresholds.into_iter().map(point));
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve in its own axes.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|p| (p[0].dispute_acc - p[1].dispute_acc) * (p[0].peace_acc + p[1].peace_acc) / 2.0)
        .sum()
}

/// AUC over every unique score as a threshold.
pub fn auc_from_scores(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    Ok(auc(&roc(scores, labels, usize::MAX)?))
}

/// `threshold,dispute_acc,peace_acc` rows in ascending threshold order.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,dispute_acc,peace_acc\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.dispute_acc, p.peace_acc));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_scores() {
        let scores = [1.0, 1.0, 0.0, 0.0, 0.0];
        let labels = [true, true, false, false, false];
        let m = confusion(&scores, &labels, 0.5).unwrap();
        assert_eq!((m.tc, m.fp, m.tp, m.fc), (2, 0, 3, 0));
        assert_eq!(true_rates(&m).unwrap(), (1.0, 1.0));
        let c = roc(&scores, &labels, 100).unwrap();
        assert!(c.points.iter().any(|p| p.dispute_acc == 1.0 && p.peace_acc == 1.0));
        assert_eq!(auc(&c), 1.0);
    }

    #[test]
    fn all_zero_scores() {
        let labels = [true, false, false, true, false];
        let m = confusion(&[0.0; 5], &labels, 0.5).unwrap();
        assert_eq!((m.tc, m.fp, m.tp, m.fc), (0, 2, 3, 0));
    }

    #[test]
    fn table_rates() {
        let hmc = ConfusionMatrix {
            tc: 286,
            fp: 106,
            tp: 19494,
            fc: 6851,
            threshold: 0.5,
        };
        let (tpr, tnr) = true_rates(&hmc).unwrap();
        assert!((tpr - 0.73).abs() < 0.005 && (tnr - 0.74).abs() < 0.005);
        assert_eq!(hmc.disputes(), 392);
        assert_eq!(hmc.peace(), 26_345);
    }

    #[test]
    fn tie_at_threshold_is_peace() {
        let m = confusion(&[0.5, 0.5], &[true, false], 0.5).unwrap();
        assert_eq!((m.tc, m.fp, m.tp, m.fc), (0, 1, 1, 0));
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0.1], &[true, false], 0.5), Err(EvalError::LengthMismatch { .. })));
        assert_eq!(confusion(&[0.1], &[true], 1.0).unwrap_err(), EvalError::InvalidThreshold(1.0));
        assert_eq!(roc(&[0.1, 0.2], &[true, true], 10).unwrap_err(), EvalError::SingleClass);
        let empty = ConfusionMatrix {
            tc: 0,
            fp: 0,
            tp: 1,
            fc: 0,
            threshold: 0.5,
        };
        assert_eq!(true_rates(&empty).unwrap_err(), EvalError::ZeroClassTotal);
    }

    #[test]
    fn constant_scores_give_endpoints_only() {
        let c = roc(&[0.3; 6], &[true, false, true, false, false, true], 50).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!((c.points[0].dispute_acc, c.points[0].peace_acc), (1.0, 0.0));
        assert_eq!((c.points[1].dispute_acc, c.points[1].peace_acc), (0.0, 1.0));
        assert_eq!(auc(&c), 0.5);
    }

    #[test]
    fn capped_thresholds_keep_endpoints() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let labels: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
        let c = roc(&scores, &labels, 20).unwrap();
        assert_eq!(c.points.len(), 21);
        let last = c.points.last().unwrap();
        assert_eq!((last.dispute_acc, last.peace_acc), (0.0, 1.0));
    }

    #[test]
    fn json_writes_null_for_lowest_threshold() {
        let c = roc(&[0.2, 0.8], &[false, true], 10).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"threshold\":null"));
        let back: RocCurve = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_rows_sorted() {
        let c = roc(&[0.2, 0.8, 0.5], &[false, true, true], 10).unwrap();
        let csv = roc_csv(&c);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "threshold,dispute_acc,peace_acc");
        assert!(lines[1].starts_with("-inf,1,0"));
        assert_eq!(lines.len(), 5);
    }

    proptest! {
        #[test]
        fn confusion_partitions_cases(
            data in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 0..200),
            t in 0.01f64..0.99,
        ) {
            let (s, l): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
            let m = confusion(&s, &l, t).unwrap();
            prop_assert_eq!(m.total(), s.len());
            prop_assert_eq!(m.disputes(), l.iter().filter(|&&x| x).count());
        }

        #[test]
        fn roc_is_monotone(
            data in proptest::collection::vec((0u8..20, any::<bool>()), 2..200),
            cap in 1usize..40,
        ) {
            let s: Vec<f64> = data.iter().map(|d| d.0 as f64 / 20.0).collect();
            let l: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            let c = roc(&s, &l, cap).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[1].threshold > w[0].threshold);
                prop_assert!(w[1].dispute_acc <= w[0].dispute_acc);
                prop_assert!(w[1].peace_acc >= w[0].peace_acc);
            }
            let a = auc(&c);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
