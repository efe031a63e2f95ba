//! Predictive performance and group fairness metrics.
//!
//! Group `A = 1` is the sensitive group; signed disparities are
//! "sensitive minus non-sensitive".

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("group A={0} is empty")]
    EmptyGroup(u8),
    #[error("group A={group} has no rows with label {label}, so its rate is undefined")]
    UndefinedRate { group: u8, label: u8 },
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("no rows to evaluate")]
    Empty,
}

fn check_len(a: usize, b: usize) -> Result<(), MetricError> {
    if a == b {
        Ok(())
    } else {
        Err(MetricError::Length(a, b))
    }
}

fn group_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Mean score over `A = 1` minus mean score over `A = 0`.
pub fn statistical_disparity(scores: &[f64], a: &[bool]) -> Result<f64, MetricError> {
    check_len(scores.len(), a.len())?;
    let m1 = group_mean(scores.iter().zip(a).filter(|(_, &g)| g).map(|(s, _)| *s)).ok_or(MetricError::EmptyGroup(1))?;
    let m0 = group_mean(scores.iter().zip(a).filter(|(_, &g)| !g).map(|(s, _)| *s)).ok_or(MetricError::EmptyGroup(0))?;
    Ok(m1 - m0)
}

/// Disparity of hard decisions.
pub fn decision_disparity(decisions: &[bool], a: &[bool]) -> Result<f64, MetricError> {
    let s: Vec<f64> = decisions.iter().map(|&d| if d { 1.0 } else { 0.0 }).collect();
    statistical_disparity(&s, a)
}

fn rate(pred: &[bool], labels: &[bool], a: &[bool], group: bool, label: bool) -> Result<f64, MetricError> {
    let vals = pred
        .iter()
        .zip(labels)
        .zip(a)
        .filter(|((_, &y), &g)| g == group && y == label)
        .map(|((&p, _), _)| if p { 1.0 } else { 0.0 });
    group_mean(vals).ok_or(MetricError::UndefinedRate {
        group: group.into(),
        label: label.into(),
    })
}

/// `max(|TPR1 - TPR0|, |FPR1 - FPR0|)`.
pub fn equalized_odds_gap(pred: &[bool], labels: &[bool], a: &[bool]) -> Result<f64, MetricError> {
    check_len(pred.len(), labels.len())?;
    check_len(pred.len(), a.len())?;
    let tpr = (rate(pred, labels, a, true, true)? - rate(pred, labels, a, false, true)?).abs();
    let fpr = (rate(pred, labels, a, true, false)? - rate(pred, labels, a, false, false)?).abs();
    Ok(tpr.max(fpr))
}

/// Accuracy and F1 of the positive class. F1 is 0 when there are no true positives.
pub fn accuracy_f1(pred: &[bool], labels: &[bool]) -> (f64, f64) {
    assert_eq!(pred.len(), labels.len(), "one prediction per label");
    assert!(!pred.is_empty(), "accuracy of an empty sample");
    let (mut tp, mut fp, mut fne, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in pred.iter().zip(labels) {
        match (p, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => tn += 1,
        }
    }
    let acc = (tp + tn) as f64 / pred.len() as f64;
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fne) as f64
    };
    (acc, f1)
}

/// Decision rule turning scores into hard labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Thresholds {
    Global(f64),
    /// Thresholds for `A = 1` and `A = 0`.
    PerGroup { sensitive: f64, other: f64 },
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Global(0.5)
    }
}

impl Thresholds {
    pub fn for_group(&self, a: bool) -> f64 {
        match *self {
            Thresholds::Global(t) => t,
            Thresholds::PerGroup { sensitive, other } => {
                if a {
                    sensitive
                } else {
                    other
                }
            }
        }
    }

    /// Positive iff score >= threshold.
    pub fn apply(&self, scores: &[f64], a: &[bool]) -> Vec<bool> {
        scores.iter().zip(a).map(|(&s, &g)| s >= self.for_group(g)).collect()
    }
}

/// All metrics for one evaluated model. Group-indexed fields are `_1` for
/// `A = 1` and `_0` for `A = 0`; rates with an empty conditioning cell are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub disparity: f64,
    pub hard_disparity: f64,
    pub eo_gap: f64,
    pub pos_rate_1: f64,
    pub pos_rate_0: f64,
    pub tpr_1: f64,
    pub tpr_0: f64,
    pub fpr_1: f64,
    pub fpr_0: f64,
    pub n_1: usize,
    pub n_0: usize,
}

/// Scores `scores` against `labels`, with hard decisions from `thresholds`.
pub fn evaluate(scores: &[f64], labels: &[bool], a: &[bool], thresholds: Thresholds) -> Result<EvalReport, MetricError> {
    check_len(scores.len(), labels.len())?;
    check_len(scores.len(), a.len())?;
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    let pred = thresholds.apply(scores, a);
    let (accuracy, f1) = accuracy_f1(&pred, labels);
    let disparity = statistical_disparity(scores, a)?;
    let hard_disparity = decision_disparity(&pred, a)?;
    let r = |g, y| rate(&pred, labels, a, g, y).unwrap_or(f64::NAN);
    let pos = |g: bool| {
        group_mean(pred.iter().zip(a).filter(|(_, &x)| x == g).map(|(&p, _)| if p { 1.0 } else { 0.0 })).unwrap_or(f64::NAN)
    };
    Ok(EvalReport {
        n: scores.len(),
        accuracy,
        f1,
        disparity,
        hard_disparity,
        eo_gap: equalized_odds_gap(&pred, labels, a).unwrap_or(f64::NAN),
        pos_rate_1: pos(true),
        pos_rate_0: pos(false),
        tpr_1: r(true, true),
        tpr_0: r(false, true),
        fpr_1: r(true, false),
        fpr_0: r(false, false),
        n_1: a.iter().filter(|&&g| g).count(),
        n_0: a.iter().filter(|&&g| !g).count(),
    })
}
