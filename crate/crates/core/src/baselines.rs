//! Comparison methods: plain training on observed or unbiased data, dropping the
//! sensitive attribute, massaging labels, and group thresholds for parity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::View;
use crate::fairness::{self, EvalReport, MetricError, Thresholds};
use crate::net::{train, LabelledRows, Mlp, NetError, TrainConfig, TrainError, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Lower,
    Upper,
    Unawareness,
    Massaging,
    ErrorParity,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Lower,
        BaselineKind::Upper,
        BaselineKind::Unawareness,
        BaselineKind::Massaging,
        BaselineKind::ErrorParity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Lower => "lower",
            BaselineKind::Upper => "upper",
            BaselineKind::Unawareness => "unawareness",
            BaselineKind::Massaging => "massaging",
            BaselineKind::ErrorParity => "error_parity",
        }
    }
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// A trained classifier and the rule turning its scores into decisions.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub mlp: Mlp,
    pub with_sensitive: bool,
    pub thresholds: Thresholds,
    pub report: TrainReport,
}

impl Fitted {
    pub fn scores(&self, view: &View) -> Result<Vec<f64>, NetError> {
        Ok(self.mlp.predict(view.matrix(self.with_sensitive).view())?.to_vec())
    }

    pub fn evaluate(&self, view: &View) -> Result<EvalReport, BaselineError> {
        let s = self.scores(view)?;
        Ok(fairness::evaluate(&s, &view.labels, &view.group(), self.thresholds)?)
    }
}

/// Plain supervised training on `view`.
pub fn fit_classifier(view: &View, with_sensitive: bool, config: &TrainConfig) -> Result<Fitted, BaselineError> {
    let x = view.matrix(with_sensitive);
    let mut mlp = config.init_network(x.ncols());
    let data = LabelledRows::new(x, view.labels.clone());
    let report = train(&mut mlp, &data, config)?;
    Ok(Fitted {
        mlp,
        with_sensitive,
        thresholds: Thresholds::default(),
        report,
    })
}

/// Trains baseline `kind`. `observed` is the biased training view and
/// `unbiased` its unbiased counterpart (used by the upper baseline only).
pub fn run_baseline(
    kind: BaselineKind,
    observed: &View,
    unbiased: &View,
    config: &TrainConfig,
) -> Result<Fitted, BaselineError> {
    match kind {
        BaselineKind::Lower => fit_classifier(observed, true, config),
        BaselineKind::Upper => fit_classifier(unbiased, true, config),
        BaselineKind::Unawareness => fit_classifier(observed, false, config),
        BaselineKind::Massaging => {
            let (relabeled, m) = massage(observed, config)?;
            log::debug!("massaging swapped {} label pairs", m.applied);
            fit_classifier(&relabeled, true, config)
        }
        BaselineKind::ErrorParity => {
            let mut fitted = fit_classifier(observed, true, config)?;
            let val = &fitted.report.val_indices;
            let sub = subset(observed, val);
            let scores = fitted.scores(&sub)?;
            fitted.thresholds = error_parity_postprocess(&scores, &sub.labels, &sub.group())?;
            Ok(fitted)
        }
    }
}

fn subset(view: &View, rows: &[usize]) -> View {
    View {
        sensitive: rows.iter().map(|&r| view.sensitive[r].clone()).collect(),
        features: rows.iter().map(|&r| view.features[r].clone()).collect(),
        labels: rows.iter().map(|&r| view.labels[r]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MassageOutcome {
    /// Swaps needed for equal positive rates.
    pub required: usize,
    /// Swaps performed (fewer if candidates ran out).
    pub applied: usize,
}

/// Number of promotions (and demotions) that equalise the positive rates of
/// two groups, and whether the first group is the one to promote.
pub fn massage_count(n1: usize, pos1: usize, n0: usize, pos0: usize) -> (usize, bool) {
    let gap = pos0 as f64 * n1 as f64 - pos1 as f64 * n0 as f64;
    let m = (gap.abs() / (n1 + n0) as f64).round() as usize;
    (m, gap >= 0.0)
}

/// Swaps labels so both groups get (nearly) the same positive rate, using a
/// classifier fitted on the view to pick the rows closest to the boundary.
pub fn massage(view: &View, config: &TrainConfig) -> Result<(View, MassageOutcome), BaselineError> {
    let a = view.group();
    let n1 = a.iter().filter(|&&g| g).count();
    let n0 = a.len() - n1;
    if n1 == 0 {
        return Err(MetricError::EmptyGroup(1).into());
    }
    if n0 == 0 {
        return Err(MetricError::EmptyGroup(0).into());
    }
    let pos = |g: bool| a.iter().zip(&view.labels).filter(|(&x, &y)| x == g && y).count();
    let (required, promote_sensitive) = massage_count(n1, pos(true), n0, pos(false));
    let mut out = view.clone();
    if required == 0 {
        return Ok((out, MassageOutcome { required, applied: 0 }));
    }
    let ranker = fit_classifier(view, true, config)?;
    let scores = ranker.scores(view)?;
    let mut promote: Vec<usize> = (0..a.len()).filter(|&r| a[r] == promote_sensitive && !view.labels[r]).collect();
    let mut demote: Vec<usize> = (0..a.len()).filter(|&r| a[r] != promote_sensitive && view.labels[r]).collect();
    promote.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]));
    demote.sort_by(|&x, &y| scores[x].total_cmp(&scores[y]));
    let applied = required.min(promote.len()).min(demote.len());
    if applied < required {
        log::warn!("massaging needs {required} swaps but only {applied} candidates exist");
    }
    for &r in &promote[..applied] {
        out.labels[r] = true;
    }
    for &r in &demote[..applied] {
        out.labels[r] = false;
    }
    Ok((out, MassageOutcome { required, applied }))
}

/// Candidate decisions for one group: for each achievable number of positives
/// `k` (top-k by score), the threshold and the correct-decision count.
fn group_candidates(scores: &[f64], labels: &[bool]) -> Vec<(usize, f64, usize)> {
    let mut rows: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    rows.sort_by(|x, y| y.0.total_cmp(&x.0));
    let n = rows.len();
    let negatives = labels.iter().filter(|&&y| !y).count();
    let mut out = vec![(0, rows[0].0 + 1.0, negatives)];
    let mut correct = negatives;
    for k in 1..=n {
        correct = if rows[k - 1].1 { correct + 1 } else { correct - 1 };
        if k == n {
            out.push((n, rows[n - 1].0, correct));
        } else if rows[k].0 < rows[k - 1].0 {
            out.push((k, 0.5 * (rows[k].0 + rows[k - 1].0), correct));
        }
    }
    out
}

/// Per-group thresholds whose positive rates differ by at most 1/min(group
/// size) on the calibration rows, choosing the most accurate such pair.
pub fn error_parity_postprocess(scores: &[f64], labels: &[bool], a: &[bool]) -> Result<Thresholds, MetricError> {
    if scores.len() != a.len() || labels.len() != a.len() {
        return Err(MetricError::Length(scores.len(), a.len()));
    }
    let split = |g: bool| -> (Vec<f64>, Vec<bool>) {
        (0..a.len()).filter(|&r| a[r] == g).map(|r| (scores[r], labels[r])).unzip()
    };
    let (s1, y1) = split(true);
    let (s0, y0) = split(false);
    if s1.is_empty() {
        return Err(MetricError::EmptyGroup(1));
    }
    if s0.is_empty() {
        return Err(MetricError::EmptyGroup(0));
    }
    if scores.iter().all(|&s| s == scores[0]) {
        log::warn!("all calibration scores are equal; using one global threshold");
        return Ok(Thresholds::Global(0.5));
    }
    let (n1, n0) = (s1.len() as f64, s0.len() as f64);
    let tol = 1.0 / n1.min(n0);
    let c1 = group_candidates(&s1, &y1);
    let c0 = group_candidates(&s0, &y0);
    // (correct, -gap) maximised over feasible pairs; fallback: smallest gap
    let mut best: Option<(usize, f64, f64, f64)> = None;
    let mut closest: Option<(f64, f64, f64)> = None;
    for &(k1, t1, ok1) in &c1 {
        for &(k0, t0, ok0) in &c0 {
            let gap = (k1 as f64 / n1 - k0 as f64 / n0).abs();
            if closest.is_none_or(|(g, _, _)| gap < g) {
                closest = Some((gap, t1, t0));
            }
            if gap <= tol + 1e-12 {
                let correct = ok1 + ok0;
                let better = match best {
                    None => true,
                    Some((c, g, _, _)) => correct > c || (correct == c && gap < g),
                };
                if better {
                    best = Some((correct, gap, t1, t0));
                }
            }
        }
    }
    let (t1, t0) = match best {
        Some((_, _, t1, t0)) => (t1, t0),
        None => {
            let (gap, t1, t0) = closest.expect("candidates are never empty");
            log::warn!("no threshold pair reaches parity within {tol}; closest has gap {gap}");
            (t1, t0)
        }
    };
    Ok(Thresholds::PerGroup { sensitive: t1, other: t0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn massage_count_examples() {
        assert_eq!(massage_count(100, 40, 100, 60), (10, true));
        assert_eq!(massage_count(100, 50, 100, 50).0, 0);
        assert_eq!(massage_count(100, 60, 100, 40), (10, false));
    }

    #[test]
    fn shifted_scores_shift_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut a = Vec::new();
        for _ in 0..400 {
            let s: f64 = rng.random_range(0.3..1.0);
            let y = rng.random::<f64>() < s;
            scores.push(s);
            labels.push(y);
            a.push(false);
            scores.push(s - 0.2);
            labels.push(y);
            a.push(true);
        }
        let t = error_parity_postprocess(&scores, &labels, &a).unwrap();
        let (t1, t0) = (t.for_group(true), t.for_group(false));
        assert!((t1 - (t0 - 0.2)).abs() < 0.01, "{t1} vs {t0}");
        let d = fairness::decision_disparity(&t.apply(&scores, &a), &a).unwrap();
        assert!(d.abs() <= 1.0 / 400.0 + 1e-12);
    }

    #[test]
    fn constant_scores_fall_back() {
        let t = error_parity_postprocess(&[0.4; 4], &[true, false, true, false], &[true, true, false, false]).unwrap();
        assert_eq!(t, Thresholds::Global(0.5));
    }

    #[test]
    fn candidates_count_correct_decisions() {
        let c = group_candidates(&[0.9, 0.5, 0.5, 0.1], &[true, false, true, false]);
        let ks: Vec<usize> = c.iter().map(|x| x.0).collect();
        assert_eq!(ks, vec![0, 1, 3, 4]);
        assert_eq!(c[1].2, 3);
        assert_eq!(c[2].2, 3);
        assert_eq!(c[3].1, 0.1);
    }
}
