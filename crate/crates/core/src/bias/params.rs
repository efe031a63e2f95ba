//! Bias parameters: derivation from generator settings, estimation from paired
//! data, and the sample-size bound for estimating them.

use serde::{Deserialize, Serialize};

use crate::logic::ParameterTable;

use super::templates::label_param_name;
use super::BiasError;

/// The four flip probabilities of one biased variable.
///
/// For label bias they run forward (fair → observed): `neg_*` is P(observed 0 | fair 1, A),
/// `pos_*` is P(observed 1 | fair 0, A). For measurement and historical bias they run in
/// reverse (observed → fair): `neg_*` is P(fair 1 | observed 0, A), `pos_*` is
/// P(fair 0 | observed 1, A). `*_sensitive` conditions on A=1, `*_other` on A=0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlipParams {
    pub neg_sensitive: f64,
    pub neg_other: f64,
    pub pos_sensitive: f64,
    pub pos_other: f64,
}

impl FlipParams {
    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Self {
        FlipParams {
            neg_sensitive: p1,
            neg_other: p2,
            pos_sensitive: p3,
            pos_other: p4,
        }
    }

    /// `[p1, p2, p3, p4]`.
    pub fn cells(&self) -> [f64; 4] {
        [self.neg_sensitive, self.neg_other, self.pos_sensitive, self.pos_other]
    }

    pub fn from_cells(c: [f64; 4]) -> Self {
        FlipParams::new(c[0], c[1], c[2], c[3])
    }

    pub fn validate(&self) -> Result<(), BiasError> {
        for (i, v) in self.cells().into_iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(BiasError::Probability { cell: i + 1, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    Label,
    Measurement,
    Historical,
}

/// Flip parameters of one biased variable with respect to one sensitive attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBias {
    /// `y` for the label, otherwise the 1-based feature index as text.
    pub target: String,
    pub sensitive: String,
    pub params: FlipParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub kind: BiasKind,
    pub targets: Vec<TargetBias>,
}

impl BiasSpec {
    /// Label bias with respect to one or more sensitive attributes, in chain order.
    pub fn label(stages: Vec<(String, FlipParams)>) -> Self {
        BiasSpec {
            kind: BiasKind::Label,
            targets: stages
                .into_iter()
                .map(|(sensitive, params)| TargetBias {
                    target: "y".into(),
                    sensitive,
                    params,
                })
                .collect(),
        }
    }

    /// Measurement or historical bias with one reverse-direction parameter set per feature.
    pub fn features(kind: BiasKind, per_feature: Vec<FlipParams>) -> Self {
        BiasSpec {
            kind,
            targets: per_feature
                .into_iter()
                .enumerate()
                .map(|(i, params)| TargetBias {
                    target: (i + 1).to_string(),
                    sensitive: "a".into(),
                    params,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), BiasError> {
        if self.targets.is_empty() {
            return Err(BiasError::InvalidSpec("no biased variables".into()));
        }
        for t in &self.targets {
            t.params.validate()?;
            let is_label = t.target == "y";
            match self.kind {
                BiasKind::Label if !is_label => {
                    return Err(BiasError::InvalidSpec(format!("label bias cannot affect `{}`", t.target)))
                }
                BiasKind::Measurement | BiasKind::Historical if t.target.parse::<usize>().map_or(true, |i| i == 0) => {
                    return Err(BiasError::InvalidSpec(format!("`{}` is not a feature index", t.target)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Sensitive attributes in chain order (label kind).
    pub fn sensitive(&self) -> Vec<&str> {
        self.targets.iter().map(|t| t.sensitive.as_str()).collect()
    }

    /// Parameter table matching the programs of [`super::templates`].
    pub fn parameter_table(&self) -> Result<ParameterTable, BiasError> {
        self.validate()?;
        let mut table = ParameterTable::new();
        match self.kind {
            BiasKind::Label => {
                let k = self.targets.len();
                for t in &self.targets {
                    for (c, v) in t.params.cells().into_iter().enumerate() {
                        table.set(label_param_name(c + 1, &t.sensitive, k), 0, v);
                    }
                }
            }
            BiasKind::Measurement | BiasKind::Historical => {
                for t in &self.targets {
                    let idx: i64 = t.target.parse().expect("validated");
                    for (c, v) in t.params.cells().into_iter().enumerate() {
                        table.set(format!("p{}", c + 1), idx, v);
                    }
                }
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Zero the positive-bias cells (p3, p4).
    NoPositiveBias,
    /// Zero the cells for the non-sensitive group (p2, p4).
    NoBiasOnNonsensitive,
}

/// Zeroes the parameter cells ruled out by `assumption`.
pub fn simplify(spec: &BiasSpec, assumption: Assumption) -> BiasSpec {
    let mut out = spec.clone();
    for t in &mut out.targets {
        match assumption {
            Assumption::NoPositiveBias => {
                t.params.pos_sensitive = 0.0;
                t.params.pos_other = 0.0;
            }
            Assumption::NoBiasOnNonsensitive => {
                t.params.neg_other = 0.0;
                t.params.pos_other = 0.0;
            }
        }
    }
    out
}

/// Flip probabilities of the channel `(V ∧ ¬B(β·A)) ⊕ B(noise)`.
pub fn derive_forward_label_params(beta: f64, noise: f64) -> FlipParams {
    FlipParams::new(beta + noise - 2.0 * beta * noise, noise, noise, noise)
}

/// Flip probabilities of the feature channel `(V ∧ ¬B(β·A)) ⊕ B(noise·A)`,
/// whose noise only reaches the sensitive group.
pub fn derive_forward_feature_params(beta: f64, noise: f64) -> FlipParams {
    FlipParams::new(beta + noise - 2.0 * beta * noise, 0.0, noise, 0.0)
}

/// `joint[v][ṽ]` = P(V=v, Ṽ=ṽ) within one group.
pub type Joint = [[f64; 2]; 2];

/// Joint table of one group from P(V=1) and the forward flips of that group.
pub fn joint_from_forward(marginal: f64, neg_flip: f64, pos_flip: f64) -> Joint {
    [
        [(1.0 - marginal) * (1.0 - pos_flip), (1.0 - marginal) * pos_flip],
        [marginal * neg_flip, marginal * (1.0 - neg_flip)],
    ]
}

/// (P(V=1 | Ṽ=0), P(V=0 | Ṽ=1)) of a joint table.
pub fn reverse_from_joint(joint: &Joint) -> Result<(f64, f64), BiasError> {
    let obs0 = joint[0][0] + joint[1][0];
    let obs1 = joint[0][1] + joint[1][1];
    if obs0 <= 0.0 || obs1 <= 0.0 {
        return Err(BiasError::Degenerate(format!(
            "observed value {} never occurs",
            if obs0 <= 0.0 { 0 } else { 1 }
        )));
    }
    Ok((joint[1][0] / obs0, joint[0][1] / obs1))
}

/// Reverse-direction parameters by Bayes inversion of the forward channel,
/// given P(V=1 | A=1) and P(V=1 | A=0).
pub fn derive_reverse_feature_params(forward: FlipParams, marginal: [f64; 2]) -> Result<FlipParams, BiasError> {
    let s = reverse_from_joint(&joint_from_forward(marginal[0], forward.neg_sensitive, forward.pos_sensitive))?;
    let o = reverse_from_joint(&joint_from_forward(marginal[1], forward.neg_other, forward.pos_other))?;
    Ok(FlipParams::new(s.0, o.0, s.1, o.1))
}

/// Reverse parameters straight from per-group joint tables `[A=1, A=0]`.
pub fn reverse_params_from_joints(joints: &[Joint; 2]) -> Result<FlipParams, BiasError> {
    let s = reverse_from_joint(&joints[0])?;
    let o = reverse_from_joint(&joints[1])?;
    Ok(FlipParams::new(s.0, o.0, s.1, o.1))
}

/// One row with both versions of a binary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRow {
    pub a: bool,
    pub biased: bool,
    pub unbiased: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Unbiased → biased, as label-bias programs use.
    Forward,
    /// Biased → unbiased, as measurement-bias programs use.
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Estimates with unestimated cells set to 0.
    pub params: FlipParams,
    /// Conditioning-event size of each cell, p1..p4.
    pub counts: [usize; 4],
    /// Flip counts of each cell.
    pub flips: [usize; 4],
    pub unestimated: [bool; 4],
}

/// Empirical flip frequencies of every cell.
pub fn estimate_params(paired: &[PairedRow], direction: Direction) -> Result<Estimate, BiasError> {
    if paired.is_empty() {
        return Err(BiasError::EmptySample);
    }
    let mut counts = [0usize; 4];
    let mut flips = [0usize; 4];
    for r in paired {
        // forward conditions on the unbiased value, reverse on the biased one
        let given = match direction {
            Direction::Forward => r.unbiased,
            Direction::Reverse => r.biased,
        };
        // neg cells: given fair 1 (forward) or observed 0 (reverse)
        let neg = match direction {
            Direction::Forward => given,
            Direction::Reverse => !given,
        };
        let cell = match (neg, r.a) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts[cell] += 1;
        if r.biased != r.unbiased {
            flips[cell] += 1;
        }
    }
    let mut cells = [0.0; 4];
    let mut unestimated = [false; 4];
    for c in 0..4 {
        if counts[c] == 0 {
            unestimated[c] = true;
            log::warn!("parameter p{} has no supporting rows; using 0", c + 1);
        } else {
            cells[c] = flips[c] as f64 / counts[c] as f64;
        }
    }
    Ok(Estimate {
        params: FlipParams::from_cells(cells),
        counts,
        flips,
        unestimated,
    })
}

/// Smallest n with n ≥ ln(2/(1-γ)) / (2ε²): enough samples to estimate a
/// probability within `eps` with confidence `gamma`.
///
/// At ε = 0.1, γ = 0.95 the bound is 184.44, so this returns 185; the figure
/// of 184 that is sometimes quoted for these settings rounds down.
pub fn hoeffding_n(eps: f64, gamma: f64) -> Result<u64, BiasError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(BiasError::OutOfRange(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(BiasError::OutOfRange(format!("confidence must lie in (0,1), got {gamma}")));
    }
    let bound = (2.0 / (1.0 - gamma)).ln() / (2.0 * eps * eps);
    Ok(bound.ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_label_cells() {
        assert_eq!(derive_forward_label_params(0.0, 0.0), FlipParams::default());
        assert!((derive_forward_label_params(0.3, 0.1).neg_sensitive - 0.34).abs() < 1e-12);
        assert_eq!(derive_forward_label_params(1.0, 0.0).neg_sensitive, 1.0);
    }

    #[test]
    fn reverse_examples() {
        let r = derive_reverse_feature_params(FlipParams::new(0.2, 0.2, 0.0, 0.0), [0.5, 0.5]).unwrap();
        assert!((r.neg_sensitive - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(r.pos_sensitive, 0.0);
        let q = 0.15;
        let r = derive_reverse_feature_params(FlipParams::new(q, q, q, q), [0.5, 0.5]).unwrap();
        for c in r.cells() {
            assert!((c - q).abs() < 1e-12);
        }
        assert_eq!(
            derive_reverse_feature_params(FlipParams::default(), [0.5, 0.3]).unwrap(),
            FlipParams::default()
        );
    }

    #[test]
    fn degenerate_reverse() {
        // V always 1 and never flipped: Ṽ = 0 has probability zero
        assert!(matches!(
            derive_reverse_feature_params(FlipParams::default(), [1.0, 0.5]),
            Err(BiasError::Degenerate(_))
        ));
    }

    #[test]
    fn simplify_projections() {
        let spec = BiasSpec::label(vec![("a".into(), FlipParams::new(0.3, 0.1, 0.2, 0.1))]);
        let c = |s: &BiasSpec| s.targets[0].params.cells();
        assert_eq!(c(&simplify(&spec, Assumption::NoPositiveBias)), [0.3, 0.1, 0.0, 0.0]);
        assert_eq!(c(&simplify(&spec, Assumption::NoBiasOnNonsensitive)), [0.3, 0.0, 0.2, 0.0]);
        let both = simplify(&simplify(&spec, Assumption::NoPositiveBias), Assumption::NoBiasOnNonsensitive);
        assert_eq!(c(&both), [0.3, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn hoeffding_values() {
        assert_eq!(hoeffding_n(0.1, 0.95).unwrap(), 185);
        assert_eq!(hoeffding_n(0.5, 0.5).unwrap(), 3);
        assert!(hoeffding_n(0.0, 0.9).is_err());
        assert!(hoeffding_n(0.1, 1.0).is_err());
        let n1 = hoeffding_n(0.1, 0.9).unwrap() as f64;
        let n2 = hoeffding_n(0.05, 0.9).unwrap() as f64;
        assert!((n2 / n1 - 4.0).abs() < 4.0 / n1 + 1e-9);
    }

    #[test]
    fn estimation_counts_and_flags() {
        let rows = vec![
            PairedRow { a: true, biased: false, unbiased: true },
            PairedRow { a: true, biased: true, unbiased: true },
            PairedRow { a: false, biased: true, unbiased: true },
        ];
        let e = estimate_params(&rows, Direction::Forward).unwrap();
        assert_eq!(e.counts, [2, 1, 0, 0]);
        assert_eq!(e.params.neg_sensitive, 0.5);
        assert_eq!(e.unestimated, [false, false, true, true]);
        assert!(estimate_params(&[], Direction::Forward).is_err());
    }

    #[test]
    fn parameter_tables() {
        let spec = BiasSpec::label(vec![("a".into(), FlipParams::new(0.1, 0.2, 0.3, 0.4))]);
        let t = spec.parameter_table().unwrap();
        assert_eq!(t.get("p3", 0), Some(0.3));
        let spec = BiasSpec::label(vec![
            ("hc".into(), FlipParams::new(0.1, 0.0, 0.0, 0.0)),
            ("bl".into(), FlipParams::new(0.2, 0.0, 0.0, 0.0)),
        ]);
        assert_eq!(spec.parameter_table().unwrap().get("p1_bl", 0), Some(0.2));
        let spec = BiasSpec::features(BiasKind::Measurement, vec![FlipParams::new(0.1, 0.0, 0.0, 0.0); 2]);
        assert_eq!(spec.parameter_table().unwrap().get("p1", 2), Some(0.1));
        let bad = BiasSpec {
            kind: BiasKind::Label,
            targets: vec![TargetBias {
                target: "1".into(),
                sensitive: "a".into(),
                params: FlipParams::default(),
            }],
        };
        assert!(bad.validate().is_err());
    }
}
