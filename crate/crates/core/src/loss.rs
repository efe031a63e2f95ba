//! Per-example losses on a predicted probability and a binary target.

use serde::{Deserialize, Serialize};

/// Lower/upper bound applied to classifier outputs before they enter a loss or circuit.
pub const PROB_EPS: f64 = 1e-6;

/// Clamps a classifier output into `[PROB_EPS, 1 - PROB_EPS]`.
/// Returns the clamped value and its derivative w.r.t. the raw value (0 when clamped).
pub fn clamp_prob(p: f64) -> (f64, f64) {
    if p < PROB_EPS {
        (PROB_EPS, 0.0)
    } else if p > 1.0 - PROB_EPS {
        (1.0 - PROB_EPS, 0.0)
    } else {
        (p, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    #[default]
    Bce,
    /// `-α (1-p)^γ log p` for positives, `-(1-α) p^γ log(1-p)` for negatives.
    Focal { gamma: f64, alpha: f64 },
}

impl LossSpec {
    pub fn focal_default() -> Self {
        LossSpec::Focal { gamma: 2.0, alpha: 0.5 }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            LossSpec::Bce => Ok(()),
            LossSpec::Focal { gamma, alpha } => {
                if !(gamma >= 0.0) {
                    Err(format!("focal gamma must be >= 0, got {gamma}"))
                } else if !(0.0..=1.0).contains(&alpha) {
                    Err(format!("focal alpha must lie in [0,1], got {alpha}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Loss at probability `p` for target `y`. Infinite at `p` in {0,1} on the wrong side.
    pub fn value(&self, p: f64, y: bool) -> f64 {
        match (*self, y) {
            (LossSpec::Bce, true) => -p.ln(),
            (LossSpec::Bce, false) => -(1.0 - p).ln(),
            (LossSpec::Focal { gamma, alpha }, true) => -alpha * (1.0 - p).powf(gamma) * p.ln(),
            (LossSpec::Focal { gamma, alpha }, false) => -(1.0 - alpha) * p.powf(gamma) * (1.0 - p).ln(),
        }
    }

    /// dL/dp.
    pub fn derivative(&self, p: f64, y: bool) -> f64 {
        match (*self, y) {
            (LossSpec::Bce, true) => -1.0 / p,
            (LossSpec::Bce, false) => 1.0 / (1.0 - p),
            (LossSpec::Focal { gamma, alpha }, true) => {
                let q = 1.0 - p;
                let mut d = -q.powf(gamma) / p;
                if gamma != 0.0 {
                    d += gamma * q.powf(gamma - 1.0) * p.ln();
                }
                alpha * d
            }
            (LossSpec::Focal { gamma, alpha }, false) => {
                let q = 1.0 - p;
                let mut d = p.powf(gamma) / q;
                if gamma != 0.0 {
                    d -= gamma * p.powf(gamma - 1.0) * q.ln();
                }
                (1.0 - alpha) * d
            }
        }
    }
}
