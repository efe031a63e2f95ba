//! Cross-validated sweeps over bias probabilities, with CSV results and plots.

mod method;
mod plot;
mod sweep;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineError;
use crate::bias::BiasError;
use crate::data::{DataError, GenConfig, MultiGenConfig, Scenario};
use crate::fairness::MetricError;
use crate::net::{CheckpointError, NetError, TrainConfig, TrainError};

pub use method::{bias_spec, fit_debias, fit_method, Method, ParamSource, Predictor};
pub use plot::plot_results;
pub use sweep::{aggregate, read_results, run_cell, run_sweep, Aggregate, Cell, ResultRow, SweepSummary};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Bias(#[from] BiasError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("plotting failed: {0}")]
    Plot(String),
}

/// One sweep. Each `beta` (and, when `beta_hats` is nonempty, each assumed
/// `beta_hat`) is crossed with `seeds` datasets and `folds` folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub betas: Vec<f64>,
    /// Assumed bias probabilities for the program; empty means the true one.
    pub beta_hats: Vec<f64>,
    /// Noise of the biased channel (label noise, or feature noise for measurement bias).
    pub noise: f64,
    /// A influences Y (`alpha_a = 1`, threshold 2.5); the classifier then sees A.
    pub dependent: bool,
    pub methods: Vec<Method>,
    pub generator: GenConfig,
    /// Several sensitive attributes with chained label bias; `betas` sets every stage.
    pub multi: Option<MultiGenConfig>,
    /// Existing CSV (with manifest) instead of generated data; parameters are
    /// then estimated on each training fold.
    pub data: Option<PathBuf>,
    pub train: TrainConfig,
    pub folds: usize,
    pub seeds: usize,
    pub base_seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Label,
            betas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            beta_hats: Vec::new(),
            noise: 0.1,
            dependent: false,
            methods: vec![
                Method::Debias,
                Method::Lower,
                Method::Upper,
                Method::Unawareness,
                Method::Massaging,
                Method::ErrorParity,
            ],
            generator: GenConfig::standard(3),
            multi: None,
            data: None,
            train: TrainConfig::default(),
            folds: 5,
            seeds: 5,
            base_seed: 0,
            workers: 0,
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.folds < 2 {
            return bad("at least two folds are needed");
        }
        if self.seeds == 0 {
            return bad("at least one seed is needed");
        }
        if self.betas.is_empty() || self.methods.is_empty() {
            return bad("the beta grid and the method list must be nonempty");
        }
        if self.betas.iter().chain(&self.beta_hats).any(|b| !(0.0..=1.0).contains(b)) {
            return bad("bias probabilities must lie in [0,1]");
        }
        if self.multi.is_some() && self.scenario != Scenario::Label {
            return bad("several sensitive attributes are only supported for label bias");
        }
        if self.data.is_some() && (!self.beta_hats.is_empty() || self.betas.len() != 1) {
            return bad("an ingested dataset has one fixed bias; use a single beta and no beta_hats");
        }
        self.train.validate()?;
        self.generator.validate()?;
        Ok(())
    }

    /// Generator settings for true bias `beta`.
    pub fn generator_for(&self, beta: f64) -> GenConfig {
        let mut g = self.generator.clone();
        if self.dependent {
            g = g.dependent();
        }
        match self.scenario {
            Scenario::Label => {
                g.beta_label = beta;
                g.p_noise_y = self.noise;
            }
            Scenario::Measurement => {
                g.beta_measure_r = beta;
                g.beta_measure_q = vec![beta; g.n_q];
                g.p_noise_r = self.noise;
                g.p_noise_q = vec![self.noise; g.n_q];
            }
            Scenario::Historical => {
                g.beta_hist_r = beta;
                g.beta_hist_q = vec![beta; g.n_q];
            }
        }
        g
    }

    /// Multi-attribute settings for stage bias `beta`.
    pub fn multi_for(&self, beta: f64) -> Option<MultiGenConfig> {
        self.multi.as_ref().map(|m| {
            let mut m = m.clone();
            m.beta = vec![beta; m.attributes.len()];
            m
        })
    }
}

/// 64-bit FNV-1a, used to derive reproducible seeds from cell coordinates.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Seed for a labelled coordinate tuple under `base`.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut bytes = base.to_le_bytes().to_vec();
    for p in parts {
        bytes.push(0x1f);
        bytes.extend_from_slice(p.as_bytes());
    }
    stable_hash(&bytes)
}

/// Deterministic shuffled partition of `0..n` into `folds` folds whose sizes differ by at most one.
pub fn split_cv(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, ExperimentError> {
    if folds == 0 || folds > n {
        return Err(ExperimentError::Config(format!("cannot split {n} rows into {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::with_capacity(n / folds + 1); folds];
    for (i, r) in idx.into_iter().enumerate() {
        out[i % folds].push(r);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_rows() {
        let f = split_cv(10, 5, 1).unwrap();
        assert!(f.iter().all(|x| x.len() == 2));
        assert_eq!(f, split_cv(10, 5, 1).unwrap());
        let mut all: Vec<usize> = split_cv(103, 5, 9).unwrap().concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert!(split_cv(3, 5, 0).is_err());
    }

    #[test]
    fn config_round_trips_and_validates() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"scenario":"historical","betas":[0.3],"folds":2}"#).unwrap();
        assert_eq!(partial.scenario, Scenario::Historical);
        assert!(partial.validate().is_ok());
        let bad = ExperimentConfig { folds: 1, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seeds_depend_on_every_part() {
        let a = derive_seed(1, &["0.3", "2"]);
        assert_eq!(a, derive_seed(1, &["0.3", "2"]));
        assert_ne!(a, derive_seed(2, &["0.3", "2"]));
        assert_ne!(a, derive_seed(1, &["0.32", ""]));
    }
}
