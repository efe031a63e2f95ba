use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::Mlp;
use super::train::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    Version(u32),
    #[error("checkpoint shapes are inconsistent: {0}")]
    Shape(String),
}

/// JSON container for a trained classifier and how it was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub sizes: Vec<usize>,
    /// Row-major weight matrices, `sizes[l] x sizes[l+1]`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub dropout: f64,
    pub config: TrainConfig,
    pub seed: u64,
    /// Free-form settings of whoever wrote the checkpoint (input columns, thresholds, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn new(mlp: &Mlp, config: &TrainConfig) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            sizes: mlp.sizes().to_vec(),
            weights: mlp.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: mlp.biases.iter().map(|b| b.to_vec()).collect(),
            dropout: mlp.dropout(),
            config: config.clone(),
            seed: config.seed,
            metadata: BTreeMap::new(),
        }
    }

    pub fn network(&self) -> Result<Mlp, CheckpointError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(self.version));
        }
        let layers = self.sizes.len().saturating_sub(1);
        if layers == 0 || self.weights.len() != layers || self.biases.len() != layers {
            return Err(CheckpointError::Shape(format!("{} layer sizes for {} weight matrices", self.sizes.len(), self.weights.len())));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layers {
            let shape = (self.sizes[l], self.sizes[l + 1]);
            let w = Array2::from_shape_vec(shape, self.weights[l].clone())
                .map_err(|e| CheckpointError::Shape(format!("layer {l}: {e}")))?;
            if self.biases[l].len() != shape.1 {
                return Err(CheckpointError::Shape(format!("layer {l} bias length {}", self.biases[l].len())));
            }
            weights.push(w);
            biases.push(Array1::from(self.biases[l].clone()));
        }
        Ok(Mlp::from_parts(self.sizes.clone(), weights, biases, self.dropout))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(ck.version));
        }
        Ok(ck)
    }
}
