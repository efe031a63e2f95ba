//! Feedforward classifiers behind neural predicates, and their training.

mod checkpoint;
mod mlp;
mod optim;
mod train;

use thiserror::Error;

pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use mlp::{Gradients, Mlp, Tape};
pub use optim::{AdamW, AdamWConfig};
pub use train::{
    mean_loss, train, train_on, validation_split, History, LabelledRows, Scratch, Supervision, TrainConfig,
    TrainReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tape recorded at parameter version {tape}, network is at {model}")]
    StaleTape { tape: u64, model: u64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training examples")]
    EmptyDataset,
    #[error("loss became {loss} in epoch {epoch}; lower the learning rate or check the supervision")]
    Diverged { epoch: usize, loss: f64 },
    #[error("example {example}: {message}")]
    Supervision { example: usize, message: String },
    #[error(transparent)]
    Net(#[from] NetError),
}
