//! Bias mechanisms as programs: templates, parameters, and training/prediction through them.

mod inputs;
mod model;
mod params;
mod templates;

use thiserror::Error;

use crate::logic::EngineError;
use crate::net::NetError;

pub use inputs::InputLayout;
pub use model::{historical_mode, BiasModel, HistoricalPredictor, ProgramSupervision, Structure};
pub use params::{
    derive_forward_feature_params, derive_forward_label_params, derive_reverse_feature_params, estimate_params,
    hoeffding_n, joint_from_forward, reverse_from_joint, reverse_params_from_joints, simplify, Assumption, BiasKind,
    BiasSpec, Direction, Estimate, FlipParams, Joint, PairedRow, TargetBias,
};
pub use templates::{label_bias_program, label_param_name, measurement_bias_program, measurement_query, BiasProgram};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BiasError {
    #[error("at least one sensitive attribute is required")]
    NoSensitiveAttribute,
    #[error("at least one feature is required")]
    NoFeatures,
    #[error("parameter p{cell} = {value} is outside [0,1]")]
    Probability { cell: usize, value: f64 },
    #[error("invalid bias specification: {0}")]
    InvalidSpec(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("paired sample is empty")]
    EmptySample,
    #[error("{0}")]
    OutOfRange(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Net(#[from] NetError),
}
