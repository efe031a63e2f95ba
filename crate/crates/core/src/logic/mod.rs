//! Probabilistic logic engine: parsing, grounding, compilation and inference.

mod bdd;
mod circuit;
mod ground;
mod parser;
mod term;

use thiserror::Error;

use crate::loss::LossSpec;

pub use bdd::{brute_force, evaluate, CompiledCircuit, InferenceResult, BRUTE_FORCE_MAX_LEAVES};
pub use circuit::{CircuitBuilder, Leaf, LeafId, LeafSource, Node, NodeId, ProofCircuit, FALSE, TRUE};
pub use ground::{ground, NeuralBindings, NeuralLeaf, NeuralPredicate};
pub use parser::{parse, parse_atom, ParseError};
pub use term::{
    Atom, Clause, ClauseLabel, Literal, ParameterTable, ProbExpr, Program, SourcePos, Term,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("parameter {name}({index}) has no value")]
    UnresolvedParameter { name: String, index: i64 },
    #[error("parameter index `{0}` is not an integer")]
    BadParameterIndex(String),
    #[error("negation through recursion at {0}; the program is not stratified")]
    UnstratifiedNegation(String),
    #[error("cyclic dependency at {0}")]
    CyclicProgram(String),
    #[error("built-in called with an unbound argument: {0}")]
    NonGroundBuiltin(String),
    #[error("negated goal {0} is not ground")]
    NonGroundNegation(String),
    #[error("query {0} is not ground")]
    NonGroundQuery(String),
    #[error("clause produced the non-ground answer {0}")]
    NonGroundAnswer(String),
    #[error("arithmetic: {0}")]
    Arithmetic(String),
    #[error("no network bound to `{0}`")]
    UnboundNetwork(String),
    #[error("network `{network}`: {message}")]
    Neural { network: String, message: String },
    #[error("no probability supplied for leaf {0}")]
    MissingLeaf(usize),
    #[error("leaf {leaf} has probability {value} outside [0,1]")]
    InvalidProbability { leaf: usize, value: f64 },
    #[error("query probability {0} is 0 or 1; the loss is unbounded there")]
    DegenerateLoss(f64),
    #[error("{leaves} leaves exceed the enumeration limit of {limit}")]
    TooManyLeaves { leaves: usize, limit: usize },
}

/// dL/dp_leaf for every leaf when the query is supervised with `observed` under `loss`.
pub fn query_loss_gradient(
    circuit: &ProofCircuit,
    leaf_probs: &[f64],
    observed: bool,
    loss: &LossSpec,
) -> Result<Vec<f64>, EngineError> {
    let result = evaluate(circuit, leaf_probs)?;
    let p = result.probability;
    if p <= 0.0 || p >= 1.0 {
        return Err(EngineError::DegenerateLoss(p));
    }
    let dl = loss.derivative(p, observed);
    Ok(result.gradients.into_iter().map(|g| g * dl).collect())
}
