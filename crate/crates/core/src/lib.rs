//! Bias-aware classification with probabilistic logic programs.
//!
//! [`logic`] grounds and evaluates programs with neural predicates, [`net`]
//! trains the classifiers behind those predicates.

pub mod baselines;
pub mod bias;
pub mod data;
pub mod experiments;
pub mod fairness;
pub mod logic;
pub mod loss;
pub mod net;
