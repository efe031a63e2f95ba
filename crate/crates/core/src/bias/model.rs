//! A bias program bound to parameters and an input layout: supervision through
//! the program during training and program-based prediction.

use std::collections::HashMap;

use ndarray::Array2;

use crate::logic::{ground, CompiledCircuit, EngineError, LeafId, LeafSource, NeuralBindings, ParameterTable};
use crate::loss::{clamp_prob, LossSpec};
use crate::net::{Mlp, Supervision};

use super::inputs::InputLayout;
use super::params::{BiasKind, BiasSpec};
use super::templates::{label_bias_program, measurement_bias_program, BiasProgram};
use super::BiasError;

/// Query probabilities are kept this far from 0 and 1 inside losses.
const QUERY_EPS: f64 = 1e-12;

/// Compiled query of one input: the diagram, fixed leaf probabilities, and the
/// classifier input of every neural leaf.
#[derive(Debug, Clone)]
pub struct Structure {
    pub circuit: CompiledCircuit,
    probs: Vec<f64>,
    neural: Vec<(LeafId, Vec<f64>)>,
}

impl Structure {
    /// Number of classifier evaluations the query needs.
    pub fn num_neural(&self) -> usize {
        self.neural.len()
    }

    pub fn classifier_inputs(&self) -> impl Iterator<Item = &[f64]> {
        self.neural.iter().map(|(_, x)| x.as_slice())
    }

    fn leaf_probs(&self, outputs: &[f64], clamp_grads: &mut Vec<f64>) -> Vec<f64> {
        let mut probs = self.probs.clone();
        clamp_grads.clear();
        for (&(leaf, _), &o) in self.neural.iter().zip(outputs) {
            let (p, d) = clamp_prob(o);
            probs[leaf] = p;
            clamp_grads.push(d);
        }
        probs
    }

    /// Query probability given raw classifier outputs for each neural leaf.
    pub fn probability(&self, outputs: &[f64]) -> Result<f64, EngineError> {
        let probs = self.leaf_probs(outputs, &mut Vec::new());
        self.circuit.probability(&probs)
    }
}

#[derive(Debug, Clone, Default)]
struct StructureCache {
    index: HashMap<Vec<u64>, usize>,
    items: Vec<Structure>,
}

impl StructureCache {
    fn get_or_build(&mut self, model: &BiasModel, input: &[f64]) -> Result<usize, EngineError> {
        let key: Vec<u64> = input.iter().map(|v| v.to_bits()).collect();
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        let s = model.structure(input)?;
        self.items.push(s);
        self.index.insert(key, self.items.len() - 1);
        Ok(self.items.len() - 1)
    }
}

/// A bias program with its parameters, ready for training and prediction.
#[derive(Debug, Clone)]
pub struct BiasModel {
    pub program: BiasProgram,
    pub params: ParameterTable,
    pub layout: InputLayout,
    bindings: NeuralBindings,
}

impl BiasModel {
    pub fn new(program: BiasProgram, params: ParameterTable, layout: InputLayout) -> Self {
        let bindings = layout.bindings();
        BiasModel {
            program,
            params,
            layout,
            bindings,
        }
    }

    /// Program and parameters for `spec`. Label specs use the layout's selectors
    /// named by the spec; feature specs use the measurement program.
    pub fn from_spec(spec: &BiasSpec, layout: InputLayout) -> Result<Self, BiasError> {
        let params = spec.parameter_table()?;
        let program = match spec.kind {
            BiasKind::Label => {
                for s in spec.sensitive() {
                    if layout.selector_column(s).is_none() {
                        return Err(BiasError::InvalidSpec(format!("no input column for selector `{s}`")));
                    }
                }
                label_bias_program(&spec.sensitive())?
            }
            BiasKind::Measurement | BiasKind::Historical => {
                if spec.targets.len() != layout.n_features {
                    return Err(BiasError::InvalidSpec(format!(
                        "{} feature parameter sets for {} features",
                        spec.targets.len(),
                        layout.n_features
                    )));
                }
                measurement_bias_program(layout.n_features)?
            }
        };
        Ok(BiasModel::new(program, params, layout))
    }

    /// Grounds and compiles the query for one input vector.
    pub fn structure(&self, input: &[f64]) -> Result<Structure, EngineError> {
        let circuit = ground(&self.program.program, &self.program.query, &self.params, &self.bindings, input)?;
        let mut probs = vec![0.0; circuit.num_leaves()];
        let mut neural = Vec::new();
        for (i, leaf) in circuit.leaves().iter().enumerate() {
            match &leaf.source {
                LeafSource::Fixed(p) => probs[i] = *p,
                LeafSource::Neural { features, .. } => neural.push((i, features.clone())),
            }
        }
        Ok(Structure {
            circuit: CompiledCircuit::compile(&circuit),
            probs,
            neural,
        })
    }

    /// Distant supervision: each input's query is supervised with its observed label.
    pub fn supervision(&self, inputs: &[Vec<f64>], labels: &[bool]) -> Result<ProgramSupervision, BiasError> {
        assert_eq!(inputs.len(), labels.len(), "one label per input");
        let mut cache = StructureCache::default();
        let mut assign = Vec::with_capacity(inputs.len());
        for x in inputs {
            check_len(&self.layout, x)?;
            assign.push(cache.get_or_build(self, x)?);
        }
        Ok(ProgramSupervision {
            dim: self.layout.classifier_dim(),
            structures: cache.items,
            assign,
            labels: labels.to_vec(),
        })
    }

    /// Query probability for every input with classifier `mlp` behind `h`.
    pub fn predict(&self, mlp: &Mlp, inputs: &[Vec<f64>]) -> Result<Vec<f64>, BiasError> {
        let mut cache = StructureCache::default();
        let mut assign = Vec::with_capacity(inputs.len());
        for x in inputs {
            check_len(&self.layout, x)?;
            assign.push(cache.get_or_build(self, x)?);
        }
        let mut probs_per_structure = Vec::with_capacity(cache.items.len());
        for s in &cache.items {
            let rows: Vec<f64> = s.classifier_inputs().flatten().copied().collect();
            let outputs = if s.num_neural() == 0 {
                Vec::new()
            } else {
                let x = Array2::from_shape_vec((s.num_neural(), self.layout.classifier_dim()), rows)
                    .expect("classifier rows");
                mlp.predict(x.view())?.to_vec()
            };
            probs_per_structure.push(s.probability(&outputs)?);
        }
        Ok(assign.into_iter().map(|i| probs_per_structure[i]).collect())
    }
}

fn check_len(layout: &InputLayout, x: &[f64]) -> Result<(), BiasError> {
    if x.len() != layout.input_len() {
        return Err(BiasError::InvalidSpec(format!(
            "input has {} columns, layout expects {}",
            x.len(),
            layout.input_len()
        )));
    }
    Ok(())
}

/// Training examples supervised through a bias program.
#[derive(Debug, Clone)]
pub struct ProgramSupervision {
    dim: usize,
    structures: Vec<Structure>,
    assign: Vec<usize>,
    labels: Vec<bool>,
}

impl ProgramSupervision {
    /// Distinct compiled structures shared by the examples.
    pub fn num_structures(&self) -> usize {
        self.structures.len()
    }

    pub fn structure(&self, i: usize) -> &Structure {
        &self.structures[self.assign[i]]
    }
}

impl Supervision for ProgramSupervision {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn inputs(&self, i: usize, out: &mut Vec<f64>) -> usize {
        let s = self.structure(i);
        for x in s.classifier_inputs() {
            out.extend_from_slice(x);
        }
        s.num_neural()
    }

    fn loss_grad(&self, i: usize, outputs: &[f64], loss: &LossSpec, grad: &mut [f64]) -> Result<f64, String> {
        let s = self.structure(i);
        let mut clamp_grads = Vec::with_capacity(outputs.len());
        let probs = s.leaf_probs(outputs, &mut clamp_grads);
        let mut leaf_grads = vec![0.0; probs.len()];
        let p = s.circuit.evaluate_into(&probs, &mut leaf_grads).map_err(|e| e.to_string())?;
        let (pc, dpc) = if p < QUERY_EPS {
            (QUERY_EPS, 0.0)
        } else if p > 1.0 - QUERY_EPS {
            (1.0 - QUERY_EPS, 0.0)
        } else {
            (p, 1.0)
        };
        let y = self.labels[i];
        let dl = loss.derivative(pc, y) * dpc;
        for (k, &(leaf, _)) in s.neural.iter().enumerate() {
            grad[k] = dl * leaf_grads[leaf] * clamp_grads[k];
        }
        Ok(loss.value(pc, y))
    }
}

/// A classifier trained on biased features and labels, read through the
/// measurement program at prediction time.
#[derive(Debug, Clone)]
pub struct HistoricalPredictor {
    pub classifier: Mlp,
    pub model: BiasModel,
}

impl HistoricalPredictor {
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, BiasError> {
        self.model.predict(&self.classifier, inputs)
    }
}

/// Wraps `classifier` so that predictions marginalise over the debiased
/// feature vectors of the measurement program in `model`.
pub fn historical_mode(classifier: Mlp, model: BiasModel) -> Result<HistoricalPredictor, BiasError> {
    if !matches!(model.program.query.predicate.as_str(), "y") {
        return Err(BiasError::InvalidSpec("historical mode needs the measurement program".into()));
    }
    if classifier.input_dim() != model.layout.classifier_dim() {
        return Err(BiasError::InvalidSpec(format!(
            "classifier takes {} inputs, layout provides {}",
            classifier.input_dim(),
            model.layout.classifier_dim()
        )));
    }
    Ok(HistoricalPredictor { classifier, model })
}
