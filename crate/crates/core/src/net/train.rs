use std::collections::HashMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use super::optim::{AdamW, AdamWConfig};
use super::TrainError;
use crate::loss::{clamp_prob, LossSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossSpec,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamWConfig::default();
        TrainConfig {
            hidden: vec![32, 32, 32],
            dropout: 0.0,
            lr: adam.lr,
            batch_size: 64,
            epochs: 100,
            loss: LossSpec::Bce,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            weight_decay: adam.weight_decay,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epoch budget must be positive".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("validation fraction must lie in (0,1), got {}", self.val_fraction));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0,1), got {}", self.dropout));
        }
        self.loss.validate().map_err(TrainError::InvalidConfig)
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    /// Fresh network for `input_dim` inputs, initialised from the config seed.
    pub fn init_network(&self, input_dim: usize) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_1417);
        Mlp::new(input_dim, &self.hidden, self.dropout, &mut rng)
    }
}

/// Source of training signal: each example asks the classifier for outputs on
/// one or more input rows and turns them into a loss.
pub trait Supervision {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn input_dim(&self) -> usize;

    /// Appends the flattened input rows of example `i` to `out`; returns the row count.
    fn inputs(&self, i: usize, out: &mut Vec<f64>) -> usize;

    /// Loss of example `i` given the raw network outputs on its rows.
    /// Writes dL/d(output) per row into `grad`.
    fn loss_grad(&self, i: usize, outputs: &[f64], loss: &LossSpec, grad: &mut [f64]) -> Result<f64, String>;
}

/// Plain supervised examples: one input row and one binary label each.
#[derive(Debug, Clone)]
pub struct LabelledRows {
    x: Array2<f64>,
    y: Vec<bool>,
}

impl LabelledRows {
    pub fn new(x: Array2<f64>, y: Vec<bool>) -> Self {
        assert_eq!(x.nrows(), y.len(), "one label per row");
        LabelledRows { x, y }
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &[bool] {
        &self.y
    }
}

impl Supervision for LabelledRows {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn input_dim(&self) -> usize {
        self.x.ncols()
    }

    fn inputs(&self, i: usize, out: &mut Vec<f64>) -> usize {
        out.extend(self.x.row(i).iter());
        1
    }

    fn loss_grad(&self, i: usize, outputs: &[f64], loss: &LossSpec, grad: &mut [f64]) -> Result<f64, String> {
        let (p, dp) = clamp_prob(outputs[0]);
        grad[0] = loss.derivative(p, self.y[i]) * dp;
        Ok(loss.value(p, self.y[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
}

impl History {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: History,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Random `val_fraction` hold-out of `0..n`, returned as (train, validation).
pub fn validation_split(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x0a11_da7e));
    let n_val = if n < 2 { 0 } else { ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1) };
    let val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    train.sort_unstable();
    let mut val = val;
    val.sort_unstable();
    (train, val)
}

/// Trains `mlp` in place and keeps the weights with the lowest validation loss.
pub fn train(mlp: &mut Mlp, data: &dyn Supervision, config: &TrainConfig) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (train_idx, val_idx) = validation_split(data.len(), config.val_fraction, config.seed);
    let history = train_on(mlp, data, &train_idx, &val_idx, config)?;
    Ok(TrainReport {
        history,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

/// Training with an explicit split. An empty validation set keeps the last epoch.
pub fn train_on(
    mlp: &mut Mlp,
    data: &dyn Supervision,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
) -> Result<History, TrainError> {
    config.validate()?;
    if train_idx.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if data.input_dim() != mlp.input_dim() {
        return Err(TrainError::Net(super::NetError::DimensionMismatch {
            expected: mlp.input_dim(),
            got: data.input_dim(),
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = AdamW::new(config.optimizer(), mlp);
    let mut order = train_idx.to_vec();
    let mut history = History::default();
    let mut best: Option<(f64, Mlp)> = None;
    let mut scratch = Scratch::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(mlp);
            let loss = batch_pass(mlp, data, batch, config, true, &mut rng, Some(&mut grads), &mut scratch)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch, loss });
            }
            total += loss * batch.len() as f64;
            opt.step(mlp, &grads);
        }
        let train_loss = total / order.len() as f64;
        history.train_loss.push(train_loss);
        if val_idx.is_empty() {
            history.val_loss.push(train_loss);
            history.best_epoch = epoch;
            continue;
        }
        let val_loss = mean_loss(mlp, data, val_idx, config, &mut scratch)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch, loss: val_loss });
        }
        history.val_loss.push(val_loss);
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, mlp.clone()));
            history.best_epoch = epoch;
        }
    }
    if let Some((_, m)) = best {
        let version = mlp.version();
        *mlp = m;
        // keep tapes recorded against any intermediate weights stale
        while mlp.version() <= version {
            mlp.touch();
        }
    }
    Ok(history)
}

/// Mean loss of `mlp` (evaluation mode) over the given examples.
pub fn mean_loss(
    mlp: &Mlp,
    data: &dyn Supervision,
    idx: &[usize],
    config: &TrainConfig,
    scratch: &mut Scratch,
) -> Result<f64, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    for chunk in idx.chunks(1024) {
        total += batch_pass(mlp, data, chunk, config, false, &mut rng, None, scratch)? * chunk.len() as f64;
    }
    Ok(total / idx.len() as f64)
}

/// Reusable buffers for batch assembly.
#[derive(Debug, Default)]
pub struct Scratch {
    rows: Vec<f64>,
    row_of: Vec<usize>,
    spans: Vec<(usize, usize)>,
    outputs: Vec<f64>,
    grad: Vec<f64>,
}

/// Average loss over `batch`. Identical input rows are evaluated once when the
/// forward pass is deterministic. With `grads`, accumulates the mean gradient.
#[allow(clippy::too_many_arguments)]
fn batch_pass(
    mlp: &Mlp,
    data: &dyn Supervision,
    batch: &[usize],
    config: &TrainConfig,
    training: bool,
    rng: &mut ChaCha8Rng,
    grads: Option<&mut Gradients>,
    s: &mut Scratch,
) -> Result<f64, TrainError> {
    let dim = data.input_dim();
    s.rows.clear();
    s.row_of.clear();
    s.spans.clear();
    let dedupe = !(training && mlp.dropout() > 0.0);
    let mut unique: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique_rows: Vec<f64> = Vec::new();
    for &i in batch {
        let start = s.row_of.len();
        s.rows.clear();
        let k = data.inputs(i, &mut s.rows);
        for r in 0..k {
            let row = &s.rows[r * dim..(r + 1) * dim];
            let slot = if dedupe {
                let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
                let next = unique.len();
                let slot = *unique.entry(key).or_insert(next);
                if slot == next {
                    unique_rows.extend_from_slice(row);
                }
                slot
            } else {
                unique_rows.extend_from_slice(row);
                unique_rows.len() / dim - 1
            };
            s.row_of.push(slot);
        }
        s.spans.push((start, k));
    }
    let n_unique = unique_rows.len() / dim;
    let x = Array2::from_shape_vec((n_unique, dim), unique_rows).expect("row-major batch");
    let tape = mlp.forward_batch(x.view(), training, rng)?;
    let out = tape.output();
    let mut dl_dp = vec![0.0; n_unique];
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (&i, &(start, k)) in batch.iter().zip(&s.spans) {
        s.outputs.clear();
        s.outputs.extend(s.row_of[start..start + k].iter().map(|&u| out[u]));
        s.grad.clear();
        s.grad.resize(k, 0.0);
        let l = data
            .loss_grad(i, &s.outputs, &config.loss, &mut s.grad)
            .map_err(|message| TrainError::Supervision { example: i, message })?;
        total += l;
        for (r, g) in s.grad.iter().enumerate() {
            dl_dp[s.row_of[start + r]] += g * scale;
        }
    }
    if let Some(grads) = grads {
        *grads = mlp.backward(&tape, &dl_dp)?;
    }
    Ok(total * scale)
}
