use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::NetError;

/// Feedforward classifier: ReLU hidden layers, one logistic output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// `weights[l]` has shape `(sizes[l], sizes[l + 1])`.
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    dropout: f64,
    version: u64,
}

/// Activations recorded by a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    /// Input of every layer (after dropout for hidden layers).
    inputs: Vec<Array2<f64>>,
    /// Post-ReLU, pre-dropout activation of every hidden layer.
    hidden: Vec<Array2<f64>>,
    /// Scaled dropout masks; `None` outside training or with rate 0.
    masks: Vec<Option<Array2<f64>>>,
    output: Array1<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array1<f64> {
        &self.output
    }
}

/// Parameter gradients laid out like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Flat view index `i`, same order as [`Mlp::param`].
    pub fn get(&self, i: usize) -> f64 {
        let mut i = i;
        for w in &self.weights {
            if i < w.len() {
                return w[[i / w.ncols(), i % w.ncols()]];
            }
            i -= w.len();
        }
        for b in &self.biases {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("gradient index out of range")
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|&v| v == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&v| v == 0.0))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// Uniform initialisation in `±1/sqrt(fan_in)` for weights and biases.
    pub fn new(input_dim: usize, hidden: &[usize], dropout: f64, rng: &mut impl Rng) -> Self {
        assert!(input_dim > 0, "input dimension must be positive");
        assert!((0.0..1.0).contains(&dropout), "dropout rate must lie in [0,1)");
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((pair[0], pair[1]), || {
                rng.random_range(-bound..bound)
            }));
            biases.push(Array1::from_shape_simple_fn(pair[1], || rng.random_range(-bound..bound)));
        }
        Mlp {
            sizes,
            weights,
            biases,
            dropout,
            version: 0,
        }
    }

    /// All parameters zero; outputs 0.5 everywhere.
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Mlp {
            weights: sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect(),
            biases: sizes.windows(2).map(|p| Array1::zeros(p[1])).collect(),
            sizes,
            dropout: 0.0,
            version: 0,
        }
    }

    pub(crate) fn from_parts(sizes: Vec<usize>, weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>, dropout: f64) -> Self {
        Mlp {
            sizes,
            weights,
            biases,
            dropout,
            version: 0,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// Bumped whenever parameters change; tapes from older versions are rejected.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn touch(&mut self) {
        self.version += 1;
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn locate(&self, i: usize) -> (bool, usize, usize) {
        let mut i = i;
        for (l, w) in self.weights.iter().enumerate() {
            if i < w.len() {
                return (true, l, i);
            }
            i -= w.len();
        }
        for (l, b) in self.biases.iter().enumerate() {
            if i < b.len() {
                return (false, l, i);
            }
            i -= b.len();
        }
        panic!("parameter index out of range")
    }

    /// Flat parameter `i`: all weight matrices row-major, then all biases.
    pub fn param(&self, i: usize) -> f64 {
        match self.locate(i) {
            (true, l, k) => self.weights[l].as_slice().expect("standard layout")[k],
            (false, l, k) => self.biases[l][k],
        }
    }

    pub fn set_param(&mut self, i: usize, value: f64) {
        match self.locate(i) {
            (true, l, k) => self.weights[l].as_slice_mut().expect("standard layout")[k] = value,
            (false, l, k) => self.biases[l][k] = value,
        }
        self.touch();
    }

    /// Forward pass on one feature vector.
    pub fn forward(&self, x: &[f64], training: bool, rng: &mut impl Rng) -> Result<(f64, Tape), NetError> {
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        let tape = self.forward_batch(batch, training, rng)?;
        Ok((tape.output[0], tape))
    }

    /// Forward pass on a batch (one row per example).
    pub fn forward_batch(&self, x: ArrayView2<f64>, training: bool, rng: &mut impl Rng) -> Result<Tape, NetError> {
        self.check_dim(x.ncols())?;
        let n_layers = self.weights.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut hidden = Vec::with_capacity(n_layers - 1);
        let mut masks = Vec::with_capacity(n_layers - 1);
        let mut a = x.to_owned();
        for l in 0..n_layers - 1 {
            let mut z = a.dot(&self.weights[l]);
            z += &self.biases[l];
            z.mapv_inplace(|v| v.max(0.0));
            inputs.push(a);
            let mask = if training && self.dropout > 0.0 {
                let keep = 1.0 - self.dropout;
                Some(Array2::from_shape_simple_fn(z.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                }))
            } else {
                None
            };
            a = match &mask {
                Some(m) => &z * m,
                None => z.clone(),
            };
            hidden.push(z);
            masks.push(mask);
        }
        let z = a.dot(&self.weights[n_layers - 1]) + &self.biases[n_layers - 1];
        inputs.push(a);
        let output = z.index_axis(Axis(1), 0).mapv(sigmoid);
        Ok(Tape {
            version: self.version,
            inputs,
            hidden,
            masks,
            output,
        })
    }

    /// Evaluation-mode outputs for a batch.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, NetError> {
        self.check_dim(x.ncols())?;
        let mut a = x.to_owned();
        let last = self.weights.len() - 1;
        for l in 0..last {
            a = a.dot(&self.weights[l]) + &self.biases[l];
            a.mapv_inplace(|v| v.max(0.0));
        }
        let z = a.dot(&self.weights[last]) + &self.biases[last];
        Ok(z.index_axis(Axis(1), 0).mapv(sigmoid))
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<f64, NetError> {
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row vector");
        Ok(self.predict(batch)?[0])
    }

    /// Parameter gradients given dL/dp for every row of the taped batch.
    pub fn backward(&self, tape: &Tape, dl_dp: &[f64]) -> Result<Gradients, NetError> {
        if tape.version != self.version {
            return Err(NetError::StaleTape {
                tape: tape.version,
                model: self.version,
            });
        }
        if dl_dp.len() != tape.output.len() {
            return Err(NetError::DimensionMismatch {
                expected: tape.output.len(),
                got: dl_dp.len(),
            });
        }
        let n_layers = self.weights.len();
        let mut gw = Vec::with_capacity(n_layers);
        let mut gb = Vec::with_capacity(n_layers);
        // dL/dz at the output: dL/dp * p(1-p)
        let mut dz = Array2::from_shape_fn((dl_dp.len(), 1), |(i, _)| {
            let p = tape.output[i];
            dl_dp[i] * p * (1.0 - p)
        });
        for l in (0..n_layers).rev() {
            gw.push(tape.inputs[l].t().dot(&dz));
            gb.push(dz.sum_axis(Axis(0)));
            if l == 0 {
                break;
            }
            let mut da = dz.dot(&self.weights[l].t());
            if let Some(m) = &tape.masks[l - 1] {
                da *= m;
            }
            ndarray::Zip::from(&mut da)
                .and(&tape.hidden[l - 1])
                .for_each(|d, &h| {
                    if h <= 0.0 {
                        *d = 0.0
                    }
                });
            dz = da;
        }
        gw.reverse();
        gb.reverse();
        Ok(Gradients {
            weights: gw,
            biases: gb,
        })
    }

    fn check_dim(&self, got: usize) -> Result<(), NetError> {
        if got != self.sizes[0] {
            return Err(NetError::DimensionMismatch {
                expected: self.sizes[0],
                got,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_half() {
        let m = Mlp::zeros(3, &[4, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (p, _) = m.forward(&[1.0, -2.0, 3.0], true, &mut rng).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn dimension_mismatch() {
        let m = Mlp::zeros(3, &[2]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            m.forward(&[1.0], false, &mut rng).unwrap_err(),
            NetError::DimensionMismatch { expected: 3, got: 1 }
        );
    }

    #[test]
    fn stale_tape_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mlp::new(2, &[3], 0.0, &mut rng);
        let (_, tape) = m.forward(&[0.5, 0.5], true, &mut rng).unwrap();
        let v = m.param(0);
        m.set_param(0, v + 1.0);
        assert!(matches!(m.backward(&tape, &[1.0]), Err(NetError::StaleTape { .. })));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Mlp::new(4, &[8, 8], 0.0, &mut rng);
        let (_, tape) = m.forward(&[0.1, 0.2, 0.3, 0.4], true, &mut rng).unwrap();
        assert!(m.backward(&tape, &[0.0]).unwrap().is_zero());
    }

    #[test]
    fn single_unit_closed_form() {
        // p = sigmoid(w x + b); dp/dw = p(1-p) x
        let mut m = Mlp::zeros(1, &[]);
        m.set_param(0, 0.7);
        m.set_param(1, -0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (p, tape) = m.forward(&[1.5], false, &mut rng).unwrap();
        let expected = sigmoid(0.7 * 1.5 - 0.2);
        assert!((p - expected).abs() < 1e-15);
        let g = m.backward(&tape, &[1.0]).unwrap();
        assert!((g.get(0) - p * (1.0 - p) * 1.5).abs() < 1e-15);
        assert!((g.get(1) - p * (1.0 - p)).abs() < 1e-15);
    }

    #[test]
    fn batch_matches_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mlp::new(3, &[5, 5], 0.0, &mut rng);
        let x = Array2::from_shape_vec((2, 3), vec![0.1, 0.9, -0.4, 1.0, 0.0, 1.0]).unwrap();
        let batch = m.predict(x.view()).unwrap();
        for i in 0..2 {
            let row: Vec<f64> = x.row(i).to_vec();
            assert!((m.predict_one(&row).unwrap() - batch[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn dropout_only_in_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Mlp::new(3, &[16, 16], 0.5, &mut rng);
        let x = [0.3, 0.6, 0.9];
        let a = m.forward(&x, false, &mut rng).unwrap().0;
        let b = m.forward(&x, false, &mut rng).unwrap().0;
        assert_eq!(a, b);
        assert_eq!(a, m.predict_one(&x).unwrap());
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(m.forward(&x, true, &mut r1).unwrap().0, m.forward(&x, true, &mut r2).unwrap().0);
    }
}
