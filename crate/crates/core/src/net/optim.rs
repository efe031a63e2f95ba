use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: AdamWConfig,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl AdamW {
    pub fn new(config: AdamWConfig, mlp: &Mlp) -> Self {
        AdamW {
            config,
            t: 0,
            m: Gradients::zeros_like(mlp),
            v: Gradients::zeros_like(mlp),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update. Panics if `grads` does not match the network's shapes.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) {
        assert_eq!(grads.weights.len(), mlp.weights.len(), "gradient layer count");
        let c = self.config;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        let decay = 1.0 - c.lr * c.weight_decay;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *p *= decay;
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= c.lr * mhat / (vhat.sqrt() + c.eps);
        };
        for l in 0..mlp.weights.len() {
            assert_eq!(grads.weights[l].raw_dim(), mlp.weights[l].raw_dim(), "weight shape");
            assert_eq!(grads.biases[l].raw_dim(), mlp.biases[l].raw_dim(), "bias shape");
            ndarray::Zip::from(&mut mlp.weights[l])
                .and(&grads.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut mlp.biases[l])
                .and(&grads.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        mlp.touch();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> Mlp {
        Mlp::new(3, &[4], 0.0, &mut ChaCha8Rng::seed_from_u64(5))
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut m = net();
        let before = m.clone();
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(cfg, &m);
        opt.step(&mut m, &Gradients::zeros_like(&before));
        for i in 0..m.num_params() {
            assert_eq!(m.param(i), before.param(i));
        }
    }

    #[test]
    fn first_step_moves_against_sign() {
        let mut m = net();
        let before = m.clone();
        let mut g = Gradients::zeros_like(&m);
        g.weights[0][[0, 0]] = 0.37;
        g.biases[1][0] = -2.5;
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        AdamW::new(cfg, &m).step(&mut m, &g);
        // bias-corrected moments are g and g^2, so the step is lr * g / (|g| + eps)
        let expect = |g: f64| -cfg.lr * g / (g.abs() + cfg.eps);
        assert!((m.param(0) - before.param(0) - expect(0.37)).abs() < 1e-15);
        let last = m.num_params() - 1;
        assert!((m.param(last) - before.param(last) - expect(-2.5)).abs() < 1e-15);
        assert_eq!(m.param(1), before.param(1));
    }

    #[test]
    fn decay_shrinks_weights() {
        let mut m = net();
        let before = m.clone();
        let cfg = AdamWConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..Default::default()
        };
        AdamW::new(cfg, &m).step(&mut m, &Gradients::zeros_like(&before));
        for i in 0..m.num_params() {
            assert!((m.param(i) - before.param(i) * (1.0 - 0.05)).abs() < 1e-15);
        }
    }
}
