//! Synthetic data with controllable label, measurement and historical bias.
//!
//! Every row is drawn once and carried through two worlds that share all
//! randomness: the fair world (no historical bias) provides the unbiased
//! columns, the historical world feeds the measurement and label channels that
//! produce the observed columns. With `beta_hist_* = 0` the worlds coincide.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::DataError;
use crate::bias::Joint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_rows: usize,
    pub n_q: usize,
    pub p_a: f64,
    pub p_r: f64,
    pub p_q: Vec<f64>,
    pub alpha_a: f64,
    pub alpha_r: f64,
    pub alpha_q: Vec<f64>,
    pub alpha_qr: Vec<f64>,
    pub sigma_y: f64,
    pub s_bar: f64,
    pub beta_hist_r: f64,
    pub beta_hist_q: Vec<f64>,
    pub beta_measure_r: f64,
    pub beta_measure_q: Vec<f64>,
    pub beta_label: f64,
    pub p_noise_y: f64,
    pub p_noise_r: f64,
    pub p_noise_q: Vec<f64>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::standard(3)
    }
}

impl GenConfig {
    /// Shared settings of the synthetic experiments with `n_q` correlated
    /// features, no bias, no noise and A independent of Y.
    pub fn standard(n_q: usize) -> Self {
        GenConfig {
            n_rows: 10_000,
            n_q,
            p_a: 0.5,
            p_r: 0.5,
            p_q: vec![0.5; n_q],
            alpha_a: 0.0,
            alpha_r: 1.0,
            alpha_q: vec![1.0; n_q],
            alpha_qr: (1..=n_q).map(|i| i as f64 / 10.0).collect(),
            sigma_y: 2.0,
            s_bar: 1.5,
            beta_hist_r: 0.0,
            beta_hist_q: vec![0.0; n_q],
            beta_measure_r: 0.0,
            beta_measure_q: vec![0.0; n_q],
            beta_label: 0.0,
            p_noise_y: 0.0,
            p_noise_r: 0.0,
            p_noise_q: vec![0.0; n_q],
            seed: 0,
        }
    }

    /// Makes A influence Y (`alpha_a = 1`) and moves the threshold to keep classes balanced.
    pub fn dependent(mut self) -> Self {
        self.alpha_a = 1.0;
        self.s_bar = 2.5;
        self
    }

    /// Label bias `beta` with label noise 0.1.
    pub fn with_label_bias(mut self, beta: f64) -> Self {
        self.beta_label = beta;
        self.p_noise_y = 0.1;
        self
    }

    /// Measurement bias `beta` on every feature with feature noise 0.1.
    pub fn with_measurement_bias(mut self, beta: f64) -> Self {
        self.beta_measure_r = beta;
        self.beta_measure_q = vec![beta; self.n_q];
        self.p_noise_r = 0.1;
        self.p_noise_q = vec![0.1; self.n_q];
        self
    }

    /// Historical bias `beta` on every feature.
    pub fn with_historical_bias(mut self, beta: f64) -> Self {
        self.beta_hist_r = beta;
        self.beta_hist_q = vec![beta; self.n_q];
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let per_q = [
            ("p_q", &self.p_q),
            ("alpha_q", &self.alpha_q),
            ("alpha_qr", &self.alpha_qr),
            ("beta_hist_q", &self.beta_hist_q),
            ("beta_measure_q", &self.beta_measure_q),
            ("p_noise_q", &self.p_noise_q),
        ];
        for (name, v) in per_q {
            if v.len() != self.n_q {
                return Err(DataError::Config(format!("{name} has {} entries for n_q = {}", v.len(), self.n_q)));
            }
        }
        let mut probs = vec![
            ("p_a", self.p_a),
            ("p_r", self.p_r),
            ("beta_hist_r", self.beta_hist_r),
            ("beta_measure_r", self.beta_measure_r),
            ("beta_label", self.beta_label),
            ("p_noise_y", self.p_noise_y),
            ("p_noise_r", self.p_noise_r),
        ];
        for i in 0..self.n_q {
            probs.push(("p_q", self.p_q[i]));
            probs.push(("beta_hist_q", self.beta_hist_q[i]));
            probs.push(("beta_measure_q", self.beta_measure_q[i]));
            probs.push(("p_noise_q", self.p_noise_q[i]));
        }
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(DataError::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.sigma_y >= 0.0) {
            return Err(DataError::Config(format!("sigma_y = {} must be >= 0", self.sigma_y)));
        }
        Ok(())
    }

    fn q_prob(&self, i: usize, r: bool) -> f64 {
        (self.p_q[i] + if r { self.alpha_qr[i] } else { 0.0 }).clamp(0.0, 1.0)
    }

    fn score(&self, a: bool, r: bool, q: &[bool]) -> f64 {
        let mut s = if a { 0.0 } else { self.alpha_a };
        if r {
            s += self.alpha_r;
        }
        for (i, &qi) in q.iter().enumerate() {
            if qi {
                s += self.alpha_q[i];
            }
        }
        s
    }

    /// Names of the features in column order: `r, q1, ..., qn`.
    pub fn feature_names(&self) -> Vec<String> {
        std::iter::once("r".to_string())
            .chain((1..=self.n_q).map(|i| format!("q{i}")))
            .collect()
    }

    /// Exact P(V = v, Ṽ = ṽ | A) of feature `feature` (0 = r, i = q_i), where V is the
    /// fair-world value and Ṽ the observed one; `[A=1, A=0]`.
    pub fn feature_channel_joints(&self, feature: usize) -> [Joint; 2] {
        assert!(feature <= self.n_q, "feature index out of range");
        let mut out = [[[0.0; 2]; 2]; 2];
        for (slot, a) in [(0, 1.0), (1, 0.0)] {
            let joint = &mut out[slot];
            let bern = |p: f64| [(false, 1.0 - p), (true, p)];
            for (r0, pr) in bern(self.p_r) {
                for (hr, phr) in bern(self.beta_hist_r * a) {
                    let rh = r0 && !hr;
                    let w = pr * phr;
                    if w == 0.0 {
                        continue;
                    }
                    // (fair value, historical value) pairs with their probabilities
                    let pairs: Vec<(bool, bool, f64)> = if feature == 0 {
                        vec![(r0, rh, 1.0)]
                    } else {
                        let i = feature - 1;
                        let t0 = self.q_prob(i, r0);
                        let th = self.q_prob(i, rh);
                        let cells = [
                            (true, true, t0.min(th)),
                            (true, false, (t0 - th).max(0.0)),
                            (false, true, (th - t0).max(0.0)),
                            (false, false, 1.0 - t0.max(th)),
                        ];
                        let hq = self.beta_hist_q[i] * a;
                        let mut v = Vec::new();
                        for (f, h, p) in cells {
                            v.push((f, h, p * (1.0 - hq)));
                            v.push((f, false, p * hq));
                        }
                        v
                    };
                    let (bm, pn) = if feature == 0 {
                        (self.beta_measure_r, self.p_noise_r)
                    } else {
                        (self.beta_measure_q[feature - 1], self.p_noise_q[feature - 1])
                    };
                    for (fair, hist, p) in pairs {
                        for (m, pm) in bern(bm * a) {
                            for (n, pnn) in bern(pn * a) {
                                let obs = (hist && !m) ^ n;
                                joint[fair as usize][obs as usize] += w * p * pm * pnn;
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Draws the dataset row by row; row `i` uses its own stream of the seeded generator.
pub fn generate(config: &GenConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    for i in 0..config.n_q {
        if config.p_q[i] + config.alpha_qr[i] > 1.0 || config.p_q[i] + config.alpha_qr[i] < 0.0 {
            log::warn!(
                "p_q{} + alpha_qr{} = {} is clipped to [0,1]",
                i + 1,
                i + 1,
                config.p_q[i] + config.alpha_qr[i]
            );
        }
    }
    let n = config.n_rows;
    let nq = config.n_q;
    let mut ds = Dataset::empty(vec!["a".into()], config.feature_names());
    let mut q0 = vec![false; nq];
    let mut qh = vec![false; nq];
    let mut qt = vec![false; nq];
    for row in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(row as u64);
        let mut u = || rng.random::<f64>();
        let a = u() < config.p_a;
        let af = if a { 1.0 } else { 0.0 };
        let r0 = u() < config.p_r;
        let rh = r0 && !(u() < config.beta_hist_r * af);
        for i in 0..nq {
            let uq = u();
            let hist = u() < config.beta_hist_q[i] * af;
            q0[i] = uq < config.q_prob(i, r0);
            qh[i] = uq < config.q_prob(i, rh) && !hist;
        }
        let rt = (rh && !(u() < config.beta_measure_r * af)) ^ (u() < config.p_noise_r * af);
        for i in 0..nq {
            let m = u() < config.beta_measure_q[i] * af;
            let noise = u() < config.p_noise_q[i] * af;
            qt[i] = (qh[i] && !m) ^ noise;
        }
        let label_bias = u() < config.beta_label * af;
        let label_noise = u() < config.p_noise_y;
        let z: f64 = rng.sample(StandardNormal);
        let noise = config.sigma_y * z;
        let y0 = config.score(a, r0, &q0) + noise > config.s_bar;
        let yh = config.score(a, rh, &qh) + noise > config.s_bar;
        let yt = (yh && !label_bias) ^ label_noise;

        let mut fair = Vec::with_capacity(nq + 1);
        fair.push(r0);
        fair.extend_from_slice(&q0);
        let mut observed = Vec::with_capacity(nq + 1);
        observed.push(rt);
        observed.extend_from_slice(&qt);
        ds.push_row(&[a], &fair, &observed, y0, yt);
    }
    Ok(ds)
}

/// Several independent sensitive attributes, each with its own label-bias
/// stage applied in order to the label. Features follow [`GenConfig`] with
/// no feature bias and `alpha_a = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiGenConfig {
    pub base: GenConfig,
    pub attributes: Vec<String>,
    pub p_s: Vec<f64>,
    pub beta: Vec<f64>,
    pub noise: Vec<f64>,
}

impl Default for MultiGenConfig {
    fn default() -> Self {
        MultiGenConfig {
            base: GenConfig::standard(3),
            attributes: vec!["hc".into(), "bl".into(), "sm".into()],
            p_s: vec![0.5; 3],
            beta: vec![0.4; 3],
            noise: vec![0.0; 3],
        }
    }
}

impl MultiGenConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        self.base.validate()?;
        let k = self.attributes.len();
        if k == 0 || self.p_s.len() != k || self.beta.len() != k || self.noise.len() != k {
            return Err(DataError::Config("one p_s, beta and noise per attribute".into()));
        }
        for &p in self.p_s.iter().chain(&self.beta).chain(&self.noise) {
            if !(0.0..=1.0).contains(&p) {
                return Err(DataError::Config(format!("{p} is not a probability")));
            }
        }
        Ok(())
    }
}

/// Data for chained label bias over several sensitive attributes.
pub fn generate_multi(config: &MultiGenConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let base = &config.base;
    let k = config.attributes.len();
    let mut ds = Dataset::empty(config.attributes.clone(), base.feature_names());
    let mut q = vec![false; base.n_q];
    let mut s = vec![false; k];
    for row in 0..base.n_rows {
        let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
        rng.set_stream(row as u64);
        let mut u = || rng.random::<f64>();
        for j in 0..k {
            s[j] = u() < config.p_s[j];
        }
        let r = u() < base.p_r;
        for (i, qi) in q.iter_mut().enumerate() {
            *qi = u() < base.q_prob(i, r);
        }
        let mut y_obs_draws = Vec::with_capacity(k);
        for j in 0..k {
            let b = u() < config.beta[j] * if s[j] { 1.0 } else { 0.0 };
            let n = u() < config.noise[j];
            y_obs_draws.push((b, n));
        }
        let z: f64 = rng.sample(StandardNormal);
        let y = base.score(true, r, &q) + base.sigma_y * z > base.s_bar;
        let mut yt = y;
        for &(b, n) in &y_obs_draws {
            yt = (yt && !b) ^ n;
        }
        let mut features = vec![r];
        features.extend_from_slice(&q);
        ds.push_row(&s, &features, &features, y, yt);
    }
    Ok(ds)
}
