//! Minimal dense-network stack: forward/backward passes over ReLU MLPs,
//! Adam with bias correction, soft target updates, and a text weight format
//! that round-trips bit-exactly.
//!
//! This is all the machinery the TD3 actors/critics and the supervised
//! regressor need; there is no autograd graph, just hand-derived
//! reverse-mode passes for the one architecture family in use.

use crate::util::fmt_f64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("input length {got} does not match first layer size {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("gradient length {got} does not match output size {expected}")]
    OutputLength { expected: usize, got: usize },
    #[error("network architectures do not match")]
    ArchMismatch,
    #[error("malformed weight document: {0}")]
    Parse(String),
}

/// Output head: linear, or per-dimension `b * tanh(z)` mapping into [-b, b].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    TanhScaled(Vec<f64>),
}

/// Dense multi-layer perceptron with ReLU hidden activations.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Row-major (out x in) weight matrix per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    output: OutputActivation,
}

/// Parameter-shaped gradient (or moment) storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            for x in w {
                *x *= s;
            }
        }
        for b in &mut self.biases {
            for x in b {
                *x *= s;
            }
        }
    }
}

/// Cached activations from `forward_cached`, consumed by `backward`.
pub struct ForwardCache {
    /// activations[0] is the input; activations[l+1] = act(z_l).
    activations: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    zs: Vec<Vec<f64>>,
}

impl Mlp {
    /// He-initialized network. The final layer starts at 1/100 scale so a
    /// freshly bootstrapped actor proposes near-zero actions.
    pub fn new(sizes: &[usize], output: OutputActivation, rng: &mut ChaCha8Rng) -> Mlp {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        if let OutputActivation::TanhScaled(b) = &output {
            assert_eq!(b.len(), *sizes.last().unwrap(), "one bound per output dim");
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let layers = sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).unwrap();
            let scale = if l == layers - 1 { 0.01 } else { 1.0 };
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| scale * normal.sample(rng))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Mlp { sizes: sizes.to_vec(), weights, biases, output }
    }

    pub fn zeroed(sizes: &[usize], output: OutputActivation) -> Mlp {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            weights.push(vec![0.0; sizes[l] * sizes[l + 1]]);
            biases.push(vec![0.0; sizes[l + 1]]);
        }
        Mlp { sizes: sizes.to_vec(), weights, biases, output }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> &OutputActivation {
        &self.output
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn apply_output(&self, z: &[f64]) -> Vec<f64> {
        match &self.output {
            OutputActivation::Identity => z.to_vec(),
            OutputActivation::TanhScaled(bounds) => {
                z.iter().zip(bounds).map(|(x, b)| b * x.tanh()).collect()
            }
        }
    }

    pub fn try_forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::InputLength { expected: self.input_dim(), got: input.len() });
        }
        let mut a = input.to_vec();
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let z = self.affine(l, &a);
            a = if l + 1 < layers {
                z.into_iter().map(|x| x.max(0.0)).collect()
            } else {
                self.apply_output(&z)
            };
        }
        Ok(a)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.try_forward(input).expect("input dimension mismatch")
    }

    fn affine(&self, l: usize, a: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.weights[l];
        let mut z = self.biases[l].clone();
        for i in 0..n_out {
            let row = &w[i * n_in..(i + 1) * n_in];
            let mut acc = 0.0;
            for (x, y) in row.iter().zip(a) {
                acc += x * y;
            }
            z[i] += acc;
        }
        z
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::InputLength { expected: self.input_dim(), got: input.len() });
        }
        let layers = self.sizes.len() - 1;
        let mut activations = vec![input.to_vec()];
        let mut zs = Vec::with_capacity(layers);
        for l in 0..layers {
            let z = self.affine(l, &activations[l]);
            let a = if l + 1 < layers {
                z.iter().map(|x| x.max(0.0)).collect()
            } else {
                self.apply_output(&z)
            };
            zs.push(z);
            activations.push(a);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, ForwardCache { activations, zs }))
    }

    /// Exact reverse-mode gradients of `output . out_grad` with respect to
    /// all parameters, plus the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        out_grad: &[f64],
    ) -> Result<(Gradients, Vec<f64>), NnError> {
        if out_grad.len() != self.output_dim() {
            return Err(NnError::OutputLength { expected: self.output_dim(), got: out_grad.len() });
        }
        let layers = self.sizes.len() - 1;
        let mut grads = Gradients::zeros_like(self);
        // Head derivative.
        let z_last = &cache.zs[layers - 1];
        let mut delta: Vec<f64> = match &self.output {
            OutputActivation::Identity => out_grad.to_vec(),
            OutputActivation::TanhScaled(bounds) => z_last
                .iter()
                .zip(bounds)
                .zip(out_grad)
                .map(|((z, b), g)| {
                    let t = z.tanh();
                    g * b * (1.0 - t * t)
                })
                .collect(),
        };
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let a_prev = &cache.activations[l];
            for i in 0..n_out {
                let gw = &mut grads.weights[l][i * n_in..(i + 1) * n_in];
                for (g, a) in gw.iter_mut().zip(a_prev) {
                    *g += delta[i] * a;
                }
                grads.biases[l][i] += delta[i];
            }
            // Propagate to the previous layer (or the input for l == 0).
            let w = &self.weights[l];
            let mut prev = vec![0.0; n_in];
            for i in 0..n_out {
                let row = &w[i * n_in..(i + 1) * n_in];
                for (p, x) in prev.iter_mut().zip(row) {
                    *p += delta[i] * x;
                }
            }
            if l > 0 {
                for (p, z) in prev.iter_mut().zip(&cache.zs[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        Ok((grads, delta))
    }

    /// Flat parameter view, for finite-difference probing and diagnostics.
    pub fn get_param(&self, index: usize) -> f64 {
        let (loc, idx) = self.locate(index);
        match loc {
            ParamLoc::Weight(l) => self.weights[l][idx],
            ParamLoc::Bias(l) => self.biases[l][idx],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (loc, idx) = self.locate(index);
        match loc {
            ParamLoc::Weight(l) => self.weights[l][idx] = value,
            ParamLoc::Bias(l) => self.biases[l][idx] = value,
        }
    }

    /// Flat gradient entry corresponding to `get_param` indexing.
    pub fn grad_entry(&self, grads: &Gradients, index: usize) -> f64 {
        let (loc, idx) = self.locate(index);
        match loc {
            ParamLoc::Weight(l) => grads.weights[l][idx],
            ParamLoc::Bias(l) => grads.biases[l][idx],
        }
    }

    fn locate(&self, mut index: usize) -> (ParamLoc, usize) {
        for l in 0..self.weights.len() {
            if index < self.weights[l].len() {
                return (ParamLoc::Weight(l), index);
            }
            index -= self.weights[l].len();
            if index < self.biases[l].len() {
                return (ParamLoc::Bias(l), index);
            }
            index -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    /// Versioned text document with 17-significant-digit values; parsing
    /// recovers the exact parameters.
    pub fn to_document(&self) -> String {
        let mut s = String::new();
        s.push_str("mlp v1\n");
        s.push_str("sizes");
        for n in &self.sizes {
            s.push_str(&format!(" {n}"));
        }
        s.push('\n');
        match &self.output {
            OutputActivation::Identity => s.push_str("activation identity\n"),
            OutputActivation::TanhScaled(b) => {
                s.push_str("activation tanh-scaled");
                for x in b {
                    s.push_str(&format!(" {}", fmt_f64(*x)));
                }
                s.push('\n');
            }
        }
        for l in 0..self.weights.len() {
            s.push_str(&format!("w{l}"));
            for x in &self.weights[l] {
                s.push_str(&format!(" {}", fmt_f64(*x)));
            }
            s.push('\n');
            s.push_str(&format!("b{l}"));
            for x in &self.biases[l] {
                s.push_str(&format!(" {}", fmt_f64(*x)));
            }
            s.push('\n');
        }
        s.push_str("end\n");
        s
    }

    pub fn from_document(doc: &str) -> Result<Mlp, NnError> {
        let mut lines = doc.lines();
        let parse_err = |m: &str| NnError::Parse(m.to_string());
        if lines.next() != Some("mlp v1") {
            return Err(parse_err("missing 'mlp v1' header"));
        }
        let sizes_line = lines.next().ok_or_else(|| parse_err("missing sizes"))?;
        let mut it = sizes_line.split_whitespace();
        if it.next() != Some("sizes") {
            return Err(parse_err("expected sizes line"));
        }
        let sizes: Vec<usize> = it
            .map(|t| t.parse().map_err(|_| parse_err("bad size")))
            .collect::<Result<_, _>>()?;
        if sizes.len() < 2 {
            return Err(parse_err("need at least two layer sizes"));
        }
        let act_line = lines.next().ok_or_else(|| parse_err("missing activation"))?;
        let mut it = act_line.split_whitespace();
        if it.next() != Some("activation") {
            return Err(parse_err("expected activation line"));
        }
        let output = match it.next() {
            Some("identity") => OutputActivation::Identity,
            Some("tanh-scaled") => {
                let b: Vec<f64> = it
                    .map(|t| t.parse().map_err(|_| parse_err("bad bound")))
                    .collect::<Result<_, _>>()?;
                if b.len() != *sizes.last().unwrap() {
                    return Err(parse_err("bound count mismatch"));
                }
                OutputActivation::TanhScaled(b)
            }
            _ => return Err(parse_err("unknown activation")),
        };
        let mut net = Mlp::zeroed(&sizes, output);
        for l in 0..sizes.len() - 1 {
            for (tag, store, expected) in [
                ("w", true, sizes[l] * sizes[l + 1]),
                ("b", false, sizes[l + 1]),
            ] {
                let line = lines.next().ok_or_else(|| parse_err("missing layer line"))?;
                let mut it = line.split_whitespace();
                if it.next() != Some(format!("{tag}{l}").as_str()) {
                    return Err(parse_err("unexpected layer tag"));
                }
                let vals: Vec<f64> = it
                    .map(|t| t.parse().map_err(|_| parse_err("bad value")))
                    .collect::<Result<_, _>>()?;
                if vals.len() != expected {
                    return Err(parse_err("value count mismatch"));
                }
                if store {
                    net.weights[l] = vals;
                } else {
                    net.biases[l] = vals;
                }
            }
        }
        if lines.next() != Some("end") {
            return Err(parse_err("missing end marker"));
        }
        Ok(net)
    }
}

enum ParamLoc {
    Weight(usize),
    Bias(usize),
}

/// Adam optimizer state for one network.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, alpha: f64) -> AdamState {
        AdamState {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, st: &mut AdamState) {
    st.step += 1;
    let t = st.step as i32;
    let bc1 = 1.0 - st.beta1.powi(t);
    let bc2 = 1.0 - st.beta2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = st.beta1 * *m + (1.0 - st.beta1) * g;
        *v = st.beta2 * *v + (1.0 - st.beta2) * g * g;
        let mhat = *m / bc1;
        let vhat = *v / bc2;
        *p -= st.alpha * mhat / (vhat.sqrt() + st.eps);
    };
    for l in 0..net.weights.len() {
        for i in 0..net.weights[l].len() {
            let g = grads.weights[l][i];
            let w = &mut net.weights[l][i];
            update(w, g, &mut st.m.weights[l][i], &mut st.v.weights[l][i]);
        }
        for i in 0..net.biases[l].len() {
            let g = grads.biases[l][i];
            let b = &mut net.biases[l][i];
            update(b, g, &mut st.m.biases[l][i], &mut st.v.biases[l][i]);
        }
    }
}

/// Polyak averaging: `target <- tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<(), NnError> {
    if target.sizes != source.sizes || target.output != source.output {
        return Err(NnError::ArchMismatch);
    }
    for l in 0..target.weights.len() {
        for (t, s) in target.weights[l].iter_mut().zip(&source.weights[l]) {
            *t = tau * s + (1.0 - tau) * *t;
        }
        for (t, s) in target.biases[l].iter_mut().zip(&source.biases[l]) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }
    Ok(())
}

/// Mean-squared-error gradient helper: returns d/dy of `0.5 * |y - target|^2`
/// scaled by 2 (plain MSE convention), i.e. `y - target` per component.
pub fn mse_grad(output: &[f64], target: &[f64]) -> Vec<f64> {
    output.iter().zip(target).map(|(y, t)| y - t).collect()
}
