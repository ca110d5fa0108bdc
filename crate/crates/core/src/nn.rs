//! A small fixed-layer MLP stack with hand-written reverse-mode gradients.
//!
//! All parameters of a model live in one flat buffer; every layer owns a
//! contiguous slice of it. Gradients use the same layout, so the optimiser
//! is a plain loop over two slices.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, input, Error, Result};
use crate::rng::{self, Rng};

/// Layer types available to a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Dense { input: usize, output: usize },
    Tanh,
    /// Residual single-head attention over `tokens × channels` features:
    /// `y = x + γ · softmax(QKᵀ/√c) V`, with `γ` starting at 0.
    SelfAttention { tokens: usize, channels: usize },
    Dropout { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: LayerKind,
}

/// An ordered layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub layers: Vec<LayerSpec>,
}

impl LayerKind {
    fn param_count(&self) -> usize {
        match *self {
            LayerKind::Dense { input, output } => output * input + output,
            LayerKind::SelfAttention { channels, .. } => 3 * channels * channels + 1,
            LayerKind::Tanh | LayerKind::Dropout { .. } => 0,
        }
    }

    /// Output width given the input width, or `None` if incompatible.
    fn chain(&self, width: usize) -> Option<usize> {
        match *self {
            LayerKind::Dense { input, output } => (input == width).then_some(output),
            LayerKind::SelfAttention { tokens, channels } => {
                (tokens * channels == width).then_some(width)
            }
            LayerKind::Tanh => Some(width),
            LayerKind::Dropout { rate } => (0.0..1.0).contains(&rate).then_some(width),
        }
    }

    fn tensors(&self) -> Vec<(&'static str, Vec<usize>)> {
        match *self {
            LayerKind::Dense { input, output } => vec![("w", vec![output, input]), ("b", vec![output])],
            LayerKind::SelfAttention { channels: c, .. } => vec![
                ("wq", vec![c, c]),
                ("wk", vec![c, c]),
                ("wv", vec![c, c]),
                ("gamma", vec![1]),
            ],
            LayerKind::Tanh | LayerKind::Dropout { .. } => Vec::new(),
        }
    }
}

impl Topology {
    fn push(&mut self, name: &str, kind: LayerKind) {
        self.layers.push(LayerSpec { name: name.into(), kind });
    }

    fn attention(width: usize, tokens: usize) -> Result<LayerKind> {
        if tokens == 0 || width % tokens != 0 {
            return Err(input(alloc::format!(
                "attention width {width} is not divisible into {tokens} tokens"
            )));
        }
        Ok(LayerKind::SelfAttention { tokens, channels: width / tokens })
    }

    /// Regressor used for the inverse dynamics model and the policy: input,
    /// four hidden fully connected layers with self-attention after the
    /// second and third, and a linear output.
    pub fn regressor(input_dim: usize, output_dim: usize, width: usize, tokens: usize) -> Result<Self> {
        let dense = |i, o| LayerKind::Dense { input: i, output: o };
        let mut t = Topology { layers: Vec::new() };
        t.push("input", dense(input_dim, width));
        t.push("tanh0", LayerKind::Tanh);
        t.push("fc1", dense(width, width));
        t.push("tanh1", LayerKind::Tanh);
        t.push("attention1", Self::attention(width, tokens)?);
        t.push("fc2", dense(width, width));
        t.push("tanh2", LayerKind::Tanh);
        t.push("attention2", Self::attention(width, tokens)?);
        t.push("fc3", dense(width, width));
        t.push("tanh3", LayerKind::Tanh);
        t.push("fc4", dense(width, width));
        t.push("output", dense(width, output_dim));
        Ok(t)
    }

    /// IDM: `[s_t ; s_{t+1}]` (2d) → action (m).
    pub fn idm(state_dim: usize, action_dim: usize, width: usize, tokens: usize) -> Result<Self> {
        Self::regressor(2 * state_dim, action_dim, width, tokens)
    }

    /// Policy: state (d) → action (m).
    pub fn policy(state_dim: usize, action_dim: usize, width: usize, tokens: usize) -> Result<Self> {
        Self::regressor(state_dim, action_dim, width, tokens)
    }

    /// Discriminator: signature (|β|) → two logits, dropout 0.5 after the
    /// two hidden layers.
    pub fn discriminator(signature_len: usize, width: usize) -> Self {
        let dense = |i, o| LayerKind::Dense { input: i, output: o };
        let mut t = Topology { layers: Vec::new() };
        t.push("input", dense(signature_len, width));
        t.push("tanh0", LayerKind::Tanh);
        t.push("fc1", dense(width, width));
        t.push("tanh1", LayerKind::Tanh);
        t.push("dropout1", LayerKind::Dropout { rate: 0.5 });
        t.push("fc2", dense(width, width));
        t.push("tanh2", LayerKind::Tanh);
        t.push("dropout2", LayerKind::Dropout { rate: 0.5 });
        t.push("output", dense(width, 2));
        t
    }

    /// `(input_dim, output_dim, parameter count)` after checking that layer
    /// widths chain.
    pub fn validate(&self) -> Result<(usize, usize, usize)> {
        let first = self
            .layers
            .iter()
            .find_map(|l| match l.kind {
                LayerKind::Dense { input, .. } => Some(input),
                LayerKind::SelfAttention { tokens, channels } => Some(tokens * channels),
                _ => None,
            })
            .ok_or_else(|| input("topology needs at least one parametric layer"))?;
        let mut width = first;
        let mut params = 0;
        for (i, l) in self.layers.iter().enumerate() {
            width = l.kind.chain(width).ok_or_else(|| {
                Error::Input(alloc::format!("layer {i} ({}) does not accept width {width}", l.name))
            })?;
            params += l.kind.param_count();
        }
        Ok((first, width, params))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
struct Layer {
    kind: LayerKind,
    offset: usize,
}

/// Differentiable approximator over a [`Topology`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    topology: Topology,
    offsets: Vec<usize>,
    params: Vec<f64>,
    input_dim: usize,
    output_dim: usize,
}

/// Cached activations needed by [`MlpModel::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// `acts[i]` is the input of layer `i`; the last entry is the output.
    acts: Vec<Vec<f64>>,
    extra: Vec<LayerCache>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    None,
    Mask(Vec<f64>),
    Attention { q: Vec<f64>, k: Vec<f64>, v: Vec<f64>, weights: Vec<f64>, attended: Vec<f64> },
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape holds at least the input")
    }
}

impl MlpModel {
    /// Fresh model: dense weights and biases uniform in `±1/√fan_in`,
    /// attention projections uniform in `±1/√channels`, gates at 0.
    pub fn new(topology: Topology, seed: u64) -> Result<Self> {
        let (input_dim, output_dim, count) = topology.validate()?;
        let mut r = rng::rng(seed);
        let mut params = Vec::with_capacity(count);
        for l in &topology.layers {
            match l.kind {
                LayerKind::Dense { input, output } => {
                    let bound = 1.0 / libm::sqrt(input as f64);
                    params.extend((0..output * input + output).map(|_| r.random_range(-bound..bound)));
                }
                LayerKind::SelfAttention { channels, .. } => {
                    let bound = 1.0 / libm::sqrt(channels as f64);
                    params.extend((0..3 * channels * channels).map(|_| r.random_range(-bound..bound)));
                    params.push(0.0);
                }
                LayerKind::Tanh | LayerKind::Dropout { .. } => {}
            }
        }
        Ok(Self::assemble(topology, params, input_dim, output_dim))
    }

    /// Rebuilds a model from a topology and a flat parameter buffer.
    pub fn from_parts(topology: Topology, params: Vec<f64>) -> Result<Self> {
        let (input_dim, output_dim, count) = topology.validate()?;
        check_len(count, params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(input("model parameters must be finite"));
        }
        Ok(Self::assemble(topology, params, input_dim, output_dim))
    }

    fn assemble(topology: Topology, params: Vec<f64>, input_dim: usize, output_dim: usize) -> Self {
        let mut offsets = Vec::with_capacity(topology.layers.len());
        let mut at = 0;
        for l in &topology.layers {
            offsets.push(at);
            at += l.kind.param_count();
        }
        Self { topology, offsets, params, input_dim, output_dim }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Named parameter tensors in storage order: `(layer.tensor, shape, values)`.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (l, &off) in self.topology.layers.iter().zip(&self.offsets) {
            let mut at = off;
            for (name, shape) in l.kind.tensors() {
                let n: usize = shape.iter().product();
                out.push((alloc::format!("{}.{name}", l.name), shape, &self.params[at..at + n]));
                at += n;
            }
        }
        out
    }

    fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        self.topology
            .layers
            .iter()
            .zip(&self.offsets)
            .map(|(l, &offset)| Layer { kind: l.kind.clone(), offset })
    }

    /// Forward pass. In eval mode `rng` is never touched.
    pub fn forward(&self, x: &[f64], mode: Mode, rng: &mut Rng) -> Result<Vec<f64>> {
        let mut tape = self.forward_tape(x, mode, rng)?;
        Ok(tape.acts.pop().unwrap_or_default())
    }

    /// Deterministic forward pass (dropout off).
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim, x.len())?;
        let mut h = x.to_vec();
        for (i, layer) in self.layers().enumerate() {
            let (next, _) = self.apply(&layer, &h, Mode::Eval, None)?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { context: "forward", layer: Some(i) });
            }
            h = next;
        }
        Ok(h)
    }

    pub fn forward_tape(&self, x: &[f64], mode: Mode, rng: &mut Rng) -> Result<Tape> {
        check_len(self.input_dim, x.len())?;
        let mut acts = Vec::with_capacity(self.topology.layers.len() + 1);
        let mut extra = Vec::with_capacity(self.topology.layers.len());
        acts.push(x.to_vec());
        for (i, layer) in self.layers().enumerate() {
            let h = acts.last().expect("nonempty");
            let (next, cache) = self.apply(&layer, h, mode, Some(&mut *rng))?;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { context: "forward", layer: Some(i) });
            }
            acts.push(next);
            extra.push(cache);
        }
        Ok(Tape { acts, extra })
    }

    fn apply(&self, layer: &Layer, h: &[f64], mode: Mode, rng: Option<&mut Rng>) -> Result<(Vec<f64>, LayerCache)> {
        let p = &self.params[layer.offset..layer.offset + layer.kind.param_count()];
        Ok(match layer.kind {
            LayerKind::Dense { input, output } => {
                let (w, b) = p.split_at(output * input);
                let y = w
                    .chunks_exact(input)
                    .zip(b)
                    .map(|(row, bias)| bias + dot(row, h))
                    .collect();
                (y, LayerCache::None)
            }
            LayerKind::Tanh => (h.iter().map(|&v| libm::tanh(v)).collect(), LayerCache::None),
            LayerKind::Dropout { rate } => match (mode, rng) {
                (Mode::Train, Some(r)) if rate > 0.0 => {
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> = h
                        .iter()
                        .map(|_| if r.random::<f64>() < rate { 0.0 } else { keep })
                        .collect();
                    (h.iter().zip(&mask).map(|(a, m)| a * m).collect(), LayerCache::Mask(mask))
                }
                _ => (h.to_vec(), LayerCache::None),
            },
            LayerKind::SelfAttention { tokens, channels } => attention_forward(p, h, tokens, channels),
        })
    }

    /// Reverse pass through a recorded tape. Accumulates parameter gradients
    /// into `grads` and returns the gradient with respect to the input.
    pub fn backward(&self, tape: &Tape, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        check_len(self.output_dim, upstream.len())?;
        check_len(self.params.len(), grads.len())?;
        let mut g = upstream.to_vec();
        let layers: Vec<Layer> = self.layers().collect();
        for (i, layer) in layers.iter().enumerate().rev() {
            let x = &tape.acts[i];
            let y = &tape.acts[i + 1];
            let n = layer.kind.param_count();
            let p = &self.params[layer.offset..layer.offset + n];
            let gp = &mut grads[layer.offset..layer.offset + n];
            g = match (&layer.kind, &tape.extra[i]) {
                (&LayerKind::Dense { input, output }, _) => {
                    let (w, _) = p.split_at(output * input);
                    let (gw, gb) = gp.split_at_mut(output * input);
                    let mut gx = vec![0.0; input];
                    for (o, &go) in g.iter().enumerate() {
                        gb[o] += go;
                        let row = &w[o * input..(o + 1) * input];
                        let grow = &mut gw[o * input..(o + 1) * input];
                        for ((gwi, xi), (gxi, wi)) in grow.iter_mut().zip(x).zip(gx.iter_mut().zip(row)) {
                            *gwi += go * xi;
                            *gxi += go * wi;
                        }
                    }
                    gx
                }
                (LayerKind::Tanh, _) => g.iter().zip(y).map(|(go, yo)| go * (1.0 - yo * yo)).collect(),
                (LayerKind::Dropout { .. }, LayerCache::Mask(mask)) => {
                    g.iter().zip(mask).map(|(go, m)| go * m).collect()
                }
                (LayerKind::Dropout { .. }, _) => g,
                (&LayerKind::SelfAttention { tokens, channels }, LayerCache::Attention { q, k, v, weights, attended }) => {
                    attention_backward(p, gp, x, &g, tokens, channels, q, k, v, weights, attended)
                }
                (LayerKind::SelfAttention { .. }, _) => unreachable!("attention tape entry"),
            };
        }
        Ok(g)
    }

    /// Eval-mode parameter gradient of `upstream · f(x)`.
    pub fn gradient(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let mut r = rng::rng(0);
        let tape = self.forward_tape(x, Mode::Eval, &mut r)?;
        let mut grads = vec![0.0; self.params.len()];
        self.backward(&tape, upstream, &mut grads)?;
        Ok(grads)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[t] = W · x[t]` for each token.
fn project(w: &[f64], x: &[f64], channels: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (xt, ot) in x.chunks_exact(channels).zip(out.chunks_exact_mut(channels)) {
        for (o, row) in ot.iter_mut().zip(w.chunks_exact(channels)) {
            *o = dot(row, xt);
        }
    }
    out
}

fn attention_forward(p: &[f64], x: &[f64], tokens: usize, c: usize) -> (Vec<f64>, LayerCache) {
    let cc = c * c;
    let (wq, rest) = p.split_at(cc);
    let (wk, rest) = rest.split_at(cc);
    let (wv, gamma) = rest.split_at(cc);
    let gamma = gamma[0];
    let q = project(wq, x, c);
    let k = project(wk, x, c);
    let v = project(wv, x, c);
    let scale = 1.0 / libm::sqrt(c as f64);
    let mut weights = vec![0.0; tokens * tokens];
    let mut attended = vec![0.0; tokens * c];
    for i in 0..tokens {
        let qi = &q[i * c..(i + 1) * c];
        let row = &mut weights[i * tokens..(i + 1) * tokens];
        for (j, s) in row.iter_mut().enumerate() {
            *s = dot(qi, &k[j * c..(j + 1) * c]) * scale;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for s in row.iter_mut() {
            *s = libm::exp(*s - max);
            sum += *s;
        }
        row.iter_mut().for_each(|s| *s /= sum);
        let oi = &mut attended[i * c..(i + 1) * c];
        for (j, &a) in row.iter().enumerate() {
            for (o, vj) in oi.iter_mut().zip(&v[j * c..(j + 1) * c]) {
                *o += a * vj;
            }
        }
    }
    let y = x.iter().zip(&attended).map(|(xi, oi)| xi + gamma * oi).collect();
    (y, LayerCache::Attention { q, k, v, weights, attended })
}

#[allow(clippy::too_many_arguments)]
fn attention_backward(
    p: &[f64],
    gp: &mut [f64],
    x: &[f64],
    gy: &[f64],
    tokens: usize,
    c: usize,
    q: &[f64],
    k: &[f64],
    v: &[f64],
    weights: &[f64],
    attended: &[f64],
) -> Vec<f64> {
    let cc = c * c;
    let gamma = p[3 * cc];
    gp[3 * cc] += dot(gy, attended);
    let go: Vec<f64> = gy.iter().map(|g| g * gamma).collect();
    let scale = 1.0 / libm::sqrt(c as f64);

    let mut gq = vec![0.0; tokens * c];
    let mut gk = vec![0.0; tokens * c];
    let mut gv = vec![0.0; tokens * c];
    for i in 0..tokens {
        let goi = &go[i * c..(i + 1) * c];
        let a = &weights[i * tokens..(i + 1) * tokens];
        // dA_ij = go_i · v_j
        let ga: Vec<f64> = (0..tokens).map(|j| dot(goi, &v[j * c..(j + 1) * c])).collect();
        let mean = dot(a, &ga);
        for j in 0..tokens {
            for (g, o) in gv[j * c..(j + 1) * c].iter_mut().zip(goi) {
                *g += a[j] * o;
            }
            let gs = a[j] * (ga[j] - mean) * scale;
            if gs == 0.0 {
                continue;
            }
            for ch in 0..c {
                gq[i * c + ch] += gs * k[j * c + ch];
                gk[j * c + ch] += gs * q[i * c + ch];
            }
        }
    }

    let mut gx = gy.to_vec();
    for (slot, gproj) in [&gq, &gk, &gv].into_iter().enumerate() {
        let w = &p[slot * cc..(slot + 1) * cc];
        let gw = &mut gp[slot * cc..(slot + 1) * cc];
        for t in 0..tokens {
            let xt = &x[t * c..(t + 1) * c];
            let gt = &gproj[t * c..(t + 1) * c];
            for (r, &g) in gt.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for ch in 0..c {
                    gw[r * c + ch] += g * xt[ch];
                    gx[t * c + ch] += g * w[r * c + ch];
                }
            }
        }
    }
    gx
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: vec![0.0; param_count],
            second: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_len(self.first.len(), params.len())?;
        check_len(self.first.len(), grads.len())?;
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric { context: "adam_step", layer: None });
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= self.lr * mhat / (libm::sqrt(vhat) + self.eps);
        }
        Ok(())
    }
}

/// `Σ |pred_i - target_i|`.
pub fn l1_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_len(pred.len(), target.len())?;
    Ok(pred.iter().zip(target).map(|(p, t)| libm::fabs(p - t)).sum())
}

/// Subgradient of [`l1_loss`] with respect to `pred` (0 where equal).
pub fn l1_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_len(pred.len(), target.len())?;
    Ok(pred.iter().zip(target).map(|(p, t)| sign(p - t)).collect())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Class probabilities from logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`, computed with log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(input("class label out of range"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&l| libm::exp(l - max)).sum::<f64>());
    Ok(lse - logits[label])
}

/// Gradient of [`cross_entropy`] with respect to the logits.
pub fn cross_entropy_grad(logits: &[f64], label: usize) -> Result<Vec<f64>> {
    if label >= logits.len() {
        return Err(input("class label out of range"));
    }
    let mut g = softmax(logits);
    g[label] -= 1.0;
    Ok(g)
}
