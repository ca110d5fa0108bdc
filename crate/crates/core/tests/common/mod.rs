//! Test-only reference implementations, written independently of the
//! library code paths they check.
#![allow(dead_code)]

use cilo_core::nn::{LayerKind, LayerSpec, MlpModel, Mode, Topology};
use cilo_core::rng::rng as nn_rng;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All words of length `0..=k` over `0..d`, shortest first, lexicographic
/// within a length.
pub fn words(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for w in &level {
            for letter in 0..d {
                let mut v: Vec<usize> = w.clone();
                v.push(letter);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Iterated integrals of the polyline through `states`, integrated with the
/// trapezoid rule on `substeps` uniform pieces per segment.
///
/// For every word `w = u·j`, `I_w(t) = ∫_0^t I_u dx_j`; the recursion is
/// advanced jointly over all words at each grid point.
pub fn quadrature_signature(states: &[Vec<f64>], depth: usize, substeps: usize) -> Vec<f64> {
    let d = states[0].len();
    let ws = words(d, depth);
    let index = |w: &[usize]| ws.iter().position(|x| x.as_slice() == w).unwrap();
    let prefix: Vec<Option<usize>> =
        ws.iter().map(|w| if w.is_empty() { None } else { Some(index(&w[..w.len() - 1])) }).collect();
    let mut cur = vec![0.0; ws.len()];
    cur[0] = 1.0;
    for seg in states.windows(2) {
        let delta: Vec<f64> = seg[0].iter().zip(&seg[1]).map(|(a, b)| (b - a) / substeps as f64).collect();
        for _ in 0..substeps {
            let mut next = cur.clone();
            // Words are ordered by length, so prefixes are updated first.
            for (wi, w) in ws.iter().enumerate().skip(1) {
                let u = prefix[wi].unwrap();
                let j = *w.last().unwrap();
                next[wi] = cur[wi] + 0.5 * (cur[u] + next[u]) * delta[j];
            }
            cur = next;
        }
    }
    cur
}

/// Truncated tensor product of two signatures in the level-major layout.
pub fn tensor_product(a: &[f64], b: &[f64], d: usize, k: usize) -> Vec<f64> {
    let ws = words(d, k);
    let index = |w: &[usize]| ws.iter().position(|x| x.as_slice() == w).unwrap();
    ws.iter()
        .map(|w| (0..=w.len()).map(|cut| a[index(&w[..cut])] * b[index(&w[cut..])]).sum())
        .collect()
}

pub fn random_states(r: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| r.random_range(-scale..scale)).collect()).collect()
}

/// Central finite differences of `f` at `x`.
pub fn numeric_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn scaled_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

pub fn layer(name: &str, kind: LayerKind) -> LayerSpec {
    LayerSpec { name: name.into(), kind }
}

pub fn dense(name: &str, input: usize, output: usize) -> LayerSpec {
    layer(name, LayerKind::Dense { input, output })
}

/// One small network per layer type, plus the two full builders.
pub fn probes() -> Vec<(&'static str, Topology, Mode)> {
    vec![
        ("dense", Topology { layers: vec![dense("a", 3, 4)] }, Mode::Eval),
        (
            "tanh",
            Topology { layers: vec![dense("a", 3, 4), layer("t", LayerKind::Tanh), dense("b", 4, 2)] },
            Mode::Eval,
        ),
        (
            "attention",
            Topology {
                layers: vec![
                    dense("a", 3, 8),
                    layer("att", LayerKind::SelfAttention { tokens: 2, channels: 4 }),
                    dense("b", 8, 2),
                ],
            },
            Mode::Eval,
        ),
        (
            "dropout",
            Topology {
                layers: vec![
                    dense("a", 3, 6),
                    layer("t", LayerKind::Tanh),
                    layer("drop", LayerKind::Dropout { rate: 0.5 }),
                    dense("b", 6, 2),
                ],
            },
            Mode::Train,
        ),
        ("regressor", Topology::regressor(4, 2, 8, 2).unwrap(), Mode::Eval),
        ("discriminator", Topology::discriminator(7, 8), Mode::Train),
    ]
}

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()) + 1e-8
}

/// Analytic against central-difference gradients, for parameters and
/// inputs, on every probe network over `seeds` random parameter draws.
pub fn gradient_suite(seeds: u64) -> Result<usize, String> {
    let mut checked = 0;
    for (label, topology, mode) in probes() {
        for seed in 0..seeds {
            let mut model = MlpModel::new(topology.clone(), seed).unwrap();
            let mut r = rng(seed + 1000);
            // Random gates so attention contributes.
            for p in model.params_mut() {
                *p = r.random_range(-0.8..0.8);
            }
            let x: Vec<f64> = (0..model.input_dim()).map(|_| r.random_range(-1.5..1.5)).collect();
            let up: Vec<f64> = (0..model.output_dim()).map(|_| r.random_range(-1.0..1.0)).collect();
            let mask_seed = seed ^ 0x5eed;
            let objective = |m: &MlpModel, x: &[f64]| -> f64 {
                let y = m.forward(x, mode, &mut nn_rng(mask_seed)).unwrap();
                y.iter().zip(&up).map(|(a, b)| a * b).sum()
            };

            let tape = model.forward_tape(&x, mode, &mut nn_rng(mask_seed)).unwrap();
            let mut grads = vec![0.0; model.param_count()];
            let gx = model.backward(&tape, &up, &mut grads).unwrap();

            let params = model.params().to_vec();
            let mut probe = model.clone();
            let num_p = numeric_grad(
                &mut |p: &[f64]| {
                    probe.params_mut().copy_from_slice(p);
                    objective(&probe, &x)
                },
                &params,
                1e-5,
            );
            for (i, (a, n)) in grads.iter().zip(&num_p).enumerate() {
                if !close(*a, *n) {
                    return Err(format!("{label} seed {seed} param {i}: {a} vs {n}"));
                }
            }
            let num_x = numeric_grad(&mut |x: &[f64]| objective(&model, x), &x, 1e-5);
            for (i, (a, n)) in gx.iter().zip(&num_x).enumerate() {
                if !close(*a, *n) {
                    return Err(format!("{label} seed {seed} input {i}: {a} vs {n}"));
                }
            }
            checked += grads.len() + gx.len();
        }
    }
    Ok(checked)
}
