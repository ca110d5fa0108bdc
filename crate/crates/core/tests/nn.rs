mod common;

use cilo_core::nn::{
    cross_entropy, cross_entropy_grad, l1_loss, softmax, AdamState, LayerKind, MlpModel, Mode, Topology,
};
use cilo_core::rng;
use common::{dense, gradient_suite, layer};
use proptest::prelude::*;

#[test]
fn gradients_match_finite_differences() {
    if let Err(msg) = gradient_suite(100) {
        panic!("{msg}");
    }
}

#[test]
fn two_layer_forward_matches_matrix_arithmetic() {
    let topology = Topology { layers: vec![dense("a", 3, 4), layer("t", LayerKind::Tanh), dense("b", 4, 2)] };
    let model = MlpModel::new(topology, 17).unwrap();
    let p = model.params();
    let x = [0.2, -0.7, 1.3];
    // Layout: W1 (4x3 row-major), b1 (4), W2 (2x4), b2 (2).
    let (w1, rest) = p.split_at(12);
    let (b1, rest) = rest.split_at(4);
    let (w2, b2) = rest.split_at(8);
    let mut h = [0.0; 4];
    for o in 0..4 {
        let mut acc = b1[o];
        for i in 0..3 {
            acc += w1[o * 3 + i] * x[i];
        }
        h[o] = acc.tanh();
    }
    let mut y = [0.0; 2];
    for o in 0..2 {
        let mut acc = b2[o];
        for i in 0..4 {
            acc += w2[o * 4 + i] * h[i];
        }
        y[o] = acc;
    }
    let got = model.predict(&x).unwrap();
    for (g, e) in got.iter().zip(y) {
        assert!((g - e).abs() <= 1e-12, "{g} vs {e}");
    }
}

#[test]
fn zeroed_network_outputs_final_bias() {
    let topology = Topology::regressor(3, 2, 16, 4).unwrap();
    let mut model = MlpModel::new(topology, 2).unwrap();
    let n = model.param_count();
    model.params_mut().fill(0.0);
    model.params_mut()[n - 2] = 0.25;
    model.params_mut()[n - 1] = -4.0;
    assert_eq!(model.predict(&[9.0, -3.0, 1.0]).unwrap(), [0.25, -4.0]);
}

#[test]
fn eval_forward_is_pure() {
    let model = MlpModel::new(Topology::discriminator(13, 16), 5).unwrap();
    let x: Vec<f64> = (0..13).map(|i| (i as f64 * 0.37).sin()).collect();
    let a = model.forward(&x, Mode::Eval, &mut rng::rng(1)).unwrap();
    let b = model.forward(&x, Mode::Eval, &mut rng::rng(2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, model.predict(&x).unwrap());
}

#[test]
fn fresh_attention_is_identity() {
    let topology = Topology { layers: vec![layer("att", LayerKind::SelfAttention { tokens: 4, channels: 2 })] };
    let model = MlpModel::new(topology, 8).unwrap();
    let x = [0.1, -0.2, 0.3, 0.9, -1.0, 2.0, 0.0, 0.5];
    assert_eq!(model.predict(&x).unwrap(), x);
}

#[test]
fn adam_zero_gradient_and_determinism() {
    let mut params = vec![0.5, -1.0, 2.0];
    let mut adam = AdamState::new(3, 1e-3);
    adam.step(&mut params, &[0.0; 3]).unwrap();
    assert_eq!(params, [0.5, -1.0, 2.0]);
    assert_eq!(adam.step_count(), 1);

    let run = || {
        let mut p = vec![0.1; 4];
        let mut a = AdamState::new(4, 1e-2);
        for t in 0..50 {
            let g: Vec<f64> = p.iter().enumerate().map(|(i, v)| v * (i as f64 + 1.0) - 0.01 * t as f64).collect();
            a.step(&mut p, &g).unwrap();
        }
        p
    };
    assert_eq!(run(), run());
    assert!(adam.step(&mut params, &[f64::NAN, 0.0, 0.0]).is_err());
}

proptest! {
    #[test]
    fn l1_is_elementwise_sum(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..8)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut expected = 0.0;
        for i in 0..p.len() {
            expected += (p[i] - t[i]).abs();
        }
        let got = l1_loss(&p, &t).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * 1f64.max(expected));
    }

    #[test]
    fn cross_entropy_is_negative_log_softmax(a in -20.0..20.0f64, b in -20.0..20.0f64, label in 0usize..2) {
        let logits = [a, b];
        let m = a.max(b);
        let log_z = m + ((a - m).exp() + (b - m).exp()).ln();
        let expected = log_z - logits[label];
        prop_assert!((cross_entropy(&logits, label).unwrap() - expected).abs() <= 1e-12 * 1f64.max(expected));
        let probs = softmax(&logits);
        prop_assert!((probs[0] + probs[1] - 1.0).abs() <= 1e-15);
        let g = cross_entropy_grad(&logits, label).unwrap();
        for k in 0..2 {
            let target = if k == label { 1.0 } else { 0.0 };
            prop_assert!((g[k] - (probs[k] - target)).abs() <= 1e-15);
        }
    }
}

#[test]
fn cross_entropy_reference_points() {
    assert!((cross_entropy(&[0.0, 0.0], 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(cross_entropy(&[50.0, -50.0], 0).unwrap() < 1e-30);
    assert_eq!(l1_loss(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 2.0);
}
