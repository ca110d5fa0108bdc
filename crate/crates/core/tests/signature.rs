mod common;

use cilo_core::signature::{compute_signature, signature_length, Signature, Trajectory};
use cilo_core::Error;
use common::{quadrature_signature, random_states, rng, scaled_err, tensor_product, words};
use proptest::prelude::*;

fn sig(states: &[Vec<f64>], k: usize) -> Signature {
    compute_signature(&Trajectory::from_states(states).unwrap(), k).unwrap()
}

#[test]
fn worked_trajectory() {
    let states: Vec<Vec<f64>> = (1..=10).map(|t| vec![5.0 + t as f64, (5.0 + t as f64).powi(2)]).collect();
    let expected = [1.0, 9.0, 189.0, 40.5, 970.5, 730.5, 17860.5];
    let got = sig(&states, 2);
    assert_eq!(got.coeffs().len(), 7);
    for (g, e) in got.coeffs().iter().zip(expected) {
        assert!((g - e).abs() <= 1e-9, "{g} vs {e}");
    }
}

#[test]
fn matches_quadrature_on_random_polylines() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let states = random_states(&mut r, 4, 2, 2.0);
        let exact = sig(&states, 3);
        let oracle = quadrature_signature(&states, 3, 10_000);
        for (a, b) in exact.coeffs().iter().zip(&oracle) {
            assert!(scaled_err(*a, *b) <= 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn matches_quadrature_in_three_dimensions() {
    let mut r = rng(99);
    let states = random_states(&mut r, 3, 3, 1.0);
    let exact = sig(&states, 3);
    let oracle = quadrature_signature(&states, 3, 10_000);
    for (a, b) in exact.coeffs().iter().zip(&oracle) {
        assert!(scaled_err(*a, *b) <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn word_count_matches_length() {
    for d in 1..=4 {
        for k in 1..=4 {
            assert_eq!(words(d, k).len(), signature_length(d, k).unwrap(), "d={d} k={k}");
        }
    }
    assert_eq!(signature_length(111, 2).unwrap(), 12433);
    assert_eq!(signature_length(2, 2).unwrap(), 7);
    assert_eq!(signature_length(1, 1).unwrap(), 2);
    assert!(matches!(signature_length(1 << 40, 4), Err(Error::Capacity(_))));
}

#[test]
fn coefficient_lookup_follows_word_order() {
    let mut r = rng(3);
    let states = random_states(&mut r, 6, 3, 1.0);
    let s = sig(&states, 3);
    for (i, w) in words(3, 3).iter().enumerate() {
        assert_eq!(s.coeff(w), Some(s.coeffs()[i]), "word {w:?}");
    }
}

#[test]
fn constant_and_single_state_paths() {
    let flat = sig(&vec![vec![0.3, -2.0, 7.0]; 5], 3);
    assert_eq!(flat.coeffs()[0], 1.0);
    assert!(flat.coeffs()[1..].iter().all(|&c| c == 0.0));
    let lone = sig(&[vec![4.0, 4.0]], 2);
    assert_eq!(lone.coeffs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn rejects_bad_input() {
    assert!(Trajectory::from_states(&[vec![0.0], vec![f64::NAN]]).is_err());
    assert!(Trajectory::from_states(&[vec![f64::INFINITY]]).is_err());
    let t = Trajectory::from_states(&[vec![0.0], vec![1.0]]).unwrap();
    assert!(compute_signature(&t, 0).is_err());
}

fn polyline() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=4, 1usize..=12).prop_flat_map(|(d, n)| prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n))
}

proptest! {
    #[test]
    fn shuffle_and_diagonal(states in polyline()) {
        let d = states[0].len();
        let s = sig(&states, 3);
        for i in 0..d {
            let ci = s.coeff(&[i]).unwrap();
            let cii = s.coeff(&[i, i]).unwrap();
            prop_assert!((cii - ci * ci / 2.0).abs() <= 1e-12 * 1f64.max(cii.abs()));
            for j in 0..d {
                let lhs = ci * s.coeff(&[j]).unwrap();
                let rhs = s.coeff(&[i, j]).unwrap() + s.coeff(&[j, i]).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-9 * 1f64.max(lhs.abs()));
            }
        }
    }

    #[test]
    fn level_one_is_total_increment(states in polyline()) {
        let s = sig(&states, 2);
        let (first, last) = (&states[0], states.last().unwrap());
        for (i, c) in s.level(1).iter().enumerate() {
            prop_assert!((c - (last[i] - first[i])).abs() <= 1e-12 * 1f64.max(c.abs()));
        }
    }

    #[test]
    fn subdividing_a_segment_changes_nothing(states in polyline(), at in 0usize..12, lambda in 0.0..1.0f64) {
        prop_assume!(states.len() >= 2);
        let seg = at % (states.len() - 1);
        let mid: Vec<f64> = states[seg].iter().zip(&states[seg + 1]).map(|(a, b)| a + lambda * (b - a)).collect();
        let mut refined = states.clone();
        refined.insert(seg + 1, mid);
        let (a, b) = (sig(&states, 3), sig(&refined, 3));
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            prop_assert!(scaled_err(*x, *y) <= 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn concatenation_is_tensor_product(states in polyline(), cut in 0usize..12) {
        let d = states[0].len();
        let cut = cut % states.len();
        let head = sig(&states[..=cut], 3);
        let tail = sig(&states[cut..], 3);
        let whole = sig(&states, 3);
        let product = tensor_product(head.coeffs(), tail.coeffs(), d, 3);
        for (x, y) in whole.coeffs().iter().zip(&product) {
            prop_assert!(scaled_err(*x, *y) <= 1e-9);
        }
    }

    #[test]
    fn reversed_path_inverts(states in polyline()) {
        let d = states[0].len();
        let mut rev = states.clone();
        rev.reverse();
        let product = tensor_product(sig(&states, 3).coeffs(), sig(&rev, 3).coeffs(), d, 3);
        prop_assert!((product[0] - 1.0).abs() <= 1e-12);
        for c in &product[1..] {
            prop_assert!(c.abs() <= 1e-8, "{}", c);
        }
    }

    #[test]
    fn translation_invariant(states in polyline(), shift in -5.0..5.0f64) {
        let moved: Vec<Vec<f64>> = states.iter().map(|s| s.iter().map(|v| v + shift).collect()).collect();
        let (a, b) = (sig(&states, 3), sig(&moved, 3));
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            prop_assert!(scaled_err(*x, *y) <= 1e-9);
        }
    }

    #[test]
    fn straight_line_levels(delta in -4.0..4.0f64) {
        let s = sig(&[vec![0.0], vec![delta]], 3);
        let expected = [1.0, delta, delta * delta / 2.0, delta.powi(3) / 6.0];
        for (x, y) in s.coeffs().iter().zip(expected) {
            prop_assert!((x - y).abs() <= 1e-12 * 1f64.max(y.abs()));
        }
    }
}
