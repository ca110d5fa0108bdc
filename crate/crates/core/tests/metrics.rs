use cilo_core::env::{EnvSpec, ExpertActor, UniformRandomActor};
use cilo_core::metrics::{aer, performance};
use cilo_core::pipeline::{eval_seeds, evaluate, references};
use cilo_core::rng::{derive, Stage};
use cilo_core::signature::{normalized_signature_distance, Signature};
use proptest::prelude::*;

#[test]
fn reference_policies_anchor_the_scale() {
    let spec = EnvSpec::double_integrator();
    let seeds = eval_seeds(3, 50);
    let refs = references(&spec, &seeds, 3).unwrap();
    let expert = evaluate(&mut ExpertActor::new(&spec), &spec, &seeds, refs).unwrap();
    assert_eq!(expert.performance, 1.0);
    let again = evaluate(&mut ExpertActor::new(&spec), &spec, &seeds, refs).unwrap();
    assert_eq!(expert, again);
    let mut random = UniformRandomActor::new(&spec, derive(3, Stage::RandomReference, 0));
    assert_eq!(evaluate(&mut random, &spec, &seeds, refs).unwrap().performance, 0.0);
}

#[test]
fn performance_reference_value() {
    let p = performance(6091.0, -65.11, 5544.65).unwrap();
    assert!((p - 1.0974).abs() <= 5e-4, "{p}");
}

#[test]
fn signature_distance_by_hand() {
    // d = 1, k = 2: coefficients (1, Δ, Δ²/2).
    let sig = |delta: f64| Signature::from_coeffs(1, 2, vec![1.0, delta, delta * delta / 2.0]).unwrap();
    let expert = [sig(2.0)];
    let random = [sig(0.0)];
    let agent = sig(1.0);
    // |1 − 2| + |0.5 − 2| over |0 − 2| + |0 − 2|.
    let d = normalized_signature_distance(&agent, &expert, &random).unwrap();
    assert!((d - 2.5 / 4.0).abs() <= 1e-15);
    assert_eq!(normalized_signature_distance(&sig(2.0), &expert, &random).unwrap(), 0.0);
    assert_eq!(normalized_signature_distance(&sig(0.0), &expert, &random).unwrap(), 1.0);
    assert!(normalized_signature_distance(&agent, &expert, &expert).is_err());
}

proptest! {
    #[test]
    fn performance_is_affine_invariant(
        policy in -1e3..1e3f64,
        random in -1e3..1e3f64,
        gap in 1.0..1e3f64,
        scale in 0.01..100.0f64,
        shift in -1e4..1e4f64,
    ) {
        let expert = random + gap;
        let p = performance(policy, random, expert).unwrap();
        let q = performance(scale * policy + shift, scale * random + shift, scale * expert + shift).unwrap();
        prop_assert!((p - q).abs() <= 1e-9 * 1f64.max(p.abs()));
    }

    #[test]
    fn aer_is_mean_of_returns(eps in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 0..20), 1..8)) {
        let expected = eps.iter().map(|e| e.iter().sum::<f64>()).sum::<f64>() / eps.len() as f64;
        prop_assert!((aer(&eps, 1.0).unwrap() - expected).abs() <= 1e-9);
    }
}
