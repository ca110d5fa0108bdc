use cilo_core::dataset::{concat, minibatch_indices, upscale_expert, Episode, Origin, Source, Transition, TrajectorySet, TransitionSet};
use cilo_core::signature::Trajectory;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn set_of(n: usize, origin: Origin, tag: f64) -> TransitionSet {
    let mut s = TransitionSet::new(1, 1);
    for i in 0..n {
        s.push(Transition {
            state: vec![tag + i as f64],
            action: Some(vec![0.0]),
            next_state: vec![tag + i as f64 + 1.0],
            origin,
        })
        .unwrap();
    }
    s
}

#[test]
fn minibatch_draws_are_uniform() {
    let population = 10;
    let mut counts = [0usize; 10];
    let draws = 10_000;
    for seed in 0..draws {
        counts[minibatch_indices(population, 1, seed as u64).unwrap()[0]] += 1;
    }
    let expected = draws as f64 / population as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((population - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn minibatch_edge_cases() {
    let s = set_of(5, Origin::Pre, 0.0);
    let all = s.sample_minibatch(5, 3).unwrap();
    let mut seen: Vec<f64> = all.iter().map(|t| t.state[0]).collect();
    seen.sort_by(f64::total_cmp);
    assert_eq!(seen, [0.0, 1.0, 2.0, 3.0, 4.0]);
    assert_eq!(s.sample_minibatch(1, 9).unwrap(), s.sample_minibatch(1, 9).unwrap());
    assert!(s.sample_minibatch(6, 0).is_err());
}

#[test]
fn concat_orders_pre_first() {
    let pre = set_of(2, Origin::Pre, 0.0);
    let pos = set_of(3, Origin::Pos, 100.0);
    let both = concat(&pre, &pos).unwrap();
    assert_eq!(both.len(), 5);
    assert_eq!(&both.records()[..2], pre.records());
    assert_eq!(&both.records()[2..], pos.records());
    assert_eq!(concat(&pre, &TransitionSet::new(1, 1)).unwrap(), pre);
    assert_eq!(concat(&set_of(35_000, Origin::Pre, 0.0), &TransitionSet::new(1, 1)).unwrap().len(), 35_000);
    assert!(concat(&pre, &TransitionSet::new(2, 1)).is_err());
}

#[test]
fn upscale_single_transition() {
    let mut e = TrajectorySet::new(2, 1, Source::Expert, 0);
    e.push(Episode { trajectory: Trajectory::from_states(&[[0.0, 1.0], [2.0, 3.0]]).unwrap(), actions: None })
        .unwrap();
    let up = upscale_expert(&e, 3).unwrap();
    assert_eq!(up.len(), 3);
    assert!(up.iter().all(|t| t == up.get(0).unwrap() && t.action.is_none()));
    assert!(upscale_expert(&e, 0).is_err());
}

fn trajectory_set() -> impl Strategy<Value = TrajectorySet> {
    prop::collection::vec(1usize..9, 1..6).prop_map(|lengths| {
        let mut set = TrajectorySet::new(2, 1, Source::Expert, 0);
        for (e, n) in lengths.into_iter().enumerate() {
            let states: Vec<[f64; 2]> = (0..n).map(|t| [e as f64, t as f64]).collect();
            let actions = Some((1..n).map(|t| vec![t as f64]).collect());
            set.push(Episode { trajectory: Trajectory::from_states(&states).unwrap(), actions }).unwrap();
        }
        set
    })
}

proptest! {
    #[test]
    fn upscale_cardinality(set in trajectory_set(), factor in 1usize..5) {
        let transitions: usize = set.episodes().iter().map(|e| e.trajectory.len() - 1).sum();
        let up = upscale_expert(&set, factor).unwrap();
        prop_assert_eq!(up.len(), factor * transitions);
        prop_assert!(up.iter().all(|t| t.action.is_none() && t.origin == Origin::Expert));
    }

    #[test]
    fn concat_cardinality(a in 0usize..40, b in 0usize..40) {
        let both = concat(&set_of(a, Origin::Pre, 0.0), &set_of(b, Origin::Pos, 1e3)).unwrap();
        prop_assert_eq!(both.len(), a + b);
    }

    #[test]
    fn split_partitions(n in 0usize..200, f in 0.0..0.95f64, seed in any::<u64>()) {
        let s = set_of(n, Origin::Pre, 0.0);
        let (train, val) = s.split(f, seed).unwrap();
        prop_assert_eq!(val.len(), (n as f64 * f).round() as usize);
        prop_assert_eq!(train.len() + val.len(), n);
    }
}
