//! Transition pools and trajectory collections.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, input, Error, Result};
use crate::rng;
use crate::signature::Trajectory;

/// Where a transition record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Collected by the randomly initialised policy before training.
    Pre,
    /// Agent transitions admitted by the discriminator.
    Pos,
    /// Expert observations (unlabelled, or pseudo-labelled by the IDM).
    Expert,
}

/// `(s_t, a, s_{t+1})`, with `a` absent for unlabelled observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Option<Vec<f64>>,
    pub next_state: Vec<f64>,
    pub origin: Origin,
}

/// Ordered, shape-homogeneous list of transitions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionSet {
    state_dim: usize,
    action_dim: usize,
    records: Vec<Transition>,
}

impl TransitionSet {
    pub fn new(state_dim: usize, action_dim: usize) -> Self {
        Self { state_dim, action_dim, records: Vec::new() }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Transition] {
        &self.records
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.records.get(i)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Transition> {
        self.records.iter()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        check_len(self.state_dim, t.state.len())?;
        check_len(self.state_dim, t.next_state.len())?;
        if let Some(a) = &t.action {
            check_len(self.action_dim, a.len())?;
            if a.iter().any(|v| !v.is_finite()) {
                return Err(input("transition action must be finite"));
            }
        }
        if t.state.iter().chain(&t.next_state).any(|v| !v.is_finite()) {
            return Err(input("transition state must be finite"));
        }
        self.records.push(t);
        Ok(())
    }

    /// True when every record carries an action.
    pub fn is_labeled(&self) -> bool {
        self.records.iter().all(|r| r.action.is_some())
    }

    fn same_shape(&self, other: &TransitionSet) -> Result<()> {
        check_len(self.state_dim, other.state_dim)?;
        check_len(self.action_dim, other.action_dim)
    }

    /// Drops the oldest `Pos` records until at most `keep` remain.
    pub(crate) fn evict_oldest_pos(&mut self, keep: usize) {
        let pos = self.records.iter().filter(|r| r.origin == Origin::Pos).count();
        let mut excess = pos.saturating_sub(keep);
        self.records.retain(|r| {
            if excess > 0 && r.origin == Origin::Pos {
                excess -= 1;
                false
            } else {
                true
            }
        });
    }

    /// Random partition into `(train, validation)` holding out
    /// `round(len · validation_fraction)` records. Both halves keep the
    /// original record order.
    pub fn split(&self, validation_fraction: f64, seed: u64) -> Result<(TransitionSet, TransitionSet)> {
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(input("validation fraction must lie in [0, 1)"));
        }
        let held = libm::round(self.len() as f64 * validation_fraction) as usize;
        let mut in_val = vec![false; self.len()];
        for i in minibatch_indices(self.len(), held, seed)? {
            in_val[i] = true;
        }
        let mut train = TransitionSet::new(self.state_dim, self.action_dim);
        let mut val = TransitionSet::new(self.state_dim, self.action_dim);
        for (r, v) in self.records.iter().zip(in_val) {
            if v { &mut val } else { &mut train }.records.push(r.clone());
        }
        Ok((train, val))
    }

    /// Uniform sample of `size` records without replacement.
    pub fn sample_minibatch(&self, size: usize, seed: u64) -> Result<TransitionSet> {
        let idx = minibatch_indices(self.len(), size, seed)?;
        Ok(TransitionSet {
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            records: idx.into_iter().map(|i| self.records[i].clone()).collect(),
        })
    }
}

impl<'a> IntoIterator for &'a TransitionSet {
    type Item = &'a Transition;
    type IntoIter = core::slice::Iter<'a, Transition>;
    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// `pre ⊕ pos`, with `pre` records first.
pub fn concat(pre: &TransitionSet, pos: &TransitionSet) -> Result<TransitionSet> {
    pre.same_shape(pos)?;
    let mut out = pre.clone();
    out.records.extend(pos.records.iter().cloned());
    Ok(out)
}

/// Indices of a uniform sample without replacement, deterministic in `seed`.
pub fn minibatch_indices(population: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > population {
        return Err(Error::Input(alloc::format!(
            "minibatch of {size} requested from {population} records"
        )));
    }
    let mut r = rng::rng(seed);
    Ok(index::sample(&mut r, population, size).into_vec())
}

/// Who produced a trajectory collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Expert,
    Agent,
    Random,
}

/// One recorded episode: `n` states and, optionally, the `n - 1` actions
/// taken between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub actions: Option<Vec<Vec<f64>>>,
}

impl Episode {
    pub fn transitions(&self, origin: Origin) -> impl Iterator<Item = Transition> + '_ {
        let traj = &self.trajectory;
        (0..traj.len() - 1).map(move |t| Transition {
            state: traj.state(t).to_vec(),
            action: self.actions.as_ref().map(|a| a[t].clone()),
            next_state: traj.state(t + 1).to_vec(),
            origin,
        })
    }

    /// Same states with the action channel removed.
    pub fn observations_only(&self) -> Episode {
        Episode { trajectory: self.trajectory.clone(), actions: None }
    }
}

/// A homogeneous collection of episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub state_dim: usize,
    pub action_dim: usize,
    pub source: Source,
    pub seed: u64,
    episodes: Vec<Episode>,
}

impl TrajectorySet {
    pub fn new(state_dim: usize, action_dim: usize, source: Source, seed: u64) -> Self {
        Self { state_dim, action_dim, source, seed, episodes: Vec::new() }
    }

    pub fn push(&mut self, ep: Episode) -> Result<()> {
        check_len(self.state_dim, ep.trajectory.dim())?;
        if let Some(actions) = &ep.actions {
            check_len(ep.trajectory.len() - 1, actions.len())?;
            for a in actions {
                check_len(self.action_dim, a.len())?;
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(input("episode action must be finite"));
                }
            }
        }
        self.episodes.push(ep);
        Ok(())
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.episodes.iter().map(|e| e.trajectory.len() - 1).sum()
    }

    /// All transitions, episode-major, tagged with `origin`.
    pub fn to_transitions(&self, origin: Origin) -> TransitionSet {
        let mut set = TransitionSet::new(self.state_dim, self.action_dim);
        set.records = self.episodes.iter().flat_map(|e| e.transitions(origin)).collect();
        set
    }

    /// Copy with every action stripped (the observation-only view an LfO
    /// learner is allowed to see).
    pub fn observations_only(&self) -> TrajectorySet {
        TrajectorySet {
            episodes: self.episodes.iter().map(Episode::observations_only).collect(),
            ..self.clone()
        }
    }
}

/// Replicates every expert transition `factor` times, record-major. Actions
/// are always dropped; labels are produced later by the IDM.
pub fn upscale_expert(expert: &TrajectorySet, factor: usize) -> Result<TransitionSet> {
    if factor == 0 {
        return Err(input("upscale factor must be at least 1"));
    }
    if expert.is_empty() {
        return Err(input("expert set is empty"));
    }
    let mut set = TransitionSet::new(expert.state_dim, expert.action_dim);
    set.records.reserve(expert.transition_count() * factor);
    for ep in expert.episodes() {
        for mut t in ep.transitions(Origin::Expert) {
            t.action = None;
            for _ in 1..factor {
                set.records.push(t.clone());
            }
            set.records.push(t);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(n: usize, offset: f64) -> Episode {
        let states: Vec<[f64; 2]> = (0..n).map(|t| [offset + t as f64, 0.5 * t as f64]).collect();
        Episode {
            trajectory: Trajectory::from_states(&states).unwrap(),
            actions: Some((0..n - 1).map(|t| vec![t as f64]).collect()),
        }
    }

    fn expert_set(count: usize, n: usize) -> TrajectorySet {
        let mut set = TrajectorySet::new(2, 1, Source::Expert, 0);
        for i in 0..count {
            set.push(episode(n, i as f64 * 100.0)).unwrap();
        }
        set
    }

    fn labeled(n: usize, origin: Origin) -> TransitionSet {
        let mut s = TransitionSet::new(1, 1);
        for i in 0..n {
            s.push(Transition {
                state: vec![i as f64],
                action: Some(vec![0.0]),
                next_state: vec![i as f64 + 1.0],
                origin,
            })
            .unwrap();
        }
        s
    }

    #[test]
    fn upscale_counts() {
        let e = expert_set(10, 1000);
        assert_eq!(upscale_expert(&e, 1).unwrap().len(), 9990);
        assert_eq!(upscale_expert(&e, 4).unwrap().len(), 39960);
        assert!(upscale_expert(&e, 0).is_err());
        assert!(upscale_expert(&TrajectorySet::new(2, 1, Source::Expert, 0), 1).is_err());
    }

    #[test]
    fn upscale_single_transition() {
        let e = expert_set(1, 2);
        let up = upscale_expert(&e, 3).unwrap();
        assert_eq!(up.len(), 3);
        assert!(up.iter().all(|t| t.action.is_none() && t.origin == Origin::Expert));
        assert!(up.iter().all(|t| t == up.get(0).unwrap()));
    }

    #[test]
    fn upscale_is_record_major() {
        let e = expert_set(1, 3);
        let up = upscale_expert(&e, 2).unwrap();
        let firsts: Vec<f64> = up.iter().map(|t| t.state[0]).collect();
        assert_eq!(firsts, [0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn concat_orders_pre_first() {
        let pre = labeled(2, Origin::Pre);
        let pos = labeled(3, Origin::Pos);
        let s = concat(&pre, &pos).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(&s.records()[..2], pre.records());
        assert_eq!(&s.records()[2..], pos.records());
        assert_eq!(concat(&pre, &TransitionSet::new(1, 1)).unwrap(), pre);
        assert!(concat(&pre, &TransitionSet::new(2, 1)).is_err());
    }

    #[test]
    fn large_concat_with_empty() {
        let pre = labeled(35_000, Origin::Pre);
        assert_eq!(concat(&pre, &TransitionSet::new(1, 1)).unwrap().len(), 35_000);
    }

    #[test]
    fn split_proportions() {
        let set = labeled(50_000, Origin::Pre);
        let (train, val) = set.split(0.3, 5).unwrap();
        assert_eq!((train.len(), val.len()), (35_000, 15_000));
        let (train, val) = set.split(0.0, 5).unwrap();
        assert_eq!((train.len(), val.len()), (50_000, 0));
        assert!(set.split(1.0, 5).is_err());
    }

    #[test]
    fn split_keeps_order_and_partitions() {
        let set = labeled(10, Origin::Pre);
        let (train, val) = set.split(0.3, 1).unwrap();
        let key = |t: &Transition| t.state[0];
        let mut all: Vec<f64> = train.iter().chain(val.iter()).map(key).collect();
        assert!(train.iter().map(key).collect::<Vec<_>>().windows(2).all(|w| w[0] < w[1]));
        all.sort_by(f64::total_cmp);
        assert_eq!(all, set.iter().map(key).collect::<Vec<_>>());
    }

    #[test]
    fn minibatch_full_is_permutation() {
        let s = labeled(5, Origin::Pre);
        let mut idx = minibatch_indices(5, 5, 3).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, [0, 1, 2, 3, 4]);
        assert_eq!(s.sample_minibatch(1, 9).unwrap(), s.sample_minibatch(1, 9).unwrap());
        assert!(s.sample_minibatch(6, 0).is_err());
    }

    #[test]
    fn eviction_keeps_newest_pos() {
        let mut s = concat(&labeled(2, Origin::Pre), &labeled(4, Origin::Pos)).unwrap();
        s.evict_oldest_pos(1);
        assert_eq!(s.len(), 3);
        assert_eq!(s.records()[2].state, [3.0]);
    }

    #[test]
    fn push_validates_shape() {
        let mut s = TransitionSet::new(2, 1);
        let bad = Transition { state: vec![0.0], action: None, next_state: vec![0.0, 0.0], origin: Origin::Pre };
        assert!(s.push(bad).is_err());
        let mut t = TrajectorySet::new(2, 1, Source::Agent, 0);
        let mut ep = episode(3, 0.0);
        ep.actions.as_mut().unwrap().pop();
        assert!(t.push(ep).is_err());
    }
}
