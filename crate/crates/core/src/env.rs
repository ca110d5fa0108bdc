//! Deterministic toy control tasks with scripted PD experts.
//!
//! Per axis: `x ← x + v·dt`, then `v ← v + a·dt`, with `a` clipped to the
//! action bounds. The per-step reward `−‖x − goal‖₁` is only ever returned
//! next to a rollout, never inside the dataset types the learners consume.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Episode;
use crate::error::{check_len, input, Error, Result};
use crate::rng::{self, Rng};
use crate::signature::Trajectory;

pub const PD_KP: f64 = 1.0;
pub const PD_KD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    DoubleIntegrator1d,
    PointMass2d,
}

impl EnvKind {
    pub fn axes(self) -> usize {
        match self {
            EnvKind::DoubleIntegrator1d => 1,
            EnvKind::PointMass2d => 2,
        }
    }
}

impl core::str::FromStr for EnvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double_integrator_1d" => Ok(EnvKind::DoubleIntegrator1d),
            "point_mass_2d" => Ok(EnvKind::PointMass2d),
            other => Err(Error::Input(alloc::format!("unknown environment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub dt: f64,
    pub horizon: usize,
    /// Per-axis `[lo, hi]` action bounds.
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    /// Initial `[positions.., velocities..]` sampled uniformly in
    /// `[init_low, init_high]`.
    pub init_low: Vec<f64>,
    pub init_high: Vec<f64>,
    pub goal: Vec<f64>,
}

impl EnvSpec {
    /// `x ∈ [-1, 1]`, `v ∈ [-0.5, 0.5]`, goal `x = 1`.
    pub fn double_integrator() -> Self {
        Self {
            kind: EnvKind::DoubleIntegrator1d,
            dt: 0.1,
            horizon: 200,
            action_low: alloc::vec![-1.0],
            action_high: alloc::vec![1.0],
            init_low: alloc::vec![-1.0, -0.5],
            init_high: alloc::vec![1.0, 0.5],
            goal: alloc::vec![1.0],
        }
    }

    /// Planar point mass, goal `(0.5, -0.5)`.
    pub fn point_mass() -> Self {
        Self {
            kind: EnvKind::PointMass2d,
            dt: 0.1,
            horizon: 200,
            action_low: alloc::vec![-1.0, -1.0],
            action_high: alloc::vec![1.0, 1.0],
            init_low: alloc::vec![-1.0, -1.0, -0.3, -0.3],
            init_high: alloc::vec![1.0, 1.0, 0.3, 0.3],
            goal: alloc::vec![0.5, -0.5],
        }
    }

    pub fn for_kind(kind: EnvKind) -> Self {
        match kind {
            EnvKind::DoubleIntegrator1d => Self::double_integrator(),
            EnvKind::PointMass2d => Self::point_mass(),
        }
    }

    pub fn axes(&self) -> usize {
        self.kind.axes()
    }

    /// Observation dimension `d` (position, velocity, offset to goal).
    pub fn state_dim(&self) -> usize {
        3 * self.axes()
    }

    /// Action dimension `m`.
    pub fn action_dim(&self) -> usize {
        self.axes()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.axes();
        check_len(n, self.action_low.len())?;
        check_len(n, self.action_high.len())?;
        check_len(2 * n, self.init_low.len())?;
        check_len(2 * n, self.init_high.len())?;
        check_len(n, self.goal.len())?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(input("dt must be positive"));
        }
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| !(l < h)) {
            return Err(input("action bounds need lo < hi on every axis"));
        }
        if self.init_low.iter().zip(&self.init_high).any(|(l, h)| !(l <= h)) {
            return Err(input("initial ranges need lo <= hi"));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(finite(&self.action_low)
            && finite(&self.action_high)
            && finite(&self.init_low)
            && finite(&self.init_high)
            && finite(&self.goal))
        {
            return Err(input("environment bounds must be finite"));
        }
        Ok(())
    }

    /// Initial state, uniform over the init box, deterministic in `seed`.
    pub fn reset(&self, seed: u64) -> EnvState {
        let mut r = rng::rng(seed);
        let draw: Vec<f64> = self
            .init_low
            .iter()
            .zip(&self.init_high)
            .map(|(&lo, &hi)| if lo == hi { lo } else { r.random_range(lo..=hi) })
            .collect();
        let n = self.axes();
        EnvState { pos: draw[..n].to_vec(), vel: draw[n..].to_vec(), step: 0 }
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect()
    }

    /// One Euler step; returns the successor and the hidden reward.
    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<(EnvState, f64)> {
        check_len(self.action_dim(), action.len())?;
        if state.step >= self.horizon {
            return Err(Error::Terminal(state.step));
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(input("action contains NaN"));
        }
        let a = self.clip_action(action);
        let mut next = state.clone();
        for i in 0..self.axes() {
            next.pos[i] = state.pos[i] + state.vel[i] * self.dt;
            next.vel[i] = state.vel[i] + a[i] * self.dt;
        }
        next.step += 1;
        let reward = -next.distance_to(&self.goal);
        Ok((next, reward))
    }

    pub fn is_terminal(&self, state: &EnvState) -> bool {
        state.step >= self.horizon
    }

    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.state_dim());
        obs.extend_from_slice(&state.pos);
        obs.extend_from_slice(&state.vel);
        obs.extend(state.pos.iter().zip(&self.goal).map(|(p, g)| p - g));
        obs
    }

    /// Scripted expert: `clip(kp·(goal − x) − kd·v)` per axis.
    pub fn expert_action(&self, state: &EnvState) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.axes())
            .map(|i| PD_KP * (self.goal[i] - state.pos[i]) - PD_KD * state.vel[i])
            .collect();
        self.clip_action(&raw)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    pub step: usize,
}

impl EnvState {
    pub fn distance_to(&self, goal: &[f64]) -> f64 {
        self.pos.iter().zip(goal).map(|(p, g)| libm::fabs(p - g)).sum()
    }
}

/// Anything that maps observations to actions.
pub trait Actor {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>>;
}

impl<T: Actor + ?Sized> Actor for &mut T {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        (**self).act(obs)
    }
}

/// The PD expert as an [`Actor`]. It reads position and velocity back out
/// of the observation vector.
#[derive(Debug, Clone)]
pub struct ExpertActor {
    spec: EnvSpec,
}

impl ExpertActor {
    pub fn new(spec: &EnvSpec) -> Self {
        Self { spec: spec.clone() }
    }
}

impl Actor for ExpertActor {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.spec.state_dim(), obs.len())?;
        let n = self.spec.axes();
        let state = EnvState { pos: obs[..n].to_vec(), vel: obs[n..2 * n].to_vec(), step: 0 };
        Ok(self.spec.expert_action(&state))
    }
}

/// Uniformly random actions inside the bounds: the zero-performance
/// reference.
#[derive(Debug, Clone)]
pub struct UniformRandomActor {
    low: Vec<f64>,
    high: Vec<f64>,
    rng: Rng,
}

impl UniformRandomActor {
    pub fn new(spec: &EnvSpec, seed: u64) -> Self {
        Self { low: spec.action_low.clone(), high: spec.action_high.clone(), rng: rng::rng(seed) }
    }
}

impl Actor for UniformRandomActor {
    fn act(&mut self, _obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .low
            .iter()
            .zip(&self.high)
            .map(|(&lo, &hi)| self.rng.random_range(lo..hi))
            .collect())
    }
}

/// A full episode: observations, executed (post-clip) actions, rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub episode: Episode,
    pub rewards: Vec<f64>,
    pub seed: u64,
}

impl Rollout {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Splits the hidden reward channel off the learnable part.
    pub fn into_parts(self) -> (Episode, Vec<f64>) {
        (self.episode, self.rewards)
    }
}

/// Runs `actor` from `spec.reset(seed)` until the horizon.
pub fn rollout<A: Actor + ?Sized>(actor: &mut A, spec: &EnvSpec, seed: u64) -> Result<Rollout> {
    rollout_steps(actor, spec, seed, spec.horizon)
}

/// Like [`rollout`] but stops after at most `max_steps` transitions.
pub fn rollout_steps<A: Actor + ?Sized>(
    actor: &mut A,
    spec: &EnvSpec,
    seed: u64,
    max_steps: usize,
) -> Result<Rollout> {
    let mut state = spec.reset(seed);
    let steps = max_steps.min(spec.horizon);
    let mut obs = Vec::with_capacity((steps + 1) * spec.state_dim());
    let mut actions = Vec::with_capacity(steps);
    let mut rewards = Vec::with_capacity(steps);
    obs.extend(spec.observe(&state));
    for _ in 0..steps {
        let raw = actor.act(&spec.observe(&state))?;
        check_len(spec.action_dim(), raw.len())?;
        let applied = spec.clip_action(&raw);
        let (next, r) = spec.step(&state, &applied)?;
        obs.extend(spec.observe(&next));
        actions.push(applied);
        rewards.push(r);
        state = next;
    }
    let trajectory = Trajectory::from_flat(spec.state_dim(), obs)?;
    Ok(Rollout { episode: Episode { trajectory, actions: Some(actions) }, rewards, seed })
}
