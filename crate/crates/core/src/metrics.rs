//! Average episodic reward and random-to-expert normalised performance.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Mean over episodes of `Σ_t γ^t r_t`, with the first reward weighted by `γ^0`.
pub fn aer<R: AsRef<[f64]>>(episode_rewards: &[R], gamma: f64) -> Result<f64> {
    if episode_rewards.is_empty() {
        return Err(input("average episodic reward needs at least one episode"));
    }
    let total: f64 = episode_rewards.iter().map(|ep| discounted_return(ep.as_ref(), gamma)).sum();
    Ok(total / episode_rewards.len() as f64)
}

pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    if gamma == 1.0 {
        return rewards.iter().sum();
    }
    let mut weight = 1.0;
    let mut sum = 0.0;
    for r in rewards {
        sum += weight * r;
        weight *= gamma;
    }
    sum
}

/// `(aer_policy − aer_random) / (aer_expert − aer_random)`.
pub fn performance(aer_policy: f64, aer_random: f64, aer_expert: f64) -> Result<f64> {
    let gap = aer_expert - aer_random;
    if gap == 0.0 || !gap.is_finite() {
        return Err(Error::Degenerate("expert and random AER coincide".into()));
    }
    Ok((aer_policy - aer_random) / gap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Undiscounted cumulative reward of each evaluation episode.
    pub episodes: Vec<f64>,
    pub aer: f64,
    pub aer_random: f64,
    pub aer_expert: f64,
    pub performance: f64,
}

impl EvalReport {
    pub fn from_returns(episodes: Vec<f64>, aer_random: f64, aer_expert: f64) -> Result<Self> {
        let aer = aer(&episodes.iter().map(|r| [*r]).collect::<Vec<_>>(), 1.0)?;
        let performance = performance(aer, aer_random, aer_expert)?;
        Ok(Self { episodes, aer, aer_random, aer_expert, performance })
    }
}
