//! Error-scaled Gaussian exploration.
//!
//! During training a model's prediction `â` is replaced by a sample from
//! `N(â, ε²)` per component, where `ε = ‖a − â‖_p^p` is the model's own
//! error against its target. As the model fits, the spread collapses and the
//! sample approaches the greedy prediction.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, input, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    /// Minkowski exponent, `p ≥ 1`.
    pub p: f64,
    pub enabled: bool,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self { p: 1.0, enabled: true }
    }
}

impl ExplorationConfig {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p >= 1.0 && self.p.is_finite() {
            Ok(())
        } else {
            Err(input("exploration exponent p must be a finite value >= 1"))
        }
    }

    /// Exploration sample of `pred` against `target`, or `pred` itself when
    /// exploration is disabled.
    pub fn perturb(&self, target: &[f64], pred: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        if !self.enabled {
            check_len(target.len(), pred.len())?;
            return Ok(pred.to_vec());
        }
        let eps = epsilon(target, pred, self.p)?;
        explore_sample(pred, eps, rng)
    }
}

/// `ε = Σ |a_i − â_i|^p`, the `p`-norm of the error raised to `p`.
pub fn epsilon(action: &[f64], predicted: &[f64], p: f64) -> Result<f64> {
    check_len(action.len(), predicted.len())?;
    if !(p >= 1.0) {
        return Err(input("exploration exponent p must be >= 1"));
    }
    Ok(action
        .iter()
        .zip(predicted)
        .map(|(a, b)| {
            let e = libm::fabs(a - b);
            if p == 1.0 {
                e
            } else {
                libm::pow(e, p)
            }
        })
        .sum())
}

/// Draws each component from `N(mean_i, eps²)`. `eps = 0` returns `mean`
/// unchanged.
pub fn explore_sample(mean: &[f64], eps: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(input("exploration standard deviation must be finite and non-negative"));
    }
    if eps == 0.0 {
        return Ok(mean.to_vec());
    }
    Ok(mean
        .iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            m + eps * z
        })
        .collect())
}
