//! Truncated path signatures of discrete trajectories.
//!
//! A trajectory with `n` states is read as the piecewise-linear path through
//! those states. The signature of one straight segment with increment `Δ` has
//! level `m` equal to `Δ^{⊗m} / m!`; segments are glued with Chen's identity
//! `S(a * b) = S(a) ⊗ S(b)`, truncated at the requested depth. A full pass
//! over the trajectory costs `O(n · d^k)`.
//!
//! Coefficients are stored level-major: the empty word first, then the `d`
//! words of length one, then the `d²` words of length two in lexicographic
//! order, and so on.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, input, Error, Result};

/// A finite sequence of `d`-dimensional states, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from a flat row-major buffer of `n · dim` values.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(input("trajectory state dimension must be at least 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(input("trajectory buffer must hold a whole, nonzero number of states"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(alloc::format!(
                "non-finite state value at step {} dimension {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_states<S: AsRef<[f64]>>(states: &[S]) -> Result<Self> {
        let dim = states.first().map(|s| s.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(states.len() * dim);
        for s in states {
            check_len(dim, s.as_ref().len())?;
            data.extend_from_slice(s.as_ref());
        }
        Self::from_flat(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false: a trajectory holds at least one state.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Truncated signature of a path in `R^dim` up to `depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    dim: usize,
    depth: usize,
    coeffs: Vec<f64>,
}

impl Signature {
    /// Signature of the constant path: `[1, 0, 0, ...]`.
    pub fn identity(dim: usize, depth: usize) -> Result<Self> {
        if dim == 0 {
            return Err(input("signature dimension must be at least 1"));
        }
        let mut coeffs = vec![0.0; signature_length(dim, depth)?];
        coeffs[0] = 1.0;
        Ok(Self { dim, depth, coeffs })
    }

    /// Wraps raw coefficients, checking the length against `(dim, depth)`.
    pub fn from_coeffs(dim: usize, depth: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(input("signature dimension must be at least 1"));
        }
        check_len(signature_length(dim, depth)?, coeffs.len())?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(input("signature coefficients must be finite"));
        }
        Ok(Self { dim, depth, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficients of a single level (`dim^level` values).
    pub fn level(&self, level: usize) -> &[f64] {
        let start = level_offset(self.dim, level);
        &self.coeffs[start..start + self.dim.pow(level as u32)]
    }

    /// Coefficient for a word of 0-based letters, or `None` if the word is
    /// longer than the depth or uses a letter outside the alphabet.
    pub fn coeff(&self, word: &[usize]) -> Option<f64> {
        if word.len() > self.depth || word.iter().any(|&l| l >= self.dim) {
            return None;
        }
        let within = word.iter().fold(0, |acc, &l| acc * self.dim + l);
        Some(self.coeffs[level_offset(self.dim, word.len()) + within])
    }

    fn same_shape(&self, other: &Signature) -> Result<()> {
        if self.dim != other.dim || self.depth != other.depth {
            return Err(Error::Input(alloc::format!(
                "signature shape mismatch: (d={}, k={}) vs (d={}, k={})",
                self.dim,
                self.depth,
                other.dim,
                other.depth
            )));
        }
        Ok(())
    }

    /// Manhattan distance between two signatures of the same shape.
    pub fn l1_distance(&self, other: &Signature) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| libm::fabs(a - b))
            .sum())
    }
}

/// Number of words of length `0..=depth` over an alphabet of `dim` letters.
pub fn signature_length(dim: usize, depth: usize) -> Result<usize> {
    if dim == 0 {
        return Err(input("signature dimension must be at least 1"));
    }
    let overflow = || Error::Capacity(alloc::format!("signature length for d={dim}, k={depth}"));
    let mut total: usize = 1;
    let mut level: usize = 1;
    for _ in 0..depth {
        level = level.checked_mul(dim).ok_or_else(overflow)?;
        total = total.checked_add(level).ok_or_else(overflow)?;
    }
    Ok(total)
}

fn level_offset(dim: usize, level: usize) -> usize {
    (0..level).map(|i| dim.pow(i as u32)).sum()
}

/// Computes the depth-`depth` signature of `traj`.
pub fn compute_signature(traj: &Trajectory, depth: usize) -> Result<Signature> {
    if depth == 0 {
        return Err(input("signature depth must be at least 1"));
    }
    let dim = traj.dim();
    let mut sig = Signature::identity(dim, depth)?;
    let offsets: Vec<usize> = (0..=depth).map(|m| level_offset(dim, m)).collect();
    let mut delta = vec![0.0; dim];
    // Holds the partial Horner product for one level; the top level is largest.
    let mut acc = vec![0.0; dim.pow(depth as u32)];
    let mut tmp = vec![0.0; acc.len()];

    let mut states = traj.states();
    let Some(mut prev) = states.next() else {
        return Ok(sig);
    };
    for cur in states {
        for ((d, c), p) in delta.iter_mut().zip(cur).zip(prev) {
            *d = c - p;
        }
        prev = cur;
        if delta.iter().all(|&d| d == 0.0) {
            continue;
        }
        extend_by_segment(&mut sig.coeffs, &offsets, dim, depth, &delta, &mut acc, &mut tmp);
    }
    if sig.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric { context: "compute_signature", layer: None });
    }
    Ok(sig)
}

/// In-place Chen product `S ← S ⊗ exp(Δ)`, highest level first so that each
/// level reads only not-yet-updated lower levels.
///
/// Level `m` of the product is evaluated with the Horner scheme
/// `((S₀·Δ/m + S₁)·Δ/(m-1) + S₂) ... ·Δ/1 + S_m`.
fn extend_by_segment(
    coeffs: &mut [f64],
    offsets: &[usize],
    dim: usize,
    depth: usize,
    delta: &[f64],
    acc: &mut [f64],
    tmp: &mut [f64],
) {
    for m in (1..=depth).rev() {
        // acc holds a tensor of level `len`; start with S₀ = 1.
        acc[0] = 1.0;
        let mut len = 1usize;
        for j in 0..m {
            let scale = 1.0 / (m - j) as f64;
            // tmp = acc ⊗ (Δ · scale)
            for (i, a) in acc[..len].iter().enumerate() {
                let base = i * dim;
                let a = a * scale;
                for (t, d) in tmp[base..base + dim].iter_mut().zip(delta) {
                    *t = a * d;
                }
            }
            len *= dim;
            // add S_{j+1}; at the last step this is S_m itself
            let src = &coeffs[offsets[j + 1]..offsets[j + 1] + len];
            for ((a, t), s) in acc[..len].iter_mut().zip(&tmp[..len]).zip(src) {
                *a = t + s;
            }
        }
        coeffs[offsets[m]..offsets[m] + len].copy_from_slice(&acc[..len]);
    }
}

/// Coefficient-wise mean of a nonempty list of equally shaped signatures.
pub fn mean_signature(sigs: &[Signature]) -> Result<Signature> {
    let first = sigs.first().ok_or_else(|| input("mean of an empty signature list"))?;
    let mut coeffs = vec![0.0; first.coeffs.len()];
    for s in sigs {
        first.same_shape(s)?;
        for (c, v) in coeffs.iter_mut().zip(&s.coeffs) {
            *c += v;
        }
    }
    let n = sigs.len() as f64;
    coeffs.iter_mut().for_each(|c| *c /= n);
    Ok(Signature { dim: first.dim, depth: first.depth, coeffs })
}

/// Distance of `agent` to the expert mean, in units of the distance between
/// the random-policy mean and the expert mean. 0 is expert-identical, 1 is as
/// far as a random agent.
pub fn normalized_signature_distance(
    agent: &Signature,
    expert: &[Signature],
    random: &[Signature],
) -> Result<f64> {
    let expert_mean = mean_signature(expert)?;
    let random_mean = mean_signature(random)?;
    SignatureReference::new(expert_mean, random_mean)?.distance(agent)
}

/// Precomputed expert and random means for repeated distance queries.
#[derive(Debug, Clone)]
pub struct SignatureReference {
    expert_mean: Signature,
    scale: f64,
}

impl SignatureReference {
    pub fn new(expert_mean: Signature, random_mean: Signature) -> Result<Self> {
        let scale = random_mean.l1_distance(&expert_mean)?;
        if !(scale > 0.0) {
            return Err(Error::Degenerate(
                "random and expert mean signatures coincide".into(),
            ));
        }
        Ok(Self { expert_mean, scale })
    }

    pub fn distance(&self, agent: &Signature) -> Result<f64> {
        Ok(agent.l1_distance(&self.expert_mean)? / self.scale)
    }
}
