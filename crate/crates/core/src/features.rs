//! Linear feature maps over state-action pairs.
//!
//! Every map is a per-action replication of one state block: `φ(s, a)` is
//! zero outside the slice `[a·B, (a+1)·B)` where `B` is the block size.
//! Callers on hot paths use [`FeatureMap::block_into`] and the block offset
//! directly instead of materialising the full `k`-vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    RbfGrid { lower: Vec<f64>, upper: Vec<f64>, grid: Vec<usize>, include_constant: bool },
    Polynomial { degree: usize, lower: f64, upper: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    kind: FeatureKind,
    action_count: usize,
    block_size: usize,
    state_dim: usize,
    // rbf only: one-dimensional centres and widths per state dimension
    centres: Vec<Vec<f64>>,
    widths: Vec<f64>,
}

impl FeatureMap {
    /// Equidistant grid of Gaussian RBFs over the box `bounds`, replicated per action.
    pub fn rbf_grid(
        bounds: &[(f64, f64)],
        grid: &[usize],
        action_count: usize,
        include_constant: bool,
    ) -> Result<Self> {
        if bounds.len() != grid.len() || bounds.is_empty() {
            return Err(Error::InvalidFeatures(format!(
                "{} bounds for {} grid dimensions",
                bounds.len(),
                grid.len()
            )));
        }
        if action_count == 0 {
            return Err(Error::InvalidFeatures("action_count must be at least 1".into()));
        }
        for (dim, &(lower, upper)) in bounds.iter().enumerate() {
            if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
                return Err(Error::InvalidBounds { dim, lower, upper });
            }
        }
        if let Some(d) = grid.iter().position(|&n| n == 0) {
            return Err(Error::InvalidFeatures(format!("grid count in dimension {d} is zero")));
        }
        let centres = grid
            .iter()
            .map(|&n| {
                if n == 1 {
                    vec![0.5]
                } else {
                    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
                }
            })
            .collect();
        let widths = grid.iter().map(|&n| if n == 1 { 1.0 } else { 1.0 / (n - 1) as f64 }).collect();
        let block_size = grid.iter().product::<usize>() + usize::from(include_constant);
        Ok(FeatureMap {
            kind: FeatureKind::RbfGrid {
                lower: bounds.iter().map(|b| b.0).collect(),
                upper: bounds.iter().map(|b| b.1).collect(),
                grid: grid.to_vec(),
                include_constant,
            },
            action_count,
            block_size,
            state_dim: bounds.len(),
            centres,
            widths,
        })
    }

    /// Polynomial block `(1, s, …, s^degree)` of a scalar state already in `[0, 1]`.
    pub fn polynomial(degree: usize, action_count: usize) -> Result<Self> {
        Self::polynomial_on(degree, action_count, 0.0, 1.0)
    }

    /// Polynomial block of a scalar state normalised from `[lower, upper]` to `[0, 1]`.
    pub fn polynomial_on(degree: usize, action_count: usize, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidBounds { dim: 0, lower, upper });
        }
        if action_count == 0 {
            return Err(Error::InvalidFeatures("action_count must be at least 1".into()));
        }
        Ok(FeatureMap {
            kind: FeatureKind::Polynomial { degree, lower, upper },
            action_count,
            block_size: degree + 1,
            state_dim: 1,
            centres: Vec::new(),
            widths: Vec::new(),
        })
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    /// Total feature count `k`.
    pub fn k(&self) -> usize {
        self.block_size * self.action_count
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn block_offset(&self, action: usize) -> usize {
        action * self.block_size
    }

    fn check(&self, state: &[f64], action: usize) -> Result<()> {
        if action >= self.action_count {
            return Err(Error::ActionOutOfRange { action, action_count: self.action_count });
        }
        if state.len() != self.state_dim {
            return Err(Error::DimensionMismatch { expected: self.state_dim, found: state.len() });
        }
        Ok(())
    }

    /// Writes the state block (shared by every action) into `out[..block_size]`.
    pub fn block_into(&self, state: &[f64], out: &mut [f64]) {
        debug_assert_eq!(state.len(), self.state_dim);
        let out = &mut out[..self.block_size];
        match &self.kind {
            FeatureKind::Polynomial { lower, upper, .. } => {
                let x = normalise(state[0], *lower, *upper);
                let mut p = 1.0;
                for v in out.iter_mut() {
                    *v = p;
                    p *= x;
                }
            }
            FeatureKind::RbfGrid { lower, upper, include_constant, .. } => {
                // Separable: the d-dimensional Gaussian is a product of 1-D factors.
                let factors: Vec<Vec<f64>> = self
                    .centres
                    .iter()
                    .enumerate()
                    .map(|(d, cs)| {
                        let x = normalise(state[d], lower[d], upper[d]);
                        let w = self.widths[d];
                        cs.iter().map(|c| (-(x - c) * (x - c) / (2.0 * w * w)).exp()).collect()
                    })
                    .collect();
                let rbf_count = self.block_size - usize::from(*include_constant);
                out[..rbf_count].fill(1.0);
                let mut stride = rbf_count;
                for f in &factors {
                    stride /= f.len();
                    for (idx, v) in out[..rbf_count].iter_mut().enumerate() {
                        *v *= f[(idx / stride) % f.len()];
                    }
                }
                if *include_constant {
                    out[rbf_count] = 1.0;
                }
            }
        }
    }

    pub fn block(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.block_size];
        self.block_into(state, &mut out);
        out
    }

    /// Full feature vector `φ(s, a)` of length `k`.
    pub fn evaluate(&self, state: &[f64], action: usize) -> Result<Vector> {
        self.check(state, action)?;
        let mut out = vec![0.0; self.k()];
        let off = self.block_offset(action);
        self.block_into(state, &mut out[off..off + self.block_size]);
        Ok(Vector::from_vec_unchecked(out))
    }

    /// `φ(s, a)ᵀ θ` given a precomputed state block.
    pub fn q_from_block(&self, block: &[f64], action: usize, theta: &[f64]) -> f64 {
        let off = self.block_offset(action);
        dot(block, &theta[off..off + self.block_size])
    }

    /// Greedy action for a precomputed state block; ties go to the lowest index.
    pub fn greedy_from_block(&self, block: &[f64], theta: &[f64]) -> usize {
        let mut best = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..self.action_count {
            let q = self.q_from_block(block, a, theta);
            if q > best_q {
                best = a;
                best_q = q;
            }
        }
        best
    }

    pub fn greedy_action(&self, state: &[f64], theta: &[f64]) -> usize {
        self.greedy_from_block(&self.block(state), theta)
    }
}

fn normalise(x: f64, lower: f64, upper: f64) -> f64 {
    ((x - lower) / (upper - lower)).clamp(0.0, 1.0)
}
