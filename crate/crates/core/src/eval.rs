//! Policy evaluation from sufficient statistics: LSTD, Bayesian LSTD, MSPBE.
//!
//! All estimators here consume only the accumulated `(A, C, b)`; no
//! transitions are retained. `C` receives a small ridge before any
//! inversion so the estimators are defined from the first sample on.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::Transition;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::numerics::{
    axpy, sample_mvn_precision, solve_general, solve_spd, CholeskyFactor, Matrix, SeededRng, Vector,
};

/// Ridge added to `C` before inversion.
pub const GRAM_RIDGE: f64 = 1e-6;
/// Ridge added to `A` for the plain LSTD solve.
pub const LSTD_RIDGE: f64 = 1e-6;

/// `A = Σ φ(φ − γφ')ᵀ`, `C = Σ φφᵀ`, `b = Σ φ r` and the sample count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub a: Matrix,
    pub c: Matrix,
    pub b: Vector,
    pub n: u64,
}

impl SufficientStats {
    pub fn new(k: usize) -> Self {
        SufficientStats { a: Matrix::zeros(k, k), c: Matrix::zeros(k, k), b: Vector::zeros(k), n: 0 }
    }

    pub fn k(&self) -> usize {
        self.b.dim()
    }

    /// Adds one transition. The successor feature is `φ(s', greedy(θ_eval, s'))`,
    /// or zero when the transition is terminal.
    pub fn accumulate(
        &mut self,
        t: &Transition,
        features: &FeatureMap,
        eval_theta: &[f64],
        gamma: f64,
    ) -> Result<()> {
        let k = self.k();
        if features.k() != k {
            return Err(Error::DimensionMismatch { expected: k, found: features.k() });
        }
        if eval_theta.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: eval_theta.len() });
        }
        if t.action >= features.action_count() {
            return Err(Error::ActionOutOfRange { action: t.action, action_count: features.action_count() });
        }
        for s in [&t.state, &t.next_state] {
            if s.len() != features.state_dim() {
                return Err(Error::DimensionMismatch { expected: features.state_dim(), found: s.len() });
            }
        }
        if !t.reward.is_finite() {
            return Err(Error::NonFinite);
        }
        let phi = features.block(&t.state);
        let next = if t.terminal || gamma == 0.0 {
            None
        } else {
            let block = features.block(&t.next_state);
            let a = features.greedy_from_block(&block, eval_theta);
            Some((features.block_offset(a), block))
        };
        self.add_block(features.block_offset(t.action), &phi, next.as_ref().map(|(o, b)| (*o, b.as_slice())), t.reward, gamma);
        Ok(())
    }

    /// Block-sparse update: `φ` lives at `off`, `φ'` (if any) at its own offset.
    fn add_block(&mut self, off: usize, phi: &[f64], next: Option<(usize, &[f64])>, reward: f64, gamma: f64) {
        let bs = phi.len();
        for (i, &pi) in phi.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let row = off + i;
            axpy(pi, phi, &mut self.a.row_mut(row)[off..off + bs]);
            axpy(pi, phi, &mut self.c.row_mut(row)[off..off + bs]);
            if let Some((noff, nphi)) = next {
                axpy(-gamma * pi, nphi, &mut self.a.row_mut(row)[noff..noff + nphi.len()]);
            }
            self.b[row] += pi * reward;
        }
        self.n += 1;
    }

    /// Adds a sample given explicit dense feature vectors (`None` successor = terminal).
    pub fn accumulate_features(&mut self, phi: &Vector, phi_next: Option<&Vector>, reward: f64, gamma: f64) -> Result<()> {
        self.accumulate_weighted(phi, phi_next, reward, gamma, 1.0)?;
        self.n += 1;
        Ok(())
    }

    /// Weighted dense update; used to build statistics from an exact model.
    /// Does not change the sample count.
    pub fn accumulate_weighted(
        &mut self,
        phi: &Vector,
        phi_next: Option<&Vector>,
        reward: f64,
        gamma: f64,
        weight: f64,
    ) -> Result<()> {
        let k = self.k();
        if phi.dim() != k || phi_next.is_some_and(|v| v.dim() != k) {
            return Err(Error::DimensionMismatch { expected: k, found: phi.dim() });
        }
        let td = match phi_next {
            Some(next) => phi.sub(&next.scaled(gamma)),
            None => phi.clone(),
        };
        self.a.add_outer(weight, phi.as_slice(), td.as_slice());
        self.c.add_outer(weight, phi.as_slice(), phi.as_slice());
        axpy(weight * reward, phi.as_slice(), self.b.as_mut_slice());
        Ok(())
    }

    /// Entrywise sum of two statistics over the same feature space.
    pub fn merge(&mut self, other: &SufficientStats) -> Result<()> {
        self.a = self.a.add(&other.a)?;
        self.c = self.c.add(&other.c)?;
        self.b = self.b.add(&other.b);
        self.n += other.n;
        Ok(())
    }
}

/// `θ* = (A + ridge·I)⁻¹ b`, by pivoted elimination since `A` is not symmetric.
pub fn lstd_solve(stats: &SufficientStats, ridge: f64) -> Result<Vector> {
    solve_general(&stats.a.with_added_diagonal(ridge), &stats.b)
}

/// `‖Aθ − b‖²` in the `(C + ridge·I)⁻¹` norm.
pub fn empirical_mspbe(stats: &SufficientStats, theta: &Vector, ridge: f64) -> Result<f64> {
    let r = stats.a.mul_vec(theta)?.sub(&stats.b);
    let w = solve_spd(&stats.c.with_added_diagonal(ridge), &r)?;
    Ok(r.dot(&w).max(0.0))
}

/// Unnormalised log posterior `−(β/2)E_D(θ) − (α/2)θᵀθ`.
pub fn log_posterior(stats: &SufficientStats, theta: &Vector, alpha: f64, beta: f64, ridge: f64) -> Result<f64> {
    Ok(-0.5 * beta * empirical_mspbe(stats, theta, ridge)? - 0.5 * alpha * theta.dot(theta))
}

/// Gaussian posterior over value-function parameters, held in precision form.
#[derive(Clone, Debug)]
pub struct Posterior {
    mean: Vector,
    precision: Matrix,
    factor: CholeskyFactor,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Serialize, Deserialize)]
struct PosteriorRecord {
    mean: Vector,
    precision: Matrix,
    alpha: f64,
    beta: f64,
}

impl Serialize for Posterior {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PosteriorRecord { mean: self.mean.clone(), precision: self.precision.clone(), alpha: self.alpha, beta: self.beta }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Posterior {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PosteriorRecord::deserialize(d)?;
        Posterior::from_precision(r.mean, r.precision, r.alpha, r.beta).map_err(serde::de::Error::custom)
    }
}

impl Posterior {
    /// `N(0, α⁻¹I)`
    pub fn prior(k: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::from_precision(Vector::zeros(k), Matrix::identity(k).scaled(alpha), alpha, beta)
    }

    fn from_precision(mean: Vector, precision: Matrix, alpha: f64, beta: f64) -> Result<Self> {
        let factor = CholeskyFactor::new(&precision)?;
        Ok(Posterior { mean, precision, factor, alpha, beta })
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    /// `S⁻¹ = αI + βAᵀC⁻¹A`
    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    /// `S`, formed on demand.
    pub fn covariance(&self) -> Result<Matrix> {
        self.factor.inverse()
    }

    pub fn k(&self) -> usize {
        self.mean.dim()
    }

    /// Predictive mean `φᵀm` and variance `φᵀSφ` for one state-action pair.
    pub fn predict(&self, features: &FeatureMap, state: &[f64], action: usize) -> Result<(f64, f64)> {
        let phi = features.evaluate(state, action)?;
        if phi.dim() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), found: phi.dim() });
        }
        let mean = phi.dot(&self.mean);
        let mut y = phi.into_vec();
        self.factor.forward_in_place(&mut y);
        Ok((mean, y.iter().map(|v| v * v).sum()))
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Result<Vector> {
        sample_mvn_precision(&self.mean, &self.factor, rng)
    }
}

/// Bayesian LSTD posterior:
/// `S = (αI + βAᵀC⁻¹A)⁻¹`, `m = βSAᵀC⁻¹b`, with `C` ridged.
pub fn blstd_posterior(stats: &SufficientStats, alpha: f64, beta: f64, ridge: f64) -> Result<Posterior> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::Config(format!("alpha and beta must be positive (got {alpha}, {beta})")));
    }
    let k = stats.k();
    if stats.n == 0 {
        return Posterior::prior(k, alpha, beta);
    }
    let gram = CholeskyFactor::new(&stats.c.with_added_diagonal(ridge))?;
    let w = gram.forward_matrix(&stats.a)?;
    let mut y = stats.b.as_slice().to_vec();
    gram.forward_in_place(&mut y);

    let mut precision = w.gram().scaled(beta);
    precision.add_diagonal(alpha);
    let factor = CholeskyFactor::new(&precision)?;
    let rhs = w.tr_mul_vec(&Vector::from_vec_unchecked(y))?.scaled(beta);
    let mean = factor.solve(&rhs)?;
    Ok(Posterior { mean, precision, factor, alpha, beta })
}

/// Parameters `θ` of `Q(s, a) = φ(s, a)ᵀθ` and their greedy policy.
#[derive(Clone, Debug)]
pub struct LinearQPolicy {
    pub theta: Vector,
    pub features: Arc<FeatureMap>,
}

impl LinearQPolicy {
    pub fn new(theta: Vector, features: Arc<FeatureMap>) -> Result<Self> {
        if theta.dim() != features.k() {
            return Err(Error::DimensionMismatch { expected: features.k(), found: theta.dim() });
        }
        Ok(LinearQPolicy { theta, features })
    }

    pub fn q(&self, state: &[f64], action: usize) -> Result<f64> {
        Ok(self.features.evaluate(state, action)?.dot(&self.theta))
    }

    /// Lowest-index maximiser of `Q(s, ·)`.
    pub fn greedy(&self, state: &[f64]) -> usize {
        self.features.greedy_action(state, self.theta.as_slice())
    }
}

pub fn predict_q(post: &Posterior, features: &FeatureMap, state: &[f64], action: usize) -> Result<(f64, f64)> {
    post.predict(features, state, action)
}

/// Draws `θ̃ ~ N(m, S)` and wraps it as a greedy policy.
pub fn sample_policy(post: &Posterior, features: Arc<FeatureMap>, rng: &mut SeededRng) -> Result<LinearQPolicy> {
    LinearQPolicy::new(post.sample(rng)?, features)
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Resumable learner state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub stats: SufficientStats,
    pub posterior: Option<Posterior>,
}

impl Checkpoint {
    pub fn new(stats: SufficientStats, posterior: Option<Posterior>) -> Self {
        Checkpoint { version: CHECKPOINT_VERSION, stats, posterior }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", cp.version)));
        }
        Ok(cp)
    }
}
