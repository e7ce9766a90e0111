//! Randomised Bayesian LSPI: optimistic policy iteration with posterior sampling.

use std::sync::Arc;

use super::OnlineAgent;
use crate::envs::Transition;
use crate::error::Result;
use crate::eval::{blstd_posterior, SufficientStats, GRAM_RIDGE};
use crate::features::FeatureMap;
use crate::numerics::{SeededRng, Vector};

/// How behaviour parameters are drawn at each improvement step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exploration {
    /// `θ̃ ~ N(m, S)`
    Sample,
    /// `θ̃ = m`; no exploration beyond what the greedy policy does.
    Mean,
}

#[derive(Clone, Copy, Debug)]
pub struct RblspiConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k_interval: usize,
    pub gamma: f64,
    pub exploration: Exploration,
}

pub struct Rblspi {
    cfg: RblspiConfig,
    features: Arc<FeatureMap>,
    stats: SufficientStats,
    mean: Vector,
    behaviour: Vector,
    t: u64,
    failed_updates: usize,
    scratch: Vec<f64>,
}

impl Rblspi {
    /// Starts from `m ~ N(0, I)`, `θ̃ = m`, and empty statistics.
    pub fn new(cfg: RblspiConfig, features: Arc<FeatureMap>, rng: &mut SeededRng) -> Self {
        let k = features.k();
        let mean = Vector::from_vec_unchecked(rng.standard_normal_vector(k));
        Rblspi {
            cfg,
            stats: SufficientStats::new(k),
            behaviour: mean.clone(),
            mean,
            t: 0,
            failed_updates: 0,
            scratch: vec![0.0; features.block_size()],
            features,
        }
    }

    /// Resumes from existing statistics; the mean is recomputed from them.
    pub fn with_stats(mut self, stats: SufficientStats) -> Result<Self> {
        let post = blstd_posterior(&stats, self.cfg.alpha, self.cfg.beta, GRAM_RIDGE)?;
        self.mean = post.mean().clone();
        self.behaviour = self.mean.clone();
        self.stats = stats;
        Ok(self)
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    /// Total environment steps observed.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn config(&self) -> &RblspiConfig {
        &self.cfg
    }

    fn improve(&mut self, rng: &mut SeededRng) -> Result<()> {
        let post = blstd_posterior(&self.stats, self.cfg.alpha, self.cfg.beta, GRAM_RIDGE)?;
        let behaviour = match self.cfg.exploration {
            Exploration::Sample => post.sample(rng)?,
            Exploration::Mean => post.mean().clone(),
        };
        self.mean = post.mean().clone();
        self.behaviour = behaviour;
        Ok(())
    }
}

impl OnlineAgent for Rblspi {
    fn name(&self) -> &'static str {
        "rblspi"
    }

    fn act(&mut self, state: &[f64], _: &mut SeededRng) -> usize {
        self.features.block_into(state, &mut self.scratch);
        self.features.greedy_from_block(&self.scratch, self.behaviour.as_slice())
    }

    fn observe(&mut self, t: &Transition, rng: &mut SeededRng) -> Result<()> {
        self.stats.accumulate(t, &self.features, self.mean.as_slice(), self.cfg.gamma)?;
        if self.t.is_multiple_of(self.cfg.k_interval as u64) && self.improve(rng).is_err() {
            // keep the previous (m, θ̃) for one more interval
            self.failed_updates += 1;
        }
        self.t += 1;
        Ok(())
    }

    fn behaviour(&self) -> &Vector {
        &self.behaviour
    }

    fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    fn failed_updates(&self) -> usize {
        self.failed_updates
    }
}
