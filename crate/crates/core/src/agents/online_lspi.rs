//! On-policy online LSPI with ε-greedy exploration.

use std::sync::Arc;

use super::OnlineAgent;
use crate::envs::Transition;
use crate::error::Result;
use crate::eval::{lstd_solve, SufficientStats, LSTD_RIDGE};
use crate::features::FeatureMap;
use crate::numerics::{SeededRng, Vector};

/// `ε_e = max(floor, initial · decay^e)` for episode `e`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { initial: 1.0, decay: 0.997, floor: 0.05 }
    }
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsilonSchedule { initial: eps, decay: 1.0, floor: eps }
    }

    pub fn at(&self, episode: usize) -> f64 {
        (self.initial * self.decay.powi(episode.min(i32::MAX as usize) as i32)).max(self.floor).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OnlineLspiConfig {
    pub k_interval: usize,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
}

pub struct OnlineLspi {
    cfg: OnlineLspiConfig,
    features: Arc<FeatureMap>,
    stats: SufficientStats,
    theta: Vector,
    epsilon: f64,
    t: u64,
    failed_updates: usize,
    scratch: Vec<f64>,
}

impl OnlineLspi {
    pub fn new(cfg: OnlineLspiConfig, features: Arc<FeatureMap>) -> Self {
        let k = features.k();
        OnlineLspi {
            epsilon: cfg.epsilon.at(0),
            cfg,
            stats: SufficientStats::new(k),
            theta: Vector::zeros(k),
            t: 0,
            failed_updates: 0,
            scratch: vec![0.0; features.block_size()],
            features,
        }
    }

    /// Resumes from existing statistics with `θ` re-solved from them.
    pub fn with_stats(mut self, stats: SufficientStats) -> Result<Self> {
        self.theta = lstd_solve(&stats, LSTD_RIDGE)?;
        self.stats = stats;
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl OnlineAgent for OnlineLspi {
    fn name(&self) -> &'static str {
        "online_lspi"
    }

    fn begin_episode(&mut self, episode: usize) {
        self.epsilon = self.cfg.epsilon.at(episode);
    }

    fn act(&mut self, state: &[f64], rng: &mut SeededRng) -> usize {
        if self.epsilon > 0.0 && rng.uniform(0.0, 1.0) < self.epsilon {
            return rng.below(self.features.action_count());
        }
        self.features.block_into(state, &mut self.scratch);
        self.features.greedy_from_block(&self.scratch, self.theta.as_slice())
    }

    fn observe(&mut self, t: &Transition, _: &mut SeededRng) -> Result<()> {
        self.stats.accumulate(t, &self.features, self.theta.as_slice(), self.cfg.gamma)?;
        if self.t.is_multiple_of(self.cfg.k_interval as u64) {
            match lstd_solve(&self.stats, LSTD_RIDGE) {
                Ok(theta) => self.theta = theta,
                Err(_) => self.failed_updates += 1,
            }
        }
        self.t += 1;
        Ok(())
    }

    fn behaviour(&self) -> &Vector {
        &self.theta
    }

    fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    fn failed_updates(&self) -> usize {
        self.failed_updates
    }
}
