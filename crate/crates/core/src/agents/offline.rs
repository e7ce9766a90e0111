//! Offline approximate policy iteration over a fixed batch of transitions.

use std::collections::BTreeSet;

use crate::envs::Transition;
use crate::error::{Error, Result};
use crate::eval::{blstd_posterior, lstd_solve, SufficientStats, GRAM_RIDGE, LSTD_RIDGE};
use crate::features::FeatureMap;
use crate::numerics::Vector;

/// Maps the statistics of one policy to a parameter estimate.
pub trait PolicyEvaluator: Send + Sync {
    fn name(&self) -> &'static str;
    fn evaluate(&self, stats: &SufficientStats) -> Result<Vector>;
}

#[derive(Clone, Copy, Debug)]
pub struct Lstd {
    pub ridge: f64,
}

impl Default for Lstd {
    fn default() -> Self {
        Lstd { ridge: LSTD_RIDGE }
    }
}

impl PolicyEvaluator for Lstd {
    fn name(&self) -> &'static str {
        "lstd"
    }

    fn evaluate(&self, stats: &SufficientStats) -> Result<Vector> {
        lstd_solve(stats, self.ridge)
    }
}

/// Posterior-mean (MAP) evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Blstd {
    pub alpha: f64,
    pub beta: f64,
    pub ridge: f64,
}

impl Blstd {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Blstd { alpha, beta, ridge: GRAM_RIDGE }
    }
}

impl PolicyEvaluator for Blstd {
    fn name(&self) -> &'static str {
        "blstd"
    }

    fn evaluate(&self, stats: &SufficientStats) -> Result<Vector> {
        Ok(blstd_posterior(stats, self.alpha, self.beta, self.ridge)?.mean().clone())
    }
}

#[derive(Clone, Debug)]
pub struct OfflineResult {
    /// `thetas[0]` is the initial parameter vector, `thetas[j]` the j-th evaluation.
    pub thetas: Vec<Vector>,
    pub converged: bool,
    pub iterations: usize,
}

impl OfflineResult {
    pub fn final_theta(&self) -> &Vector {
        self.thetas.last().expect("at least the initial parameters")
    }

    /// First iteration index (≥ 1) from which every later policy satisfies `pred`.
    pub fn settled_at(&self, pred: impl Fn(&Vector) -> bool) -> Option<usize> {
        let mut first = None;
        for (j, th) in self.thetas.iter().enumerate().skip(1) {
            match (pred(th), first) {
                (true, None) => first = Some(j),
                (false, _) => first = None,
                _ => {}
            }
        }
        first
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IterationLimits {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IterationLimits {
    fn default() -> Self {
        IterationLimits { max_iter: 20, tol: 1e-6 }
    }
}

/// Distinct states of the batch (by exact bit pattern), in first-seen order.
pub fn probe_states(data: &[Transition]) -> Vec<Vec<f64>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in data.iter().flat_map(|t| [&t.state, &t.next_state]) {
        let key: Vec<u64> = s.iter().map(|x| x.to_bits()).collect();
        if seen.insert(key) {
            out.push(s.clone());
        }
    }
    out
}

pub fn build_stats(data: &[Transition], features: &FeatureMap, eval_theta: &[f64], gamma: f64) -> Result<SufficientStats> {
    let mut stats = SufficientStats::new(features.k());
    for t in data {
        stats.accumulate(t, features, eval_theta, gamma)?;
    }
    Ok(stats)
}

/// Alternates evaluation of the current greedy policy and greedy improvement until
/// the greedy actions agree on every state in the batch, the parameters stop
/// moving, or `max_iter` evaluations have run.
pub fn policy_iteration(
    data: &[Transition],
    features: &FeatureMap,
    gamma: f64,
    evaluator: &dyn PolicyEvaluator,
    initial_theta: Vector,
    limits: IterationLimits,
) -> Result<OfflineResult> {
    if data.is_empty() {
        return Err(Error::Config("policy iteration needs at least one transition".into()));
    }
    if initial_theta.dim() != features.k() {
        return Err(Error::DimensionMismatch { expected: features.k(), found: initial_theta.dim() });
    }
    let probes: Vec<Vec<f64>> = probe_states(data).iter().map(|s| features.block(s)).collect();
    let greedy = |theta: &Vector| -> Vec<usize> {
        probes.iter().map(|b| features.greedy_from_block(b, theta.as_slice())).collect()
    };

    let mut thetas = vec![initial_theta];
    let mut converged = false;
    while thetas.len() <= limits.max_iter {
        let prev = thetas.last().unwrap();
        let stats = build_stats(data, features, prev.as_slice(), gamma)?;
        let next = evaluator.evaluate(&stats)?;
        let same_policy = greedy(prev) == greedy(&next);
        let small_step = next.sub(prev).norm_inf() < limits.tol;
        thetas.push(next);
        if same_policy || small_step {
            converged = true;
            break;
        }
    }
    let iterations = thetas.len() - 1;
    Ok(OfflineResult { thetas, converged, iterations })
}

pub fn lspi_offline(
    data: &[Transition],
    features: &FeatureMap,
    gamma: f64,
    initial_theta: Vector,
    limits: IterationLimits,
) -> Result<OfflineResult> {
    policy_iteration(data, features, gamma, &Lstd::default(), initial_theta, limits)
}

pub fn blspi_offline(
    data: &[Transition],
    features: &FeatureMap,
    gamma: f64,
    alpha: f64,
    beta: f64,
    initial_theta: Vector,
    limits: IterationLimits,
) -> Result<OfflineResult> {
    policy_iteration(data, features, gamma, &Blstd::new(alpha, beta), initial_theta, limits)
}
