//! Per-iteration trace of offline policy iteration on the 20-state chain.

use std::fmt::Write as _;

use crate::agents::{blspi_offline, lspi_offline, IterationLimits, OfflineResult};
use crate::envs::{collect_uniform, make_env, ChainWalk, EnvOptions};
use crate::error::Result;
use crate::features::FeatureMap;
use crate::numerics::{SeededRng, Vector};

#[derive(Clone, Debug)]
pub struct ChainSettings {
    pub seed: u64,
    pub samples: usize,
    pub degree: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_iter: usize,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings { seed: 0, samples: 5000, degree: 4, gamma: 0.9, alpha: 1e-6, beta: 1.0, max_iter: 20 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    /// One `L`/`R` per state, left to right.
    pub policy: String,
    /// `Q(s, π(s))` under the fitted parameters.
    pub approx_values: Vec<f64>,
    /// Exact value of the same policy.
    pub exact_values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ChainTrace {
    pub method: &'static str,
    pub converged: bool,
    pub rows: Vec<IterationRow>,
}

pub const OPTIMAL_POLICY: &str = "LLLLLLLLLLRRRRRRRRRR";

fn trace(method: &'static str, result: &OfflineResult, features: &FeatureMap, chain: &ChainWalk, gamma: f64) -> Result<ChainTrace> {
    let model = chain.model();
    let rows = result
        .thetas
        .iter()
        .enumerate()
        .skip(1)
        .map(|(iteration, theta)| row(iteration, theta, features, &model, chain.states, gamma))
        .collect::<Result<_>>()?;
    Ok(ChainTrace { method, converged: result.converged, rows })
}

fn row(
    iteration: usize,
    theta: &Vector,
    features: &FeatureMap,
    model: &crate::envs::ChainModel,
    states: usize,
    gamma: f64,
) -> Result<IterationRow> {
    let mut actions = Vec::with_capacity(states);
    let mut approx = Vec::with_capacity(states);
    for s in 1..=states {
        let block = features.block(&[s as f64]);
        let a = features.greedy_from_block(&block, theta.as_slice());
        actions.push(a);
        approx.push(features.q_from_block(&block, a, theta.as_slice()));
    }
    let policy = actions.iter().map(|&a| if a == 0 { 'L' } else { 'R' }).collect();
    Ok(IterationRow { iteration, policy, approx_values: approx, exact_values: model.policy_values(&actions, gamma)? })
}

/// Runs LSPI and BLSPI on one shared batch and traces both.
pub fn chain_report(settings: &ChainSettings) -> Result<Vec<ChainTrace>> {
    let chain = ChainWalk::default();
    let mut env = make_env("chain_walk", &EnvOptions::default(), settings.seed)?;
    let data = collect_uniform(env.as_mut(), settings.samples, &mut SeededRng::new(settings.seed))?;
    let features = FeatureMap::polynomial_on(settings.degree, 2, 1.0, chain.states as f64)?;
    let limits = IterationLimits { max_iter: settings.max_iter, ..IterationLimits::default() };
    let zero = || Vector::zeros(features.k());
    let lspi = lspi_offline(&data, &features, settings.gamma, zero(), limits)?;
    let blspi = blspi_offline(&data, &features, settings.gamma, settings.alpha, settings.beta, zero(), limits)?;
    Ok(vec![
        trace("lspi", &lspi, &features, &chain, settings.gamma)?,
        trace("blspi", &blspi, &features, &chain, settings.gamma)?,
    ])
}

pub fn format_report(traces: &[ChainTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        let _ = writeln!(out, "{} ({})", t.method, if t.converged { "converged" } else { "iteration cap reached" });
        for r in &t.rows {
            let marker = if r.policy == OPTIMAL_POLICY { " *" } else { "" };
            let _ = writeln!(out, "  iter {:2}  {}{marker}", r.iteration, r.policy);
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "    approx {}", fmt(&r.approx_values));
            let _ = writeln!(out, "    exact  {}", fmt(&r.exact_values));
        }
    }
    out
}
