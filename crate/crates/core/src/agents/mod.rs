//! Learning agents and the episode loop that drives them.

pub mod offline;
mod online_lspi;
mod rblspi;

pub use offline::{blspi_offline, lspi_offline, policy_iteration, IterationLimits, OfflineResult, PolicyEvaluator};
pub use online_lspi::{EpsilonSchedule, OnlineLspi, OnlineLspiConfig};
pub use rblspi::{Exploration, Rblspi, RblspiConfig};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::{collect_uniform, rollout, EpisodeLog, Environment, Transition};
use crate::error::{Error, Result};
use crate::eval::{SufficientStats, LinearQPolicy};
use crate::features::FeatureMap;
use crate::numerics::{SeededRng, Vector};

/// An agent that learns while it acts, one transition at a time.
pub trait OnlineAgent: Send {
    fn name(&self) -> &'static str;

    fn begin_episode(&mut self, _episode: usize) {}

    fn act(&mut self, state: &[f64], rng: &mut SeededRng) -> usize;

    /// Folds in one transition and improves the policy when due.
    fn observe(&mut self, transition: &Transition, rng: &mut SeededRng) -> Result<()>;

    /// Parameters the behaviour policy is currently greedy with respect to.
    fn behaviour(&self) -> &Vector;

    fn stats(&self) -> &SufficientStats;

    /// Improvement steps whose solve failed and kept the previous parameters.
    fn failed_updates(&self) -> usize;
}

/// Runs `episodes` episodes, calling `on_step` after every observed transition.
pub fn run_online_with(
    env: &mut dyn Environment,
    agent: &mut dyn OnlineAgent,
    episodes: usize,
    rng: &mut SeededRng,
    mut on_step: impl FnMut(&dyn OnlineAgent),
) -> Result<Vec<EpisodeLog>> {
    let mut logs = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        agent.begin_episode(ep);
        let mut state = env.reset();
        let mut ret = 0.0;
        loop {
            let action = agent.act(&state, rng);
            let out = env.step(action)?;
            ret += out.reward;
            let done = out.done();
            let t = Transition {
                state: std::mem::take(&mut state),
                action,
                reward: out.reward,
                next_state: out.next_state,
                terminal: out.terminal,
            };
            agent.observe(&t, rng)?;
            on_step(agent);
            state = t.next_state;
            if done {
                break;
            }
        }
        logs.push(EpisodeLog { steps: env.steps(), undiscounted_return: ret, reached_goal: env.reached_goal() });
    }
    Ok(logs)
}

pub fn run_online(
    env: &mut dyn Environment,
    agent: &mut dyn OnlineAgent,
    episodes: usize,
    rng: &mut SeededRng,
) -> Result<Vec<EpisodeLog>> {
    run_online_with(env, agent, episodes, rng, |_| {})
}

/// Hyperparameters shared by every agent; each agent reads the ones it uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::k_interval")]
    pub k_interval: usize,
    #[serde(default = "defaults::epsilon0")]
    pub epsilon0: f64,
    #[serde(default = "defaults::epsilon_decay")]
    pub epsilon_decay: f64,
    #[serde(default = "defaults::epsilon_floor")]
    pub epsilon_floor: f64,
    /// Offline agents: uniform-random transitions collected before learning.
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
}

mod defaults {
    pub fn alpha() -> f64 {
        0.1
    }
    pub fn beta() -> f64 {
        0.1
    }
    pub fn k_interval() -> usize {
        20
    }
    pub fn epsilon0() -> f64 {
        1.0
    }
    pub fn epsilon_decay() -> f64 {
        0.997
    }
    pub fn epsilon_floor() -> f64 {
        0.05
    }
    pub fn samples() -> usize {
        5000
    }
    pub fn max_iter() -> usize {
        20
    }
}

impl AgentSpec {
    pub fn named(name: &str) -> Self {
        AgentSpec {
            name: name.to_string(),
            alpha: defaults::alpha(),
            beta: defaults::beta(),
            k_interval: defaults::k_interval(),
            epsilon0: defaults::epsilon0(),
            epsilon_decay: defaults::epsilon_decay(),
            epsilon_floor: defaults::epsilon_floor(),
            samples: defaults::samples(),
            max_iter: defaults::max_iter(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !AGENTS.iter().any(|(n, _)| *n == self.name) {
            return Err(Error::UnknownName { kind: "agent", name: self.name.clone() });
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("agent.alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("agent.beta must be positive, got {}", self.beta));
        }
        if self.k_interval == 0 {
            return bad("agent.k_interval must be at least 1".into());
        }
        for (key, v) in [("epsilon0", self.epsilon0), ("epsilon_floor", self.epsilon_floor)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("agent.{key} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad(format!("agent.epsilon_decay must lie in (0, 1], got {}", self.epsilon_decay));
        }
        if self.samples == 0 || self.max_iter == 0 {
            return bad("agent.samples and agent.max_iter must be at least 1".into());
        }
        Ok(())
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule { initial: self.epsilon0, decay: self.epsilon_decay, floor: self.epsilon_floor }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub episodes: Vec<EpisodeLog>,
    pub failed_updates: usize,
}

/// Anything the harness can run for a number of episodes on one environment.
pub trait Agent: Send {
    fn name(&self) -> &'static str;
    fn run(&mut self, env: &mut dyn Environment, episodes: usize, rng: &mut SeededRng) -> Result<RunReport>;
}

impl<T: OnlineAgent> Agent for T {
    fn name(&self) -> &'static str {
        OnlineAgent::name(self)
    }

    fn run(&mut self, env: &mut dyn Environment, episodes: usize, rng: &mut SeededRng) -> Result<RunReport> {
        let episodes = run_online(env, self, episodes, rng)?;
        Ok(RunReport { episodes, failed_updates: self.failed_updates() })
    }
}

/// Collects a uniform-random batch, runs offline policy iteration on it, then
/// replays the resulting greedy policy.
pub struct OfflineAgent {
    name: &'static str,
    evaluator: Box<dyn PolicyEvaluator>,
    features: Arc<FeatureMap>,
    gamma: f64,
    samples: usize,
    limits: IterationLimits,
    result: Option<OfflineResult>,
}

impl OfflineAgent {
    pub fn result(&self) -> Option<&OfflineResult> {
        self.result.as_ref()
    }
}

impl Agent for OfflineAgent {
    fn name(&self) -> &'static str {
        self.name
    }

    fn run(&mut self, env: &mut dyn Environment, episodes: usize, rng: &mut SeededRng) -> Result<RunReport> {
        if env.spec().max_steps.is_none() && episodes > 0 {
            return Err(Error::Config(format!(
                "{} has no episode cap; evaluate offline agents on it with the chain report",
                env.spec().name
            )));
        }
        let data = collect_uniform(env, self.samples, rng)?;
        let res = policy_iteration(
            &data,
            &self.features,
            self.gamma,
            self.evaluator.as_ref(),
            Vector::zeros(self.features.k()),
            self.limits,
        )?;
        let policy = LinearQPolicy::new(res.final_theta().clone(), Arc::clone(&self.features))?;
        self.result = Some(res);
        let episodes = (0..episodes).map(|_| rollout(env, |s| policy.greedy(s))).collect::<Result<_>>()?;
        Ok(RunReport { episodes, failed_updates: 0 })
    }
}

type AgentFactory = fn(&AgentSpec, Arc<FeatureMap>, f64, &mut SeededRng) -> Box<dyn Agent>;

fn offline(spec: &AgentSpec, name: &'static str, evaluator: Box<dyn PolicyEvaluator>, fm: Arc<FeatureMap>, gamma: f64) -> Box<dyn Agent> {
    Box::new(OfflineAgent {
        name,
        evaluator,
        features: fm,
        gamma,
        samples: spec.samples,
        limits: IterationLimits { max_iter: spec.max_iter, ..IterationLimits::default() },
        result: None,
    })
}

/// Agents selectable by name.
pub const AGENTS: &[(&str, AgentFactory)] = &[
    ("lspi", |s, fm, g, _| offline(s, "lspi", Box::new(offline::Lstd::default()), fm, g)),
    ("blspi", |s, fm, g, _| offline(s, "blspi", Box::new(offline::Blstd::new(s.alpha, s.beta)), fm, g)),
    ("rblspi", |s, fm, gamma, rng| {
        let cfg = RblspiConfig {
            alpha: s.alpha,
            beta: s.beta,
            k_interval: s.k_interval,
            gamma,
            exploration: Exploration::Sample,
        };
        Box::new(Rblspi::new(cfg, fm, rng))
    }),
    ("online_lspi", |s, fm, gamma, _| {
        let cfg = OnlineLspiConfig { k_interval: s.k_interval, gamma, epsilon: s.epsilon_schedule() };
        Box::new(OnlineLspi::new(cfg, fm))
    }),
];

pub fn agent_names() -> impl Iterator<Item = &'static str> {
    AGENTS.iter().map(|(n, _)| *n)
}

/// Builds a validated agent; `rng` supplies any initial randomness.
pub fn make_agent(spec: &AgentSpec, features: Arc<FeatureMap>, gamma: f64, rng: &mut SeededRng) -> Result<Box<dyn Agent>> {
    spec.validate()?;
    let (_, factory) = AGENTS.iter().find(|(n, _)| *n == spec.name).expect("validated name");
    Ok(factory(spec, features, gamma, rng))
}
