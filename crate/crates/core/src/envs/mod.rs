//! Benchmark MDPs behind one episodic interface.

mod cart_pole;
mod chain_walk;
mod mountain_car;
mod pendulum;
mod puddle_world;

pub use cart_pole::CartPole;
pub use chain_walk::{ChainModel, ChainWalk};
pub use mountain_car::MountainCar;
pub use pendulum::InvertedPendulum;
pub use puddle_world::PuddleWorld;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

pub type State = Vec<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_count: usize,
    pub discount: f64,
    /// `None` for continuing tasks.
    pub max_steps: Option<usize>,
    /// Box used to normalise states for feature construction.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: usize,
    pub reward: f64,
    pub next_state: State,
    /// True only for absorbing termination; step-cap truncation bootstraps.
    pub terminal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: State,
    pub terminal: bool,
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeLog {
    pub steps: usize,
    pub undiscounted_return: f64,
    pub reached_goal: bool,
}

/// A simulator with its own seeded noise source.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns its initial state.
    fn reset(&mut self) -> State;

    /// Advances one step. Errors once the episode has ended.
    fn step(&mut self, action: usize) -> Result<StepOutcome>;

    fn state(&self) -> &[f64];

    /// Steps taken in the current episode.
    fn steps(&self) -> usize;

    /// Whether the episode that just ended counts as a success.
    fn reached_goal(&self) -> bool;
}

/// Environment-specific dynamics; [`Episodic`] supplies the bookkeeping.
pub trait Dynamics: Send {
    fn spec(&self) -> EnvSpec;
    fn initial_state(&self, rng: &mut SeededRng) -> State;
    /// Returns `(next_state, reward, terminal)`.
    fn transition(&self, state: &[f64], action: usize, rng: &mut SeededRng) -> (State, f64, bool);
    /// Success flag for an episode ending in `state` after `steps` steps.
    fn success(&self, state: &[f64], terminal: bool, steps: usize) -> bool;
}

pub struct Episodic<D> {
    dynamics: D,
    spec: EnvSpec,
    rng: SeededRng,
    state: State,
    steps: usize,
    done: bool,
    terminal: bool,
}

impl<D: Dynamics> Episodic<D> {
    pub fn new(dynamics: D, seed: u64) -> Self {
        let spec = dynamics.spec();
        let mut rng = SeededRng::new(seed);
        let state = dynamics.initial_state(&mut rng);
        Episodic { dynamics, spec, rng, state, steps: 0, done: false, terminal: false }
    }

    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }

    /// Places the system in `state` at the start of a fresh episode.
    pub fn set_state(&mut self, state: State) {
        self.state = state;
        self.steps = 0;
        self.done = false;
        self.terminal = false;
    }
}

impl<D: Dynamics> Environment for Episodic<D> {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> State {
        let s = self.dynamics.initial_state(&mut self.rng);
        self.set_state(s.clone());
        s
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        if action >= self.spec.action_count {
            return Err(Error::ActionOutOfRange { action, action_count: self.spec.action_count });
        }
        let (next, reward, terminal) = self.dynamics.transition(&self.state, action, &mut self.rng);
        self.steps += 1;
        let truncated = !terminal && self.spec.max_steps.is_some_and(|cap| self.steps >= cap);
        self.done = terminal || truncated;
        self.terminal = terminal;
        self.state = next.clone();
        Ok(StepOutcome { reward, next_state: next, terminal, truncated })
    }

    fn state(&self) -> &[f64] {
        &self.state
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn reached_goal(&self) -> bool {
        self.done && self.dynamics.success(&self.state, self.terminal, self.steps)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvOptions {
    #[serde(default)]
    pub sparse: bool,
}

type EnvFactory = fn(&EnvOptions, u64) -> Box<dyn Environment>;

/// Environments selectable by name.
pub const ENVIRONMENTS: &[(&str, EnvFactory)] = &[
    ("chain_walk", |_, seed| Box::new(Episodic::new(ChainWalk::default(), seed))),
    ("mountain_car", |o, seed| Box::new(Episodic::new(MountainCar::new(o.sparse), seed))),
    ("inverted_pendulum", |_, seed| Box::new(Episodic::new(InvertedPendulum, seed))),
    ("cart_pole", |_, seed| Box::new(Episodic::new(CartPole, seed))),
    ("puddle_world", |_, seed| Box::new(Episodic::new(PuddleWorld, seed))),
];

pub fn env_names() -> impl Iterator<Item = &'static str> {
    ENVIRONMENTS.iter().map(|(n, _)| *n)
}

pub fn make_env(name: &str, options: &EnvOptions, seed: u64) -> Result<Box<dyn Environment>> {
    ENVIRONMENTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f(options, seed))
        .ok_or_else(|| Error::UnknownName { kind: "environment", name: name.to_string() })
}

/// Collects `n` transitions under uniformly random actions, resetting at episode ends.
pub fn collect_uniform(env: &mut dyn Environment, n: usize, rng: &mut SeededRng) -> Result<Vec<Transition>> {
    let mut out = Vec::with_capacity(n);
    let mut state = env.reset();
    let actions = env.spec().action_count;
    while out.len() < n {
        let action = rng.below(actions);
        let step = env.step(action)?;
        out.push(Transition {
            state: std::mem::replace(&mut state, step.next_state.clone()),
            action,
            reward: step.reward,
            next_state: step.next_state.clone(),
            terminal: step.terminal,
        });
        if step.done() {
            state = env.reset();
        }
    }
    Ok(out)
}

/// Runs one episode with a fixed state-feedback policy.
pub fn rollout(env: &mut dyn Environment, mut policy: impl FnMut(&[f64]) -> usize) -> Result<EpisodeLog> {
    let mut state = env.reset();
    let mut ret = 0.0;
    loop {
        let step = env.step(policy(&state))?;
        ret += step.reward;
        let done = step.done();
        state = step.next_state;
        if done {
            return Ok(EpisodeLog { steps: env.steps(), undiscounted_return: ret, reached_goal: env.reached_goal() });
        }
    }
}

/// Classic fourth-order Runge-Kutta step for an autonomous ODE.
pub(crate) fn rk4<const N: usize>(x: [f64; N], dt: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let shift = |x: &[f64; N], k: &[f64; N], h: f64| {
        let mut y = *x;
        for i in 0..N {
            y[i] += h * k[i];
        }
        y
    };
    let k1 = f(&x);
    let k2 = f(&shift(&x, &k1, dt / 2.0));
    let k3 = f(&shift(&x, &k2, dt / 2.0));
    let k4 = f(&shift(&x, &k3, dt));
    let mut y = x;
    for i in 0..N {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    y
}

/// Forward Euler with `substeps` equal steps; test oracle for the RK4 integrators.
#[cfg(test)]
pub(crate) fn fine_euler<const N: usize>(
    x: [f64; N],
    dt: f64,
    substeps: usize,
    f: impl Fn(&[f64; N]) -> [f64; N],
) -> [f64; N] {
    let h = dt / substeps as f64;
    let mut y = x;
    for _ in 0..substeps {
        let d = f(&y);
        for i in 0..N {
            y[i] += h * d[i];
        }
    }
    y
}
