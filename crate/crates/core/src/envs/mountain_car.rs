use super::{Dynamics, EnvSpec, State};
use crate::numerics::SeededRng;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.5;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;

/// Underpowered car in a valley; dense (-1 per step) or sparse (+1 on arrival) reward.
#[derive(Clone, Debug, Default)]
pub struct MountainCar {
    pub sparse: bool,
}

impl MountainCar {
    pub fn new(sparse: bool) -> Self {
        MountainCar { sparse }
    }

    /// Deterministic car dynamics for throttle `action - 1`.
    pub fn integrate(p: f64, v: f64, action: usize) -> (f64, f64) {
        let u = action as f64 - 1.0;
        let mut v = (v + 0.001 * u - 0.0025 * (3.0 * p).cos()).clamp(-MAX_SPEED, MAX_SPEED);
        let p = (p + v).clamp(MIN_POSITION, MAX_POSITION);
        if p <= MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        (p, v)
    }
}

impl Dynamics for MountainCar {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: if self.sparse { "sparse_mountain_car" } else { "mountain_car" },
            state_dim: 2,
            action_count: 3,
            discount: 0.99,
            max_steps: Some(500),
            bounds: vec![(MIN_POSITION, MAX_POSITION), (-MAX_SPEED, MAX_SPEED)],
        }
    }

    fn initial_state(&self, rng: &mut SeededRng) -> State {
        vec![rng.uniform(-0.6, -0.4), 0.0]
    }

    fn transition(&self, state: &[f64], action: usize, _: &mut SeededRng) -> (State, f64, bool) {
        // a state already at the hilltop is absorbing
        let at_goal = state[0] >= GOAL_POSITION;
        let (p, v) = if at_goal { (state[0], state[1]) } else { Self::integrate(state[0], state[1], action) };
        let terminal = at_goal || p >= GOAL_POSITION;
        let reward = match (self.sparse, terminal) {
            (false, false) => -1.0,
            (false, true) => 0.0,
            (true, false) => 0.0,
            (true, true) => 1.0,
        };
        (vec![p, v], reward, terminal)
    }

    fn success(&self, _: &[f64], terminal: bool, _: usize) -> bool {
        terminal
    }
}
