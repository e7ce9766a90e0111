use std::f64::consts::FRAC_PI_6;

use super::{rk4, Dynamics, EnvSpec, State};
use crate::numerics::SeededRng;

const GRAVITY: f64 = 9.8;
const CART_MASS: f64 = 1.0;
const POLE_MASS: f64 = 0.1;
const HALF_LENGTH: f64 = 0.5;
const DT: f64 = 0.02;

pub const FORCE: f64 = 10.0;
pub const TRACK_LIMIT: f64 = 2.4;
pub const ANGLE_LIMIT: f64 = FRAC_PI_6;
/// Feature box `(p, v, θ, θ̇)`, narrower than the failure region so the
/// 3-per-dimension grid resolves the states a balancing policy visits.
pub const FEATURE_BOX: [f64; 4] = [1.2, 1.0, 0.3, 1.0];

/// Pole hinged on a cart; +1 for every step the pole stays up and the cart on track.
#[derive(Clone, Debug, Default)]
pub struct CartPole;

impl CartPole {
    /// State order `(p, v, θ, θ̇)`.
    pub fn derivative(x: &[f64; 4], force: f64) -> [f64; 4] {
        let total = CART_MASS + POLE_MASS;
        let (s, c) = x[2].sin_cos();
        let temp = (force + POLE_MASS * HALF_LENGTH * x[3] * x[3] * s) / total;
        let theta_acc = (GRAVITY * s - c * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * c * c / total));
        let x_acc = temp - POLE_MASS * HALF_LENGTH * theta_acc * c / total;
        [x[1], x_acc, x[3], theta_acc]
    }

    pub fn integrate(state: [f64; 4], force: f64) -> [f64; 4] {
        rk4(state, DT, |x| Self::derivative(x, force))
    }

    fn failed(x: &[f64]) -> bool {
        x[0].abs() >= TRACK_LIMIT || x[2].abs() >= ANGLE_LIMIT
    }
}

impl Dynamics for CartPole {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "cart_pole",
            state_dim: 4,
            action_count: 2,
            discount: 0.99,
            max_steps: Some(500),
            bounds: FEATURE_BOX.iter().map(|&h| (-h, h)).collect(),
        }
    }

    fn initial_state(&self, rng: &mut SeededRng) -> State {
        (0..4).map(|_| rng.uniform(-0.05, 0.05)).collect()
    }

    fn transition(&self, state: &[f64], action: usize, _: &mut SeededRng) -> (State, f64, bool) {
        let force = if action == 1 { FORCE } else { -FORCE };
        let next = Self::integrate([state[0], state[1], state[2], state[3]], force);
        let failed = Self::failed(&next);
        (next.to_vec(), if failed { 0.0 } else { 1.0 }, failed)
    }

    fn success(&self, _: &[f64], terminal: bool, _: usize) -> bool {
        !terminal
    }
}
