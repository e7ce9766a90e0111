use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use super::{rk4, Dynamics, EnvSpec, State};
use crate::numerics::SeededRng;

const GRAVITY: f64 = 9.8;
const POLE_MASS: f64 = 2.0;
const CART_MASS: f64 = 8.0;
const LENGTH: f64 = 0.5;
const DT: f64 = 0.1;

pub const FORCES: [f64; 3] = [-50.0, 0.0, 50.0];
pub const FORCE_NOISE: f64 = 10.0;
/// Feature box. Narrower than the failure region: a balancing policy lives
/// near the top, and RBF centres spread over the whole fall range are too coarse there.
pub const FEATURE_ANGLE: f64 = FRAC_PI_4;
pub const FEATURE_VELOCITY: f64 = 1.0;

/// Pendulum on a cart balanced by fixed-magnitude noisy pushes.
#[derive(Clone, Debug, Default)]
pub struct InvertedPendulum;

impl InvertedPendulum {
    pub fn derivative(x: &[f64; 2], force: f64) -> [f64; 2] {
        let (theta, omega) = (x[0], x[1]);
        let a = 1.0 / (POLE_MASS + CART_MASS);
        let (s, c) = theta.sin_cos();
        let num = GRAVITY * s - a * POLE_MASS * LENGTH * omega * omega * (2.0 * theta).sin() / 2.0 - a * c * force;
        let den = 4.0 * LENGTH / 3.0 - a * POLE_MASS * LENGTH * c * c;
        [omega, num / den]
    }

    /// One control interval with the total (noisy) force held constant.
    pub fn integrate(state: [f64; 2], force: f64) -> [f64; 2] {
        rk4(state, DT, |x| Self::derivative(x, force))
    }
}

impl Dynamics for InvertedPendulum {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "inverted_pendulum",
            state_dim: 2,
            action_count: 3,
            discount: 0.95,
            max_steps: Some(3000),
            bounds: vec![(-FEATURE_ANGLE, FEATURE_ANGLE), (-FEATURE_VELOCITY, FEATURE_VELOCITY)],
        }
    }

    fn initial_state(&self, rng: &mut SeededRng) -> State {
        vec![rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)]
    }

    fn transition(&self, state: &[f64], action: usize, rng: &mut SeededRng) -> (State, f64, bool) {
        let force = FORCES[action] + rng.uniform(-FORCE_NOISE, FORCE_NOISE);
        let next = Self::integrate([state[0], state[1]], force);
        let fell = next[0].abs() >= FRAC_PI_2;
        (next.to_vec(), if fell { -1.0 } else { 0.0 }, fell)
    }

    fn success(&self, _: &[f64], terminal: bool, _: usize) -> bool {
        !terminal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{fine_euler, Environment, Episodic};

    #[test]
    fn falling_past_horizontal_is_terminal_with_penalty() {
        let mut env = Episodic::new(InvertedPendulum, 0);
        env.set_state(vec![FRAC_PI_2 + 1e-3, 0.5]);
        let out = env.step(1).unwrap();
        assert!(out.terminal);
        assert_eq!(out.reward, -1.0);
        assert!(!env.reached_goal());
    }

    #[test]
    fn upright_equilibrium_holds_without_force() {
        let next = InvertedPendulum::integrate([0.0, 0.0], 0.0);
        assert_eq!(next, [0.0, 0.0]);
    }

    #[test]
    fn matches_fine_euler_integration() {
        for (state, force) in [([0.0, 0.0], 50.0), ([0.3, -0.5], -60.0), ([-1.0, 1.5], 40.0), ([1.2, 0.0], 0.0)] {
            let coarse = InvertedPendulum::integrate(state, force);
            let fine = fine_euler(state, DT, 100, |x| InvertedPendulum::derivative(x, force));
            assert!((coarse[0] - fine[0]).abs() < 1e-3, "{state:?}: {coarse:?} vs {fine:?}");
        }
    }

    #[test]
    fn zero_reward_while_balanced() {
        let mut env = Episodic::new(InvertedPendulum, 3);
        env.reset();
        let out = env.step(1).unwrap();
        assert_eq!(out.reward, 0.0);
    }
}
