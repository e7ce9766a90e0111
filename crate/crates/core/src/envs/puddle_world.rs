use super::{Dynamics, EnvSpec, State};
use crate::numerics::SeededRng;

pub const STEP: f64 = 0.05;
pub const NOISE_STD: f64 = 0.01;
pub const PUDDLE_RADIUS: f64 = 0.1;
pub const PENALTY_SCALE: f64 = 400.0;
/// Centre-line segments of the two capsule puddles.
pub const PUDDLES: [[(f64, f64); 2]; 2] = [[(0.10, 0.75), (0.45, 0.75)], [(0.45, 0.40), (0.45, 0.80)]];

/// Continuous 2-D navigation to the upper-right corner around two puddles.
#[derive(Clone, Debug, Default)]
pub struct PuddleWorld;

fn segment_distance(p: (f64, f64), seg: [(f64, f64); 2]) -> f64 {
    let [(ax, ay), (bx, by)] = seg;
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0) };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

impl PuddleWorld {
    /// Penalty in `[-40, 0]`; deepest on a puddle's centre line.
    pub fn puddle_penalty(x: f64, y: f64) -> f64 {
        PUDDLES
            .iter()
            .map(|&seg| {
                let d = segment_distance((x, y), seg);
                if d < PUDDLE_RADIUS {
                    -PENALTY_SCALE * (PUDDLE_RADIUS - d)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::min)
    }

    pub fn in_puddle(x: f64, y: f64) -> bool {
        PUDDLES.iter().any(|&seg| segment_distance((x, y), seg) < PUDDLE_RADIUS)
    }

    pub fn in_goal(x: f64, y: f64) -> bool {
        x + y >= 1.9
    }
}

impl Dynamics for PuddleWorld {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "puddle_world",
            state_dim: 2,
            action_count: 4,
            discount: 0.99,
            max_steps: Some(500),
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        }
    }

    fn initial_state(&self, rng: &mut SeededRng) -> State {
        loop {
            let (x, y) = (rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
            if !Self::in_puddle(x, y) && !Self::in_goal(x, y) {
                return vec![x, y];
            }
        }
    }

    fn transition(&self, state: &[f64], action: usize, rng: &mut SeededRng) -> (State, f64, bool) {
        let (dx, dy) = match action {
            0 => (0.0, STEP),
            1 => (0.0, -STEP),
            2 => (-STEP, 0.0),
            _ => (STEP, 0.0),
        };
        let x = (state[0] + dx + NOISE_STD * rng.standard_normal()).clamp(0.0, 1.0);
        let y = (state[1] + dy + NOISE_STD * rng.standard_normal()).clamp(0.0, 1.0);
        let terminal = Self::in_goal(state[0], state[1]) || Self::in_goal(x, y);
        (vec![x, y], -1.0 + Self::puddle_penalty(x, y), terminal)
    }

    fn success(&self, _: &[f64], terminal: bool, _: usize) -> bool {
        terminal
    }
}
