use super::{Dynamics, EnvSpec, State};
use crate::error::{Error, Result};
use crate::numerics::{solve_general, Matrix, SeededRng, Vector};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Noisy 20-state chain with dead-end boundaries and reward on arriving at either end.
#[derive(Clone, Debug)]
pub struct ChainWalk {
    pub states: usize,
    pub success_prob: f64,
}

impl Default for ChainWalk {
    fn default() -> Self {
        ChainWalk { states: 20, success_prob: 0.9 }
    }
}

/// Exact tabular model, states indexed `0..n` (state `i + 1` in chain numbering).
#[derive(Clone, Debug)]
pub struct ChainModel {
    pub states: usize,
    /// `next[s][a]` lists `(next_state, probability)`.
    pub next: Vec<[Vec<(usize, f64)>; 2]>,
    /// Expected immediate reward of `(s, a)`.
    pub reward: Vec<[f64; 2]>,
}

impl ChainModel {
    /// Exact `V^π = (I − γP^π)⁻¹ R^π` for a deterministic policy.
    pub fn policy_values(&self, policy: &[usize], gamma: f64) -> Result<Vec<f64>> {
        let n = self.states;
        if policy.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: policy.len() });
        }
        if let Some(&a) = policy.iter().find(|&&a| a > 1) {
            return Err(Error::ActionOutOfRange { action: a, action_count: 2 });
        }
        let mut m = Matrix::identity(n);
        let mut r = Vector::zeros(n);
        for s in 0..n {
            for &(t, p) in &self.next[s][policy[s]] {
                m[(s, t)] -= gamma * p;
            }
            r[s] = self.reward[s][policy[s]];
        }
        Ok(solve_general(&m, &r)?.into_vec())
    }

    /// Exact `Q^π(s, a) = R(s, a) + γ Σ P(s' | s, a) V^π(s')`.
    pub fn policy_q(&self, policy: &[usize], gamma: f64) -> Result<Vec<[f64; 2]>> {
        let v = self.policy_values(policy, gamma)?;
        Ok((0..self.states)
            .map(|s| [0, 1].map(|a| self.reward[s][a] + gamma * self.next[s][a].iter().map(|&(t, p)| p * v[t]).sum::<f64>()))
            .collect())
    }
}

impl ChainWalk {
    fn shift(&self, s: usize, dir: usize) -> usize {
        match dir {
            LEFT => s.saturating_sub(1).max(1),
            _ => (s + 1).min(self.states),
        }
    }

    fn arrival_reward(&self, s: usize) -> f64 {
        if s == 1 || s == self.states {
            1.0
        } else {
            0.0
        }
    }

    pub fn model(&self) -> ChainModel {
        let n = self.states;
        let mut next = Vec::with_capacity(n);
        let mut reward = Vec::with_capacity(n);
        for s in 1..=n {
            let mut row: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
            let mut r = [0.0; 2];
            for a in [LEFT, RIGHT] {
                let ok = self.shift(s, a);
                let fail = self.shift(s, 1 - a);
                for (dst, p) in [(ok, self.success_prob), (fail, 1.0 - self.success_prob)] {
                    match row[a].iter_mut().find(|(d, _)| *d == dst - 1) {
                        Some(e) => e.1 += p,
                        None => row[a].push((dst - 1, p)),
                    }
                    r[a] += p * self.arrival_reward(dst);
                }
            }
            next.push(row);
            reward.push(r);
        }
        ChainModel { states: n, next, reward }
    }
}

impl Dynamics for ChainWalk {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "chain_walk",
            state_dim: 1,
            action_count: 2,
            discount: 0.9,
            max_steps: None,
            bounds: vec![(1.0, self.states as f64)],
        }
    }

    fn initial_state(&self, rng: &mut SeededRng) -> State {
        vec![(1 + rng.below(self.states)) as f64]
    }

    fn transition(&self, state: &[f64], action: usize, rng: &mut SeededRng) -> (State, f64, bool) {
        let s = state[0] as usize;
        let dir = if rng.uniform(0.0, 1.0) < self.success_prob { action } else { 1 - action };
        let next = self.shift(s, dir);
        (vec![next as f64], self.arrival_reward(next), false)
    }

    fn success(&self, _: &[f64], _: bool, _: usize) -> bool {
        false
    }
}
