//! Random finite MDPs for exact verification and a continuous point-mass task.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::mdp::{Conditioning, FiniteMdp, Simulator, Step, TabularPolicy};
use crate::rng::{seeded, Generator};

/// Symmetric Dirichlet(1) row: normalized unit exponentials.
fn dirichlet_row<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = row.iter().sum();
    for p in &mut row {
        *p /= total;
    }
    row
}

/// Random finite MDP: μ and every `p(·|s,a)` drawn from a symmetric
/// Dirichlet(1), rewards uniform in `reward_range`.
pub fn random_finite_mdp(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    reward_range: (f64, f64),
) -> FiniteMdp {
    assert!(
        n_states >= 1 && n_actions >= 1,
        "need at least one state and one action"
    );
    let mut rng = seeded(seed);
    let initial = dirichlet_row(n_states, &mut rng);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(dirichlet_row(n_states, &mut rng));
    }
    let (lo, hi) = reward_range;
    let reward = (0..n_states * n_actions)
        .map(|_| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        })
        .collect();
    FiniteMdp::new(n_states, n_actions, initial, transition, reward)
        .expect("generated MDP is valid")
}

/// Random plain policy with Dirichlet(1) rows.
pub fn random_policy(seed: u64, n_states: usize, n_actions: usize) -> TabularPolicy {
    let mut rng = seeded(seed);
    let table = (0..n_states)
        .flat_map(|_| dirichlet_row(n_actions, &mut rng))
        .collect();
    TabularPolicy::new(Conditioning::State, n_states, n_actions, table).expect("valid policy")
}

/// Random augmented policy `π̃(ã | s, a)` with Dirichlet(1) rows.
pub fn random_augmented_policy(seed: u64, n_states: usize, n_actions: usize) -> TabularPolicy {
    let mut rng = seeded(seed);
    let table = (0..n_states * n_actions)
        .flat_map(|_| dirichlet_row(n_actions, &mut rng))
        .collect();
    TabularPolicy::new(Conditioning::StateAction, n_states, n_actions, table).expect("valid policy")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassConfig {
    pub dims: usize,
    /// Velocity gain per unit force.
    pub gain: f64,
    pub damping: f64,
    pub noise_std: f64,
    pub episode_length: usize,
    pub goal: Vec<f64>,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            gain: 0.1,
            damping: 0.95,
            noise_std: 0.005,
            episode_length: 200,
            goal: vec![0.0, 0.0],
        }
    }
}

/// Damped point mass in `[-1, 1]^d` pushed by a bounded force.
///
/// Observation: `[position, velocity]`. Reward: `-‖position - goal‖₂` of
/// the state the step starts from. Episodes start at a uniform random
/// position at rest and end after `episode_length` steps.
#[derive(Debug, Clone)]
pub struct PointMassEnv {
    config: PointMassConfig,
    position: Vec<f64>,
    velocity: Vec<f64>,
    t: usize,
    rng: Generator,
    clipped_actions: u64,
}

impl PointMassEnv {
    pub fn new(config: PointMassConfig, rng: Generator) -> Self {
        assert_eq!(config.goal.len(), config.dims, "goal dimension must match");
        let d = config.dims;
        Self {
            config,
            position: vec![0.0; d],
            velocity: vec![0.0; d],
            t: 0,
            rng,
            clipped_actions: 0,
        }
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.config
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn goal(&self) -> &[f64] {
        &self.config.goal
    }

    /// Number of actions that arrived outside `[-1, 1]` and were clipped.
    pub fn clipped_actions(&self) -> u64 {
        self.clipped_actions
    }

    /// Place the mass at an explicit state (the episode clock restarts).
    pub fn set_state(&mut self, position: &[f64], velocity: &[f64]) {
        self.position.copy_from_slice(position);
        self.velocity.copy_from_slice(velocity);
        self.t = 0;
    }

    pub fn distance_to_goal(&self) -> f64 {
        let sq: f64 = self
            .position
            .iter()
            .zip(&self.config.goal)
            .map(|(p, g)| (p - g) * (p - g))
            .sum();
        libm::sqrt(sq)
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = self.position.clone();
        obs.extend_from_slice(&self.velocity);
        obs
    }
}

impl Simulator for PointMassEnv {
    fn observation_dim(&self) -> usize {
        2 * self.config.dims
    }

    fn action_dim(&self) -> usize {
        self.config.dims
    }

    fn reset(&mut self) -> Vec<f64> {
        for p in &mut self.position {
            *p = self.rng.random_range(-1.0..1.0);
        }
        self.velocity.iter_mut().for_each(|v| *v = 0.0);
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Step {
        assert_eq!(action.len(), self.config.dims, "action dimension");
        let reward = -self.distance_to_goal();
        let PointMassConfig {
            gain,
            damping,
            noise_std,
            ..
        } = self.config;
        let mut clipped = false;
        for (i, &a) in action.iter().enumerate().take(self.config.dims) {
            let mut force = a;
            if !(-1.0..=1.0).contains(&force) {
                clipped = true;
                force = force.clamp(-1.0, 1.0);
            }
            let noise: f64 = if noise_std > 0.0 {
                noise_std * Distribution::<f64>::sample(&StandardNormal, &mut self.rng)
            } else {
                0.0
            };
            self.velocity[i] = damping * self.velocity[i] + gain * force + noise;
            self.position[i] = (self.position[i] + self.velocity[i]).clamp(-1.0, 1.0);
        }
        if clipped {
            self.clipped_actions += 1;
        }
        self.t += 1;
        Step {
            observation: self.observation(),
            reward,
            terminal: self.t >= self.config.episode_length,
        }
    }
}

/// Proportional-derivative controller driving the mass to its goal; the
/// baseline used to sanity-check learning curves.
pub fn pd_controller(env: &PointMassEnv, kp: f64, kd: f64) -> Vec<f64> {
    env.position()
        .iter()
        .zip(env.velocity())
        .zip(env.goal())
        .map(|((p, v), g)| (kp * (g - p) - kd * v).clamp(-1.0, 1.0))
        .collect()
}
