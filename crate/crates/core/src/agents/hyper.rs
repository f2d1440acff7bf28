use alloc::vec::Vec;

use crate::nn::network::DEFAULT_HIDDEN;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub lr: f64,
    pub gamma: f64,
    /// Target smoothing `τ` in `θ̄ ← τθ + (1−τ)θ̄`.
    pub tau: f64,
    pub batch_size: usize,
    /// Multiplies rewards before they enter the replay memory.
    pub reward_scale: f64,
    pub entropy_scale: f64,
    /// Weight of the policy loss in the combined actor-critic loss.
    pub beta: f64,
    /// Environment steps of uniform-random exploration before learning.
    pub start_training: u64,
    pub steps_per_env_step: usize,
    pub popart_alpha: f64,
    pub hidden: Vec<usize>,
    pub replay_capacity: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            reward_scale: 5.0,
            entropy_scale: 1.0,
            beta: 0.2,
            start_training: 10_000,
            steps_per_env_step: 1,
            popart_alpha: 3e-4,
            hidden: DEFAULT_HIDDEN.to_vec(),
            replay_capacity: 1_000_000,
        }
    }
}

impl Hyperparameters {
    /// Entropy temperature `α` relative to unscaled rewards.
    pub fn temperature(&self) -> f64 {
        self.entropy_scale / self.reward_scale
    }

    /// Temperature in the units of the stored (scaled) rewards, which is
    /// what the losses see: `α · reward_scale = entropy_scale`.
    pub fn training_temperature(&self) -> f64 {
        self.temperature() * self.reward_scale
    }
}
