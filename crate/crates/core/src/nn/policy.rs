//! Tanh-squashed diagonal Gaussian policy with reparameterized sampling.

use alloc::vec::Vec;

use super::matrix::Matrix;
use super::tape::{Tape, Var};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Largest representable action magnitude; keeps samples inside the open box.
const ACTION_BOUND: f64 = 1.0 - f64::EPSILON;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticActionSample {
    pub pre_squash: Vec<f64>,
    pub action: Vec<f64>,
    pub log_density: f64,
    pub noise: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// `log(1 − tanh(u)²)` computed without cancellation.
fn log_squash_jacobian(u: f64) -> f64 {
    2.0 * (core::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// `a = tanh(mean + exp(log_std)·ε)` with its log-density. `log_std` is
/// clamped to `[LOG_STD_MIN, LOG_STD_MAX]` first.
pub fn policy_sample(mean: &[f64], log_std: &[f64], noise: &[f64]) -> StochasticActionSample {
    assert!(
        mean.len() == log_std.len() && mean.len() == noise.len(),
        "policy dimensions"
    );
    let mut pre_squash = Vec::with_capacity(mean.len());
    let mut action = Vec::with_capacity(mean.len());
    let mut log_density = 0.0;
    for ((&m, &ls), &e) in mean.iter().zip(log_std).zip(noise) {
        let ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let u = m + libm::exp(ls) * e;
        pre_squash.push(u);
        action.push(libm::tanh(u).clamp(-ACTION_BOUND, ACTION_BOUND));
        log_density += -0.5 * e * e - ls - HALF_LN_2PI - log_squash_jacobian(u);
    }
    StochasticActionSample {
        pre_squash,
        action,
        log_density,
        noise: noise.to_vec(),
    }
}

/// Density of a one-dimensional squashed Gaussian at `a ∈ (−1, 1)`.
pub fn squashed_density(a: f64, mean: f64, log_std: f64) -> f64 {
    let u = libm::atanh(a);
    let sigma = libm::exp(log_std);
    let z = (u - mean) / sigma;
    libm::exp(-0.5 * z * z - HALF_LN_2PI) / (sigma * (1.0 - a * a))
}

/// Reparameterized batch sample on a tape. `mean` and `log_std` are `B × d`
/// and `noise` holds the fixed `ε`. Returns the actions (`B × d`) and their
/// log-densities (`B × 1`).
pub fn tape_sample(tape: &mut Tape, mean: Var, log_std: Var, noise: &Matrix) -> (Var, Var) {
    let log_std = tape.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX);
    let std = tape.exp(log_std);
    let eps = tape.constant(noise.clone());
    let spread = tape.mul(std, eps);
    let u = tape.add(mean, spread);
    let action = tape.tanh(u);
    // per entry: −½ε² − log σ − ½ln2π − 2ln2 + 2u + 2·softplus(−2u)
    let m2u = tape.scale(u, -2.0);
    let sp = tape.softplus(m2u);
    let corr = tape.add(u, sp);
    let corr = tape.scale(corr, 2.0);
    let body = tape.sub(corr, log_std);
    let offset = noise.map(|e| -0.5 * e * e - HALF_LN_2PI - 2.0 * core::f64::consts::LN_2);
    let offset = tape.constant(offset);
    let entries = tape.add(body, offset);
    let log_prob = tape.row_sum(entries);
    (action, tape.name(log_prob, "log_prob"))
}
