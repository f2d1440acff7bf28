//! Exact tabular value functions and the real-time value identities.
//!
//! All solves are dense direct solves of the discounted Bellman equations;
//! the discount multiplies the bootstrap expectation so fixed points exist.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::augment::{rtmdp, RtmdpConfig};
use crate::mdp::{Conditioning, FiniteMdp, TabularPolicy};
use crate::rng::categorical;
use crate::{Error, Result};

/// Largest value table the dense solver accepts.
pub const MAX_TABLE_ENTRIES: usize = 10_000;
/// Residual bound every solve is checked against.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// `v(s)`, one entry per state.
    State,
    /// `q(s, a)`, entry `s * |A| + a`.
    Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub kind: ValueKind,
    pub discount: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn v(&self, s: usize) -> f64 {
        debug_assert_eq!(self.kind, ValueKind::State);
        self.values[s]
    }

    pub fn q(&self, s: usize, a: usize) -> f64 {
        debug_assert_eq!(self.kind, ValueKind::Action);
        self.values[s * self.n_actions + a]
    }
}

fn check_inputs(
    env: &FiniteMdp,
    policy: &TabularPolicy,
    discount: f64,
    entries: usize,
) -> Result<()> {
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::InvalidDiscount(discount));
    }
    if entries > MAX_TABLE_ENTRIES {
        return Err(Error::TooLarge {
            entries,
            cap: MAX_TABLE_ENTRIES,
        });
    }
    if policy.conditioning() != Conditioning::State {
        return Err(Error::SignatureMismatch {
            expected: Conditioning::State,
            found: policy.conditioning(),
        });
    }
    if policy.n_states() != env.n_states() || policy.n_actions() != env.n_actions() {
        return Err(Error::InvalidPolicy(format!(
            "policy is over {}x{}, MDP over {}x{}",
            policy.n_states(),
            policy.n_actions(),
            env.n_states(),
            env.n_actions()
        )));
    }
    Ok(())
}

/// `Σ_a π(a|s) log π(a|s)` (zero-probability actions contribute nothing).
fn neg_entropy(row: &[f64]) -> f64 {
    row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum()
}

/// Solve `(I − γ M) x = b` and check the residual.
fn solve_linear(n: usize, discount: f64, transition: &[f64], rhs: Vec<f64>) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, transition);
    let system = DMatrix::identity(n, n) - &m * discount;
    let b = DVector::from_vec(rhs);
    let x = system.clone().lu().solve(&b).ok_or(Error::Singular)?;
    let residual = (&system * &x - &b).amax();
    if !x.iter().all(|v| v.is_finite()) || residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::Singular);
    }
    Ok(x.as_slice().to_vec())
}

/// Action values `q(s,a) = r(s,a) + γ E_{s'} E_{a'~π}[q(s',a')]`.
pub fn solve_q(env: &FiniteMdp, policy: &TabularPolicy, discount: f64) -> Result<ValueTable> {
    solve_soft_q(env, policy, discount, 0.0)
}

/// Soft action values
/// `q(s,a) = r(s,a) + γ E_{s'} E_{a'~π}[q(s',a') − α log π(a'|s')]`.
pub fn solve_soft_q(
    env: &FiniteMdp,
    policy: &TabularPolicy,
    discount: f64,
    temperature: f64,
) -> Result<ValueTable> {
    let (ns, na) = (env.n_states(), env.n_actions());
    let n = ns * na;
    check_inputs(env, policy, discount, n)?;
    let mut transition = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for s in 0..ns {
        for a in 0..na {
            let i = s * na + a;
            rhs[i] = env.r(s, a);
            for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                let pi = policy.row(next);
                rhs[i] -= discount * temperature * p * neg_entropy(pi);
                for (a2, &w) in pi.iter().enumerate() {
                    transition[i * n + next * na + a2] += p * w;
                }
            }
        }
    }
    Ok(ValueTable {
        kind: ValueKind::Action,
        discount,
        n_states: ns,
        n_actions: na,
        values: solve_linear(n, discount, &transition, rhs)?,
    })
}

/// State values `v(s) = E_{a~π}[r(s,a) + γ E_{s'}[v(s')]]`.
pub fn solve_v(env: &FiniteMdp, policy: &TabularPolicy, discount: f64) -> Result<ValueTable> {
    let (ns, na) = (env.n_states(), env.n_actions());
    check_inputs(env, policy, discount, ns)?;
    let mut transition = vec![0.0; ns * ns];
    let mut rhs = vec![0.0; ns];
    for s in 0..ns {
        for (a, &w) in policy.row(s).iter().enumerate() {
            rhs[s] += w * env.r(s, a);
            for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                transition[s * ns + next] += w * p;
            }
        }
    }
    Ok(ValueTable {
        kind: ValueKind::State,
        discount,
        n_states: ns,
        n_actions: na,
        values: solve_linear(ns, discount, &transition, rhs)?,
    })
}

/// Soft state values of `RTMDP(E)` under `π̃`, indexed by `s * |A| + a`:
/// `v((s,a)) = r(s,a) + γ E_{s'~p(·|s,a)} E_{ã~π̃(·|s,a)}[v((s',ã)) − α log π̃(ã|s,a)]`.
pub fn solve_soft_v_rtmdp(
    env: &FiniteMdp,
    policy: &TabularPolicy,
    discount: f64,
    temperature: f64,
) -> Result<ValueTable> {
    check_augmented(env, policy)?;
    let (ns, na) = (env.n_states(), env.n_actions());
    let nx = ns * na;
    check_inputs(
        env,
        &TabularPolicy::uniform(Conditioning::State, ns, na),
        discount,
        nx,
    )?;
    let mut transition = vec![0.0; nx * nx];
    let mut rhs = vec![0.0; nx];
    for s in 0..ns {
        for a in 0..na {
            let x = s * na + a;
            let pi = policy.row_at(s, a);
            rhs[x] = env.r(s, a) - discount * temperature * neg_entropy(pi);
            for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                for (emitted, &w) in pi.iter().enumerate() {
                    transition[x * nx + next * na + emitted] += p * w;
                }
            }
        }
    }
    Ok(ValueTable {
        kind: ValueKind::State,
        discount,
        n_states: nx,
        n_actions: na,
        values: solve_linear(nx, discount, &transition, rhs)?,
    })
}

fn check_augmented(env: &FiniteMdp, policy: &TabularPolicy) -> Result<()> {
    if policy.conditioning() != Conditioning::StateAction {
        return Err(Error::SignatureMismatch {
            expected: Conditioning::StateAction,
            found: policy.conditioning(),
        });
    }
    if policy.n_states() != env.n_states() || policy.n_actions() != env.n_actions() {
        return Err(Error::InvalidPolicy(format!(
            "augmented policy is over {}x{}, MDP over {}x{}",
            policy.n_states(),
            policy.n_actions(),
            env.n_states(),
            env.n_actions()
        )));
    }
    Ok(())
}

/// One application of the action-value Bellman operator of `(E, π, γ)`.
pub fn bellman_q(env: &FiniteMdp, policy: &TabularPolicy, discount: f64, q: &[f64]) -> Vec<f64> {
    let (ns, na) = (env.n_states(), env.n_actions());
    let mut out = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let mut next_value = 0.0;
            for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                let v: f64 = policy
                    .row(next)
                    .iter()
                    .zip(&q[next * na..(next + 1) * na])
                    .map(|(w, q)| w * q)
                    .sum();
                next_value += p * v;
            }
            out[s * na + a] = env.r(s, a) + discount * next_value;
        }
    }
    out
}

/// Max residual of `q((s,a),ã) = r(s,a) + γ E_{s'} E_{ã'~π̃(·|s',ã)}[q((s',ã),ã')]`
/// for an action-value table over `RTMDP(E)`.
pub fn lemma1_residual(env: &FiniteMdp, policy: &TabularPolicy, q: &ValueTable) -> f64 {
    let (ns, na) = (env.n_states(), env.n_actions());
    let mut worst = 0.0f64;
    for s in 0..ns {
        for a in 0..na {
            let x = s * na + a;
            for emitted in 0..na {
                let mut expected = 0.0;
                for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                    let next_x = next * na + emitted;
                    let inner: f64 = policy
                        .row_at(next, emitted)
                        .iter()
                        .enumerate()
                        .map(|(a2, w)| w * q.q(next_x, a2))
                        .sum();
                    expected += p * inner;
                }
                let rhs = env.r(s, a) + q.discount * expected;
                worst = worst.max((q.q(x, emitted) - rhs).abs());
            }
        }
    }
    worst
}

/// Max residual of `v((s,a)) = r(s,a) + γ E_{s'~p(·|s,a)} E_{ã~π̃(·|s,a)}[v((s',ã))]`
/// for a state-value table over `RTMDP(E)`.
pub fn lemma2_residual(env: &FiniteMdp, policy: &TabularPolicy, v: &ValueTable) -> f64 {
    let (ns, na) = (env.n_states(), env.n_actions());
    let mut worst = 0.0f64;
    for s in 0..ns {
        for a in 0..na {
            let x = s * na + a;
            let pi = policy.row_at(s, a);
            let mut expected = 0.0;
            for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                let inner: f64 = pi
                    .iter()
                    .enumerate()
                    .map(|(e, w)| w * v.v(next * na + e))
                    .sum();
                expected += p * inner;
            }
            let rhs = env.r(s, a) + v.discount * expected;
            worst = worst.max((v.v(x) - rhs).abs());
        }
    }
    worst
}

/// Solve `q` over `RTMDP(E)` and return the Lemma-1 identity's max residual.
pub fn verify_lemma1(env: &FiniteMdp, policy: &TabularPolicy, discount: f64) -> Result<f64> {
    check_augmented(env, policy)?;
    let aug = rtmdp(env, &RtmdpConfig::default());
    let q = solve_q(&aug, &policy.over_augmented_states(), discount)?;
    Ok(lemma1_residual(env, policy, &q))
}

/// Solve `v` over `RTMDP(E)` and return the Lemma-2 identity's max residual.
pub fn verify_lemma2(env: &FiniteMdp, policy: &TabularPolicy, discount: f64) -> Result<f64> {
    check_augmented(env, policy)?;
    let aug = rtmdp(env, &RtmdpConfig::default());
    let v = solve_v(&aug, &policy.over_augmented_states(), discount)?;
    Ok(lemma2_residual(env, policy, &v))
}

/// One stored transition `(s, a, r, s')` of a finite MDP, plus the action
/// the behaviour policy happened to emit alongside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteTransition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub emitted: usize,
}

fn check_transition(env: &FiniteMdp, record: &FiniteTransition) -> Result<()> {
    if record.state >= env.n_states()
        || record.next_state >= env.n_states()
        || record.action >= env.n_actions()
        || record.emitted >= env.n_actions()
    {
        return Err(Error::InvalidRecord(format!(
            "index out of range in {record:?}"
        )));
    }
    if env.p(record.next_state, record.state, record.action) <= 0.0 {
        return Err(Error::InvalidRecord(format!(
            "s'={} has zero probability from (s={}, a={})",
            record.next_state, record.state, record.action
        )));
    }
    if (record.reward - env.r(record.state, record.action)).abs() > 1e-12 {
        return Err(Error::InvalidRecord(format!(
            "reward {} differs from r(s, a) = {}",
            record.reward,
            env.r(record.state, record.action)
        )));
    }
    Ok(())
}

/// Off-policy state-value target from a stored transition: the stored `s'`
/// is replayed, the emitted action is re-simulated from `π̃(·|s,a)`:
/// `r + γ E_{ã~π̃(·|s,a)}[ṽ((s',ã)) − α log π̃(ã|s,a)]`.
///
/// `value` is indexed by `s * |A| + a`.
pub fn partial_simulation_target(
    env: &FiniteMdp,
    value: &[f64],
    record: &FiniteTransition,
    policy: &TabularPolicy,
    discount: f64,
    temperature: f64,
) -> Result<f64> {
    check_augmented(env, policy)?;
    check_transition(env, record)?;
    let na = env.n_actions();
    let pi = policy.row_at(record.state, record.action);
    let expectation: f64 = pi
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(e, &w)| w * (value[record.next_state * na + e] - temperature * libm::log(w)))
        .sum();
    Ok(record.reward + discount * expectation)
}

/// Single-sample version of [`partial_simulation_target`].
pub fn partial_simulation_sample<R: Rng + ?Sized>(
    env: &FiniteMdp,
    value: &[f64],
    record: &FiniteTransition,
    policy: &TabularPolicy,
    discount: f64,
    temperature: f64,
    rng: &mut R,
) -> Result<f64> {
    check_augmented(env, policy)?;
    check_transition(env, record)?;
    let na = env.n_actions();
    let pi = policy.row_at(record.state, record.action);
    let e = categorical(pi, rng);
    Ok(record.reward
        + discount * (value[record.next_state * na + e] - temperature * libm::log(pi[e])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{random_augmented_policy, random_finite_mdp, random_policy};
    use crate::rng::seeded;

    fn single() -> FiniteMdp {
        FiniteMdp::new(1, 1, vec![1.0], vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn geometric_series() {
        let pi = TabularPolicy::uniform(Conditioning::State, 1, 1);
        let q = solve_q(&single(), &pi, 0.99).unwrap();
        assert!((q.q(0, 0) - 100.0).abs() <= 1e-9);
        let v = solve_v(&single(), &pi, 0.99).unwrap();
        assert!((v.v(0) - 100.0).abs() <= 1e-9);
    }

    #[test]
    fn zero_discount_is_reward() {
        let env = random_finite_mdp(0, 3, 2, (-1.0, 1.0));
        let pi = random_policy(1, 3, 2);
        let q = solve_q(&env, &pi, 0.0).unwrap();
        assert_eq!(q.values, env.rewards());
        let v = solve_v(&env, &pi, 0.0).unwrap();
        for s in 0..3 {
            let expected: f64 = (0..2).map(|a| pi.row(s)[a] * env.r(s, a)).sum();
            assert!((v.v(s) - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn rejects_bad_discount_and_signature() {
        let env = random_finite_mdp(0, 2, 2, (-1.0, 1.0));
        let pi = random_policy(1, 2, 2);
        assert_eq!(solve_q(&env, &pi, 1.0), Err(Error::InvalidDiscount(1.0)));
        let aug = random_augmented_policy(1, 2, 2);
        assert!(matches!(
            solve_v(&env, &aug, 0.5),
            Err(Error::SignatureMismatch { .. })
        ));
        assert!(matches!(
            verify_lemma1(&env, &pi, 0.5),
            Err(Error::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn linear_solve_matches_value_iteration() {
        let env = random_finite_mdp(1, 4, 3, (-1.0, 1.0));
        let pi = random_policy(2, 4, 3);
        let q = solve_q(&env, &pi, 0.99).unwrap();
        let mut iterate = vec![0.0; 12];
        for _ in 0..10_000 {
            iterate = bellman_q(&env, &pi, 0.99, &iterate);
        }
        for (a, b) in q.values.iter().zip(&iterate) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn state_values_average_action_values() {
        for seed in 0..5 {
            let env = random_finite_mdp(seed, 4, 3, (-1.0, 1.0));
            let pi = random_policy(seed + 50, 4, 3);
            let q = solve_q(&env, &pi, 0.95).unwrap();
            let v = solve_v(&env, &pi, 0.95).unwrap();
            for s in 0..4 {
                let avg: f64 = (0..3).map(|a| pi.row(s)[a] * q.q(s, a)).sum();
                assert!((v.v(s) - avg).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn bellman_operator_contracts() {
        let env = random_finite_mdp(3, 3, 2, (-1.0, 1.0));
        let pi = random_policy(4, 3, 2);
        let gamma = 0.9;
        let q = solve_q(&env, &pi, gamma).unwrap().values;
        let mut rng = seeded(5);
        for _ in 0..20 {
            let perturbed: Vec<f64> = q.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
            let before = q
                .iter()
                .zip(&perturbed)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let image = bellman_q(&env, &pi, gamma, &perturbed);
            let after = q
                .iter()
                .zip(&image)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(after <= gamma * before + 1e-12);
        }
    }

    #[test]
    fn lemmas_hold_on_random_instances() {
        for seed in 0..20 {
            let env = random_finite_mdp(seed, 3, 3, (-1.0, 1.0));
            let pi = random_augmented_policy(seed + 77, 3, 3);
            assert!(verify_lemma1(&env, &pi, 0.99).unwrap() <= 1e-10);
            assert!(verify_lemma2(&env, &pi, 0.99).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn lemmas_degenerate_cases() {
        let env = FiniteMdp::new(1, 2, vec![1.0], vec![1.0, 1.0], vec![0.25, -0.5]).unwrap();
        let pi = random_augmented_policy(3, 1, 2);
        assert!(verify_lemma1(&env, &pi, 0.9).unwrap() <= 1e-12);
        let env = random_finite_mdp(2, 3, 2, (-1.0, 1.0));
        let pi = random_augmented_policy(4, 3, 2);
        assert!(verify_lemma1(&env, &pi, 0.0).unwrap() <= 1e-15);
        assert!(verify_lemma2(&env, &pi, 0.0).unwrap() <= 1e-15);
    }

    #[test]
    fn deterministic_lemma2_telescopes() {
        // 0 -> 1 -> 0 deterministically; π̃ always emits action 1
        let env = FiniteMdp::new(
            2,
            2,
            vec![1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let pi = TabularPolicy::new(
            Conditioning::StateAction,
            2,
            2,
            vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
        )
        .unwrap();
        let gamma = 0.5;
        // from (0, 1): rewards r(0,1)=2, r(1,1)=4, r(0,1)=2, ... → (2 + 4γ)/(1 − γ²)
        let aug = rtmdp(&env, &RtmdpConfig::default());
        let v = solve_v(&aug, &pi.over_augmented_states(), gamma).unwrap();
        let expected = (2.0 + 4.0 * gamma) / (1.0 - gamma * gamma);
        assert!((v.v(1) - expected).abs() <= 1e-12);
        assert!(lemma2_residual(&env, &pi, &v) <= 1e-12);
    }

    #[test]
    fn perturbed_value_has_residual() {
        let env = random_finite_mdp(6, 3, 2, (-1.0, 1.0));
        let pi = random_augmented_policy(7, 3, 2);
        let gamma = 0.9;
        let aug = rtmdp(&env, &RtmdpConfig::default());
        let mut v = solve_v(&aug, &pi.over_augmented_states(), gamma).unwrap();
        v.values[2] += 1e-3;
        assert!(lemma2_residual(&env, &pi, &v) >= (1.0 - gamma) * 1e-3);
    }

    #[test]
    fn state_blind_policy_value_equals_q() {
        // emitting from s or from s' only coincides when π ignores the state
        let env = random_finite_mdp(8, 3, 3, (-1.0, 1.0));
        let row = random_policy(9, 1, 3).row(0).to_vec();
        let pi = TabularPolicy::new(Conditioning::State, 3, 3, row.repeat(3)).unwrap();
        let q = solve_q(&env, &pi, 0.95).unwrap();
        let aug = rtmdp(&env, &RtmdpConfig::default());
        let v = solve_v(&aug, &pi.ignoring_action().over_augmented_states(), 0.95).unwrap();
        for (a, b) in q.values.iter().zip(&v.values) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn soft_values_reduce_to_hard_values() {
        let env = random_finite_mdp(10, 3, 2, (-1.0, 1.0));
        let pi = random_augmented_policy(11, 3, 2);
        let aug = rtmdp(&env, &RtmdpConfig::default());
        let hard = solve_v(&aug, &pi.over_augmented_states(), 0.9).unwrap();
        let soft = solve_soft_v_rtmdp(&env, &pi, 0.9, 0.0).unwrap();
        for (a, b) in hard.values.iter().zip(&soft.values) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    fn some_record(env: &FiniteMdp, emitted: usize) -> FiniteTransition {
        let (s, a) = (1, 0);
        let next = env
            .transition_row(s, a)
            .iter()
            .position(|&p| p > 0.0)
            .unwrap();
        FiniteTransition {
            state: s,
            action: a,
            reward: env.r(s, a),
            next_state: next,
            emitted,
        }
    }

    #[test]
    fn partial_simulation_deterministic_policy() {
        let env = random_finite_mdp(12, 3, 2, (-1.0, 1.0));
        let pi = TabularPolicy::new(Conditioning::StateAction, 3, 2, [0.0, 1.0].repeat(6)).unwrap();
        let value: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let rec = some_record(&env, 0);
        let target = partial_simulation_target(&env, &value, &rec, &pi, 0.9, 0.0).unwrap();
        assert_eq!(target, rec.reward + 0.9 * value[rec.next_state * 2 + 1]);
    }

    #[test]
    fn partial_simulation_ignores_stored_emitted_action() {
        let env = random_finite_mdp(13, 3, 3, (-1.0, 1.0));
        let pi = random_augmented_policy(14, 3, 3);
        let value: Vec<f64> = (0..9).map(|i| libm::sin(i as f64)).collect();
        let targets: Vec<f64> = (0..3)
            .map(|e| {
                partial_simulation_target(&env, &value, &some_record(&env, e), &pi, 0.9, 0.3)
                    .unwrap()
            })
            .collect();
        assert!(targets.iter().all(|t| t.to_bits() == targets[0].to_bits()));
    }

    #[test]
    fn partial_simulation_sampled_mean_converges() {
        let env = random_finite_mdp(15, 3, 3, (-1.0, 1.0));
        let pi = random_augmented_policy(16, 3, 3);
        let value: Vec<f64> = (0..9).map(|i| libm::cos(i as f64)).collect();
        let rec = some_record(&env, 2);
        let exact = partial_simulation_target(&env, &value, &rec, &pi, 0.9, 0.2).unwrap();
        let mut rng = seeded(17);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                partial_simulation_sample(&env, &value, &rec, &pi, 0.9, 0.2, &mut rng).unwrap()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - exact).abs() <= 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn partial_simulation_rejects_impossible_records() {
        let env = FiniteMdp::new(
            2,
            1,
            vec![1.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        let pi = TabularPolicy::uniform(Conditioning::StateAction, 2, 1);
        let bad_next = FiniteTransition {
            state: 0,
            action: 0,
            reward: 1.0,
            next_state: 0,
            emitted: 0,
        };
        assert!(matches!(
            partial_simulation_target(&env, &[0.0, 0.0], &bad_next, &pi, 0.9, 0.0),
            Err(Error::InvalidRecord(_))
        ));
        let bad_reward = FiniteTransition {
            next_state: 1,
            reward: 5.0,
            ..bad_next
        };
        assert!(matches!(
            partial_simulation_target(&env, &[0.0, 0.0], &bad_reward, &pi, 0.9, 0.0),
            Err(Error::InvalidRecord(_))
        ));
    }
}
