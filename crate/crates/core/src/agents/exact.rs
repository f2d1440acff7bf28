//! Exact finite-space versions of the actor-critic objectives, used to
//! check the learning rules against closed-form quantities.
//!
//! Augmented states `x = (s, a)` are indexed `s * |A| + a`; a tabular
//! softmax policy over them is a `|S||A| × |A|` logit matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{FiniteMdp, TabularPolicy};
use crate::nn::{Matrix, Tape, Var};

/// `q((s,a), ã) = r(s,a) + γ Σ_{s'} p(s'|s,a) v((s', ã))`, indexed
/// `(s * |A| + a) * |A| + ã`.
pub fn q_from_v(env: &FiniteMdp, v: &[f64], gamma: f64) -> Vec<f64> {
    let (ns, na) = (env.n_states(), env.n_actions());
    assert_eq!(v.len(), ns * na, "value table size");
    let mut q = vec![0.0; ns * na * na];
    for s in 0..ns {
        for a in 0..na {
            let x = s * na + a;
            for e in 0..na {
                let future: f64 = env
                    .transition_row(s, a)
                    .iter()
                    .enumerate()
                    .map(|(s2, p)| p * v[s2 * na + e])
                    .sum();
                q[x * na + e] = env.r(s, a) + gamma * future;
            }
        }
    }
    q
}

fn broadcast_rows(rows: usize, cols: usize, per_row: impl Fn(usize) -> f64) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|i| per_row(i / cols)).collect(),
    )
}

/// `Σ_x d(x) Σ_ã π(ã|x) [α log π(ã|x) − q(x, ã)]` with `π = softmax(logits)`.
pub fn sac_policy_loss(
    tape: &mut Tape,
    logits: Var,
    weights: &[f64],
    q: &[f64],
    alpha: f64,
) -> Var {
    let (nx, na) = (tape.value(logits).rows, tape.value(logits).cols);
    let log_pi = tape.log_softmax(logits);
    let pi = tape.exp(log_pi);
    let q = tape.constant(Matrix::from_vec(nx, na, q.to_vec()));
    let d = tape.constant(broadcast_rows(nx, na, |x| weights[x]));
    let ent = tape.scale(log_pi, alpha);
    let inner = tape.sub(ent, q);
    let per = tape.mul(pi, inner);
    let weighted = tape.mul(per, d);
    tape.sum(weighted)
}

/// `Σ_x d(x) Σ_{s'} p(s'|x) Σ_ã π(ã|x) [α log π(ã|x) − γ v((s', ã))]`,
/// one term per next state as the replay-based estimator sees it.
pub fn rtac_policy_loss(
    tape: &mut Tape,
    logits: Var,
    env: &FiniteMdp,
    weights: &[f64],
    v: &[f64],
    alpha: f64,
    gamma: f64,
) -> Var {
    let (ns, na) = (env.n_states(), env.n_actions());
    let nx = ns * na;
    let log_pi = tape.log_softmax(logits);
    let pi = tape.exp(log_pi);
    let ent = tape.scale(log_pi, alpha);
    let mut total = None;
    for s2 in 0..ns {
        let bootstrap = Matrix::from_vec(
            nx,
            na,
            (0..nx * na).map(|i| gamma * v[s2 * na + i % na]).collect(),
        );
        let bootstrap = tape.constant(bootstrap);
        let w = tape.constant(broadcast_rows(nx, na, |x| {
            weights[x] * env.p(s2, x / na, x % na)
        }));
        let inner = tape.sub(ent, bootstrap);
        let per = tape.mul(pi, inner);
        let weighted = tape.mul(per, w);
        let term = tape.sum(weighted);
        total = Some(match total {
            Some(t) => tape.add(t, term),
            None => term,
        });
    }
    total.expect("at least one state")
}

/// `‖∇L_SAC − ∇L_RTAC‖ / ‖∇L_SAC‖` at `logits`, with `q` built from `v`.
pub fn policy_gradient_discrepancy(
    env: &FiniteMdp,
    weights: &[f64],
    v: &[f64],
    logits: &Matrix,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let n = logits.data.len();
    let q = q_from_v(env, v, gamma);
    let mut tape = Tape::new();
    let l = tape.parameter(logits.clone(), 0);
    let sac = sac_policy_loss(&mut tape, l, weights, &q, alpha);
    let g_sac = tape.gradient(sac, n).expect("finite exact loss");
    let mut tape = Tape::new();
    let l = tape.parameter(logits.clone(), 0);
    let rtac = rtac_policy_loss(&mut tape, l, env, weights, v, alpha, gamma);
    let g_rtac = tape.gradient(rtac, n).expect("finite exact loss");
    let diff: f64 = g_sac
        .iter()
        .zip(&g_rtac)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let norm: f64 = g_sac.iter().map(|a| a * a).sum();
    libm::sqrt(diff) / libm::sqrt(norm).max(f64::MIN_POSITIVE)
}

fn neg_entropy(row: &[f64]) -> f64 {
    row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * libm::log(p))
        .sum()
}

/// Value target of one stored transition `((s,a), r, s')` with the
/// expectation over `ã ~ π̃(·|s,a)` taken exactly.
pub fn rtac_target(
    v: &[f64],
    policy: &TabularPolicy,
    record: (usize, usize, f64, usize),
    alpha: f64,
    gamma: f64,
) -> f64 {
    let (s, a, r, s2) = record;
    let na = policy.n_actions();
    let pi = policy.row_at(s, a);
    let bootstrap: f64 = pi.iter().enumerate().map(|(e, p)| p * v[s2 * na + e]).sum();
    r + gamma * (bootstrap - alpha * neg_entropy(pi))
}

/// Action-value target of one stored transition `(s, a, r, s')` with the
/// expectation over `a' ~ π(·|s')` taken exactly.
pub fn sac_target(
    q: &[f64],
    policy: &TabularPolicy,
    record: (usize, usize, f64, usize),
    alpha: f64,
    gamma: f64,
) -> f64 {
    let (_, _, r, s2) = record;
    let na = policy.n_actions();
    let pi = policy.row(s2);
    let bootstrap: f64 = pi.iter().enumerate().map(|(e, p)| p * q[s2 * na + e]).sum();
    r + gamma * (bootstrap - alpha * neg_entropy(pi))
}

/// Full-batch regression of a value table onto a target, over a dataset in
/// which every transition `(s, a, s')` carries weight `p(s'|s,a)`. Repeats
/// until the largest change falls below `tol`.
pub fn fit_tabular(
    env: &FiniteMdp,
    mut table: Vec<f64>,
    tol: f64,
    target: impl Fn(&[f64], (usize, usize, f64, usize)) -> f64,
) -> Vec<f64> {
    let (ns, na) = (env.n_states(), env.n_actions());
    loop {
        let mut next = vec![0.0; ns * na];
        for s in 0..ns {
            for a in 0..na {
                next[s * na + a] = env
                    .transition_row(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(s2, &p)| p * target(&table, (s, a, env.r(s, a), s2)))
                    .sum();
            }
        }
        let change = next
            .iter()
            .zip(&table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        table = next;
        if change <= tol {
            return table;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{random_augmented_policy, random_finite_mdp, random_policy};
    use crate::suites::proposition_instance;
    use crate::values::{solve_soft_q, solve_soft_v_rtmdp};

    #[test]
    fn sac_and_rtac_policy_gradients_agree() {
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let (env, d, v, logits) = proposition_instance(seed);
            worst = worst.max(policy_gradient_discrepancy(
                &env, &d, &v, &logits, 0.2, 0.99,
            ));
        }
        assert!(worst <= 1e-6, "{worst}");
    }

    #[test]
    fn losses_differ_by_expected_reward_only() {
        let (env, d, v, logits) = proposition_instance(3);
        let na = env.n_actions();
        let q = q_from_v(&env, &v, 0.9);
        let mut tape = Tape::new();
        let l = tape.constant(logits);
        let sac = sac_policy_loss(&mut tape, l, &d, &q, 0.5);
        let rtac = rtac_policy_loss(&mut tape, l, &env, &d, &v, 0.5, 0.9);
        let reward: f64 = d
            .iter()
            .enumerate()
            .map(|(x, w)| w * env.r(x / na, x % na))
            .sum();
        assert!((tape.scalar(rtac) - tape.scalar(sac) - reward).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_gradient_is_value_gradient_only() {
        let (env, d, v, logits) = proposition_instance(4);
        let mut tape = Tape::new();
        let l = tape.parameter(logits.clone(), 0);
        let loss = rtac_policy_loss(&mut tape, l, &env, &d, &v, 0.0, 0.9);
        let g = tape.gradient(loss, logits.data.len()).unwrap();
        // with α = 0 the loss is −γ E[v(s', ã)]: shifting v by a constant
        // leaves the gradient unchanged
        let shifted: Vec<f64> = v.iter().map(|x| x + 3.0).collect();
        let mut tape = Tape::new();
        let l = tape.parameter(logits.clone(), 0);
        let loss = rtac_policy_loss(&mut tape, l, &env, &d, &shifted, 0.0, 0.9);
        let g2 = tape.gradient(loss, logits.data.len()).unwrap();
        for (a, b) in g.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_value_leaves_entropy_gradient() {
        let (env, d, _, logits) = proposition_instance(5);
        let nx = logits.rows;
        let grad = |v: &[f64], alpha: f64| {
            let mut tape = Tape::new();
            let l = tape.parameter(logits.clone(), 0);
            let loss = rtac_policy_loss(&mut tape, l, &env, &d, v, alpha, 0.9);
            tape.gradient(loss, logits.data.len()).unwrap()
        };
        let constant = grad(&vec![2.5; nx], 0.3);
        let zero = grad(&vec![0.0; nx], 0.3);
        for (a, b) in constant.iter().zip(&zero) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tabular_value_target_reaches_soft_fixed_point() {
        let env = random_finite_mdp(31, 3, 2, (-1.0, 1.0));
        let pi = random_augmented_policy(32, 3, 2);
        let (alpha, gamma) = (0.2, 0.9);
        let fitted = fit_tabular(&env, vec![0.0; 6], 1e-9, |v, rec| {
            rtac_target(v, &pi, rec, alpha, gamma)
        });
        let exact = solve_soft_v_rtmdp(&env, &pi, gamma, alpha).unwrap();
        for (a, b) in fitted.iter().zip(&exact.values) {
            assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn tabular_q_target_reaches_soft_fixed_point() {
        let env = random_finite_mdp(33, 3, 3, (-1.0, 1.0));
        let pi = random_policy(34, 3, 3);
        let (alpha, gamma) = (0.2, 0.9);
        let fitted = fit_tabular(&env, vec![0.0; 9], 1e-9, |q, rec| {
            sac_target(q, &pi, rec, alpha, gamma)
        });
        let exact = solve_soft_q(&env, &pi, gamma, alpha).unwrap();
        for (a, b) in fitted.iter().zip(&exact.values) {
            assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
        }
    }
}
