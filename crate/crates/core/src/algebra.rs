//! n-step kernels and values, sub-MRPs, reductions, and containment.
//!
//! "For almost all z" is read as "for every state with positive reachable
//! mass": a reduction only has to agree on states the process can visit
//! from its initial distribution.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::augment::TurnState;
use crate::mdp::{mrp_equal, Mrp};
use crate::{Error, Result};

/// Default tolerance for fiber agreement in [`reduce_mrp`].
pub const FIBER_TOL: f64 = 1e-10;

/// A total map from the states of one MRP onto `0..n_targets`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTransformation {
    map: Vec<usize>,
    n_targets: usize,
}

impl StateTransformation {
    /// Every target must have a non-empty preimage.
    pub fn new(map: Vec<usize>, n_targets: usize) -> Result<Self> {
        let mut hit = vec![false; n_targets];
        for &t in &map {
            if t >= n_targets {
                return Err(Error::IncomparableStates(format!(
                    "image {t} outside 0..{n_targets}"
                )));
            }
            hit[t] = true;
        }
        if let Some(t) = hit.iter().position(|h| !h) {
            return Err(Error::IncomparableStates(format!(
                "target {t} has an empty preimage"
            )));
        }
        Ok(Self { map, n_targets })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
            n_targets: n,
        }
    }

    /// `f(s, b, a) = s` on the states of `RTMRP(TBMDP(E), ·)`.
    pub fn drop_turn_and_action(n_states: usize, n_actions: usize) -> Self {
        let map = (0..2 * n_states * n_actions)
            .map(|z| TurnState::from_index(z, n_actions).state)
            .collect();
        Self {
            map,
            n_targets: n_states,
        }
    }

    pub fn n_sources(&self) -> usize {
        self.map.len()
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn apply(&self, z: usize) -> usize {
        self.map[z]
    }

    pub fn fiber(&self, target: usize) -> impl Iterator<Item = usize> + '_ {
        self.map
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t == target)
            .map(|(z, _)| z)
    }
}

/// `κⁿ`, row-major with rows indexed by the starting state. `κ¹ = κ`.
pub fn n_step_kernel(m: &Mrp, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::ZeroSteps);
    }
    let size = m.n_states();
    let mut power = m.kernel().to_vec();
    for _ in 1..n {
        // κᵏ(s''|s) = Σ_s' κ(s''|s') κᵏ⁻¹(s'|s)
        let mut next = vec![0.0; size * size];
        for s in 0..size {
            let out = &mut next[s * size..(s + 1) * size];
            for (mid, &w) in power[s * size..(s + 1) * size].iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, &k) in out.iter_mut().zip(m.kernel_row(mid)) {
                    *o += w * k;
                }
            }
        }
        power = next;
    }
    Ok(power)
}

/// `vⁿ(s) = r̄(s) + Σ_s' κ(s'|s) vⁿ⁻¹(s')`, `v¹ = r̄`: expected reward summed over `n` steps.
pub fn n_step_value(m: &Mrp, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::ZeroSteps);
    }
    let mut value = m.reward().to_vec();
    for _ in 1..n {
        value = (0..m.n_states())
            .map(|s| {
                m.reward()[s]
                    + m.kernel_row(s)
                        .iter()
                        .zip(&value)
                        .map(|(k, v)| k * v)
                        .sum::<f64>()
            })
            .collect();
    }
    Ok(value)
}

/// Sub-MRP with interval `n`: kernel `κⁿ`, state reward `vⁿ`.
pub fn sub_mrp(m: &Mrp, n: usize) -> Result<Mrp> {
    Mrp::new(
        m.initial().to_vec(),
        n_step_kernel(m, n)?,
        n_step_value(m, n)?,
    )
}

/// Collapse the states of `m` along `f`.
///
/// Kernel rows and rewards are taken from reachable fiber members after
/// checking that they agree within `tol`. A fiber without reachable members
/// falls back to all of its members.
pub fn reduce_mrp(m: &Mrp, f: &StateTransformation, tol: f64) -> Result<Mrp> {
    if f.n_sources() != m.n_states() {
        return Err(Error::IncomparableStates(format!(
            "transformation covers {} states, MRP has {}",
            f.n_sources(),
            m.n_states()
        )));
    }
    let nt = f.n_targets();
    let reachable = m.reachable();
    let mut initial = vec![0.0; nt];
    for (z, &p) in m.initial().iter().enumerate() {
        initial[f.apply(z)] += p;
    }
    let pushed_row = |z: usize| {
        let mut row = vec![0.0; nt];
        for (next, &p) in m.kernel_row(z).iter().enumerate() {
            row[f.apply(next)] += p;
        }
        row
    };
    let mut kernel = Vec::with_capacity(nt * nt);
    let mut reward = Vec::with_capacity(nt);
    for target in 0..nt {
        let mut members: Vec<usize> = f.fiber(target).filter(|&z| reachable[z]).collect();
        if members.is_empty() {
            members = f.fiber(target).collect();
        }
        let first = members[0];
        let row = pushed_row(first);
        let r = m.reward()[first];
        for &z in &members[1..] {
            if let Some(detail) =
                fiber_disagreement(first, z, &row, &pushed_row(z), r, m.reward()[z], tol)
            {
                return Err(Error::FiberDisagreement { target, detail });
            }
        }
        kernel.extend(row);
        reward.push(r);
    }
    Mrp::new(initial, kernel, reward)
}

fn fiber_disagreement(
    z1: usize,
    z2: usize,
    row1: &[f64],
    row2: &[f64],
    r1: f64,
    r2: f64,
    tol: f64,
) -> Option<String> {
    let apart = |a: f64, b: f64| (a - b).is_nan() || (a - b).abs() > tol;
    if apart(r1, r2) {
        return Some(format!("states {z1} and {z2} have rewards {r1} and {r2}"));
    }
    row1.iter()
        .zip(row2)
        .enumerate()
        .find(|(_, (a, b))| apart(**a, **b))
        .map(|(t, (a, b))| {
            format!("states {z1} and {z2} move to target {t} with probabilities {a} and {b}")
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub contained: bool,
    /// Largest entrywise discrepancy against `Ω` (infinite when the reduction was rejected).
    pub max_discrepancy: f64,
    pub diagnostic: Option<String>,
}

/// Does `Ψ` contain `Ω`, i.e. is `Ω` the reduction along `f` of the
/// interval-`n` sub-MRP of `Ψ` (within `tol`)?
pub fn contains(
    psi: &Mrp,
    omega: &Mrp,
    n: usize,
    f: &StateTransformation,
    tol: f64,
) -> Result<Containment> {
    let sub = sub_mrp(psi, n)?;
    let reduced = match reduce_mrp(&sub, f, tol.max(FIBER_TOL)) {
        Ok(reduced) => reduced,
        Err(e @ Error::FiberDisagreement { .. }) => {
            return Ok(Containment {
                contained: false,
                max_discrepancy: f64::INFINITY,
                diagnostic: Some(format!("{e}")),
            })
        }
        Err(e) => return Err(e),
    };
    let cmp = mrp_equal(omega, &reduced, tol, None)?;
    Ok(Containment {
        contained: cmp.equal,
        max_discrepancy: cmp.max_discrepancy,
        diagnostic: (!cmp.equal).then(|| {
            format!(
                "reduced sub-MRP differs from the target at {} by {:e}",
                cmp.worst.expect("a discrepancy was recorded"),
                cmp.max_discrepancy
            )
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{lift_to_turn_states, tbmdp};
    use crate::envs::{random_finite_mdp, random_policy};
    use crate::mdp::{compose_rtmrp, compose_tbmrp, enumerate_trajectory_distribution};
    use nalgebra::DMatrix;

    fn random_mrp(seed: u64, ns: usize) -> Mrp {
        compose_tbmrp(
            &random_finite_mdp(seed, ns, 2, (-1.0, 1.0)),
            &random_policy(seed + 1000, ns, 2),
        )
        .unwrap()
    }

    #[test]
    fn zero_steps_rejected() {
        let m = random_mrp(0, 3);
        assert_eq!(n_step_kernel(&m, 0), Err(Error::ZeroSteps));
        assert_eq!(n_step_value(&m, 0), Err(Error::ZeroSteps));
    }

    #[test]
    fn one_step_is_identity() {
        let m = random_mrp(1, 4);
        assert_eq!(n_step_kernel(&m, 1).unwrap(), m.kernel());
        assert_eq!(n_step_value(&m, 1).unwrap(), m.reward());
        assert_eq!(sub_mrp(&m, 1).unwrap(), m);
    }

    #[test]
    fn two_cycle_returns_home() {
        let m = Mrp::new(vec![1.0, 0.0], vec![0.0, 1.0, 1.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(n_step_kernel(&m, 2).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn cube_matches_matrix_power() {
        let m = random_mrp(2, 4);
        let k = DMatrix::from_row_slice(4, 4, m.kernel());
        let cube = &k * &k * &k;
        let ours = n_step_kernel(&m, 3).unwrap();
        for s in 0..4 {
            for t in 0..4 {
                assert!((ours[s * 4 + t] - cube[(s, t)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn absorbing_unit_reward() {
        let m = Mrp::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        assert_eq!(n_step_value(&m, 3).unwrap(), vec![3.0]);
    }

    #[test]
    fn n_step_value_matches_enumerated_returns() {
        let m = random_mrp(3, 4);
        let v4 = n_step_value(&m, 4).unwrap();
        for start in 0..4 {
            let mut initial = vec![0.0; 4];
            initial[start] = 1.0;
            let from_start = Mrp::new(initial, m.kernel().to_vec(), m.reward().to_vec()).unwrap();
            let d = enumerate_trajectory_distribution(&from_start, 3, 1_000_000).unwrap();
            let expected: f64 = d
                .trajectories
                .iter()
                .map(|t| t.probability * t.rewards.iter().sum::<f64>())
                .sum();
            assert!(
                (v4[start] - expected).abs() <= 1e-12,
                "{} vs {expected}",
                v4[start]
            );
        }
    }

    #[test]
    fn sub_mrp_two_step_reward() {
        let m = random_mrp(4, 3);
        let sub = sub_mrp(&m, 2).unwrap();
        for s in 0..3 {
            let expected = m.reward()[s]
                + m.kernel_row(s)
                    .iter()
                    .zip(m.reward())
                    .map(|(k, r)| k * r)
                    .sum::<f64>();
            assert!((sub.reward()[s] - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn values_commute_with_sub_sampling() {
        for seed in 0..5 {
            let m = random_mrp(10 + seed, 3);
            for n in 1..=4 {
                let direct = n_step_value(&m, n).unwrap();
                let via_sub = n_step_value(&sub_mrp(&m, n).unwrap(), 1).unwrap();
                assert_eq!(direct, via_sub);
            }
        }
    }

    #[test]
    fn identity_reduction_is_noop() {
        let m = random_mrp(5, 4);
        let reduced = reduce_mrp(&m, &StateTransformation::identity(4), FIBER_TOL).unwrap();
        assert_eq!(reduced, m);
        assert!(
            contains(&m, &m, 1, &StateTransformation::identity(4), 0.0)
                .unwrap()
                .contained
        );
    }

    #[test]
    fn collapsing_different_rewards_is_rejected() {
        let m = Mrp::new(vec![0.5, 0.5], vec![0.5, 0.5, 0.5, 0.5], vec![1.0, 2.0]).unwrap();
        let f = StateTransformation::new(vec![0, 0], 1).unwrap();
        assert!(matches!(
            reduce_mrp(&m, &f, FIBER_TOL),
            Err(Error::FiberDisagreement { target: 0, .. })
        ));
        let omega = Mrp::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let c = contains(&m, &omega, 1, &f, 1e-12).unwrap();
        assert!(!c.contained);
        assert!(c.diagnostic.unwrap().contains("rewards"));
    }

    #[test]
    fn unreachable_members_are_ignored() {
        // state 2 is never visited and disagrees with state 0
        let kernel = vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let m = Mrp::new(vec![1.0, 0.0, 0.0], kernel, vec![1.0, 0.0, 7.0]).unwrap();
        let f = StateTransformation::new(vec![0, 1, 0], 2).unwrap();
        let reduced = reduce_mrp(&m, &f, FIBER_TOL).unwrap();
        assert_eq!(reduced.reward(), &[1.0, 0.0]);
        assert_eq!(reduced.kernel(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn transformation_must_be_onto() {
        assert!(StateTransformation::new(vec![0, 0], 2).is_err());
        assert!(StateTransformation::new(vec![0, 3], 2).is_err());
    }

    fn theorem2_instance(seed: u64, ns: usize, na: usize) -> (Mrp, Mrp) {
        let env = random_finite_mdp(seed, ns, na, (-1.0, 1.0));
        let pi = random_policy(seed + 500, ns, na);
        let psi = compose_rtmrp(&tbmdp(&env), &lift_to_turn_states(&pi), 0).unwrap();
        (psi, compose_tbmrp(&env, &pi).unwrap())
    }

    #[test]
    fn theorem2_half_step_kernel() {
        // κ² from (s, 0, a) = Σ_a' π(a'|s) p(s'|s,a') π(a''|s) onto (s', 0, a'')
        let (ns, na) = (3, 2);
        let env = random_finite_mdp(21, ns, na, (-1.0, 1.0));
        let pi = random_policy(22, ns, na);
        let psi = compose_rtmrp(&tbmdp(&env), &lift_to_turn_states(&pi), 0).unwrap();
        let sub = sub_mrp(&psi, 2).unwrap();
        for s in 0..ns {
            for a in 0..na {
                let z = TurnState {
                    state: s,
                    turn: false,
                    action: a,
                }
                .index(na);
                for s2 in 0..ns {
                    for a2 in 0..na {
                        let next = TurnState {
                            state: s2,
                            turn: false,
                            action: a2,
                        }
                        .index(na);
                        let expected: f64 = (0..na)
                            .map(|a1| pi.row(s)[a1] * env.p(s2, s, a1))
                            .sum::<f64>()
                            * pi.row(s)[a2];
                        assert!((sub.kernel_row(z)[next] - expected).abs() <= 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn theorem2_reduction_recovers_turn_based_mrp() {
        for seed in 0..5 {
            let (psi, omega) = theorem2_instance(seed, 3, 2);
            let f = StateTransformation::drop_turn_and_action(3, 2);
            let reduced = reduce_mrp(&sub_mrp(&psi, 2).unwrap(), &f, FIBER_TOL).unwrap();
            assert!(mrp_equal(&omega, &reduced, 1e-12, None).unwrap().equal);
            assert!(contains(&psi, &omega, 2, &f, 1e-12).unwrap().contained);
        }
    }

    #[test]
    fn perturbed_reward_breaks_containment() {
        let (psi, omega) = theorem2_instance(9, 3, 3);
        let mut reward = omega.reward().to_vec();
        reward[1] += 1e-6;
        let perturbed =
            Mrp::new(omega.initial().to_vec(), omega.kernel().to_vec(), reward).unwrap();
        let f = StateTransformation::drop_turn_and_action(3, 3);
        let c = contains(&psi, &perturbed, 2, &f, 1e-12).unwrap();
        assert!(!c.contained);
        assert!(c.diagnostic.unwrap().contains("reward[1]"));
    }
}
