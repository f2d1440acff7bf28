//! Real-time (RTMDP) and turn-based (TBMDP) environment augmentations.
//!
//! `rtmdp` makes the action a part of the state: the action emitted at
//! step `t` is stored in the next state and only drives the underlying
//! dynamics from step `t + 1` on. `tbmdp` goes the other way and embeds a
//! turn-based problem into real-time interaction with a turn bit.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{Conditioning, FiniteMdp, Simulator, Step, TabularPolicy};

/// The state `x̃ = (s, a)` of a real-time MDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AugmentedState<S = usize, A = usize> {
    pub state: S,
    /// Action applied to the underlying environment during this step.
    pub action: A,
}

impl AugmentedState {
    pub fn index(self, n_actions: usize) -> usize {
        self.state * n_actions + self.action
    }

    pub fn from_index(index: usize, n_actions: usize) -> Self {
        Self {
            state: index / n_actions,
            action: index % n_actions,
        }
    }
}

/// Fixed initial action `c` of a real-time MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct RtmdpConfig<A = usize> {
    pub initial_action: A,
}

impl Default for RtmdpConfig<usize> {
    fn default() -> Self {
        Self { initial_action: 0 }
    }
}

impl RtmdpConfig<Vec<f64>> {
    /// The zero action of a `dims`-dimensional box.
    pub fn zeros(dims: usize) -> Self {
        Self {
            initial_action: vec![0.0; dims],
        }
    }
}

/// `RTMDP(E)`: states `S × A` (index `s * |A| + a`), initial distribution
/// `μ(s) δ(a − c)`, transition `p(s'|s,a) δ(a' − ã)`, reward `r(s, a)`
/// independent of the emitted action `ã`.
pub fn rtmdp(env: &FiniteMdp, cfg: &RtmdpConfig) -> FiniteMdp {
    let (ns, na) = (env.n_states(), env.n_actions());
    assert!(
        cfg.initial_action < na,
        "initial action outside the action space"
    );
    let nx = ns * na;
    let mut initial = vec![0.0; nx];
    for (s, &mu) in env.initial().iter().enumerate() {
        initial[s * na + cfg.initial_action] = mu;
    }
    let mut transition = vec![0.0; nx * na * nx];
    let mut reward = vec![0.0; nx * na];
    for s in 0..ns {
        for a in 0..na {
            let x = s * na + a;
            for emitted in 0..na {
                reward[x * na + emitted] = env.r(s, a);
                let row = &mut transition[(x * na + emitted) * nx..(x * na + emitted + 1) * nx];
                for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                    row[next * na + emitted] = p;
                }
            }
        }
    }
    FiniteMdp::new(nx, na, initial, transition, reward).expect("RTMDP of a valid MDP is valid")
}

/// State `(s, b, a)` of `RTMRP(TBMDP(E), π̃)`: underlying state, turn bit,
/// and the action most recently emitted by the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TurnState {
    pub state: usize,
    /// `false` (b = 0): environment frozen, agent's turn. `true` (b = 1): environment advances.
    pub turn: bool,
    pub action: usize,
}

impl TurnState {
    /// Index inside `RTMRP(TBMDP(E), ·)`, i.e. `(s * 2 + b) * |A| + a`.
    pub fn index(self, n_actions: usize) -> usize {
        (self.state * 2 + self.turn as usize) * n_actions + self.action
    }

    pub fn from_index(index: usize, n_actions: usize) -> Self {
        let z = index / n_actions;
        Self {
            state: z / 2,
            turn: z % 2 == 1,
            action: index % n_actions,
        }
    }
}

/// `TBMDP(E)` over `S × {0, 1}` (index `s * 2 + b`): at `b = 0` the state
/// is frozen and `b` flips to 1; at `b = 1` the state advances with
/// `p(·|s,a)` and `b` flips back. Reward `r(s, a) · b`.
pub fn tbmdp(env: &FiniteMdp) -> FiniteMdp {
    let (ns, na) = (env.n_states(), env.n_actions());
    let nz = 2 * ns;
    let mut initial = vec![0.0; nz];
    for (s, &mu) in env.initial().iter().enumerate() {
        initial[2 * s] = mu;
    }
    let mut transition = vec![0.0; nz * na * nz];
    let mut reward = vec![0.0; nz * na];
    for s in 0..ns {
        for a in 0..na {
            let frozen = 2 * s;
            transition[(frozen * na + a) * nz + 2 * s + 1] = 1.0;
            let moving = 2 * s + 1;
            let row = &mut transition[(moving * na + a) * nz..(moving * na + a + 1) * nz];
            for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                row[2 * next] = p;
            }
            reward[moving * na + a] = env.r(s, a);
        }
    }
    FiniteMdp::new(nz, na, initial, transition, reward).expect("TBMDP of a valid MDP is valid")
}

/// Augmented policy over `TBMDP(E)` that follows the plain policy `π`:
/// `π̃(ã | (s, b), a) = π(ã | s)`.
pub fn lift_to_turn_states(pi: &TabularPolicy) -> TabularPolicy {
    let na = pi.n_actions();
    let mut table = Vec::new();
    for s in 0..pi.n_states() {
        for _b in 0..2 {
            for _a in 0..na {
                table.extend_from_slice(pi.row(s));
            }
        }
    }
    TabularPolicy::new(Conditioning::StateAction, 2 * pi.n_states(), na, table)
        .expect("lifted policy is valid")
}

/// Real-time wrapper around a simulator.
///
/// Observations are `[s, a]` where `a` is the action currently applied to
/// the wrapped simulator. Each `step(ã)` advances the simulator with the
/// stored `a`, returns `r(s, a)`, and stores `ã` for the next step.
#[derive(Debug, Clone)]
pub struct RealTime<E> {
    inner: E,
    initial_action: Vec<f64>,
    action: Vec<f64>,
    state: Vec<f64>,
}

impl<E: Simulator> RealTime<E> {
    pub fn new(inner: E, cfg: RtmdpConfig<Vec<f64>>) -> Self {
        assert_eq!(
            cfg.initial_action.len(),
            inner.action_dim(),
            "initial action dimension"
        );
        Self {
            action: cfg.initial_action.clone(),
            initial_action: cfg.initial_action,
            state: Vec::new(),
            inner,
        }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut E {
        &mut self.inner
    }

    pub fn augmented_state(&self) -> AugmentedState<&[f64], &[f64]> {
        AugmentedState {
            state: &self.state,
            action: &self.action,
        }
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = self.state.clone();
        obs.extend_from_slice(&self.action);
        obs
    }
}

impl<E: Simulator> Simulator for RealTime<E> {
    fn observation_dim(&self) -> usize {
        self.inner.observation_dim() + self.inner.action_dim()
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = self.inner.reset();
        self.action.clone_from(&self.initial_action);
        self.observation()
    }

    fn step(&mut self, emitted: &[f64]) -> Step {
        assert_eq!(emitted.len(), self.action.len(), "action dimension");
        let step = self.inner.step(&self.action);
        self.state = step.observation;
        self.action.copy_from_slice(emitted);
        Step {
            observation: self.observation(),
            reward: step.reward,
            terminal: step.terminal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{
        random_augmented_policy, random_finite_mdp, random_policy, PointMassConfig, PointMassEnv,
    };
    use crate::mdp::{compose_rtmrp, compose_tbmrp, mrp_equal, sample_trajectory};
    use crate::rng::seeded;

    #[test]
    fn rtmdp_state_space_is_product() {
        let env = random_finite_mdp(0, 3, 2, (-1.0, 1.0));
        let aug = rtmdp(&env, &RtmdpConfig::default());
        assert_eq!(aug.n_states(), 6);
        assert_eq!(aug.n_actions(), 2);
    }

    #[test]
    fn rtmdp_passes_emitted_action_through() {
        let env = random_finite_mdp(1, 3, 3, (-1.0, 1.0));
        let aug = rtmdp(&env, &RtmdpConfig { initial_action: 2 });
        for x in 0..aug.n_states() {
            for emitted in 0..3 {
                let mass: f64 = aug
                    .transition_row(x, emitted)
                    .iter()
                    .enumerate()
                    .filter(|(next, _)| AugmentedState::from_index(*next, 3).action == emitted)
                    .map(|(_, p)| p)
                    .sum();
                assert!((mass - 1.0).abs() <= 1e-12);
                assert_eq!(aug.r(x, emitted), aug.r(x, 0));
            }
        }
        for (x, &p) in aug.initial().iter().enumerate() {
            if AugmentedState::from_index(x, 3).action != 2 {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn rtmdp_is_pure() {
        let env = random_finite_mdp(2, 2, 3, (-1.0, 1.0));
        let pi = random_augmented_policy(3, 2, 3).over_augmented_states();
        let a = compose_tbmrp(&rtmdp(&env, &RtmdpConfig::default()), &pi).unwrap();
        let b = compose_tbmrp(&rtmdp(&env, &RtmdpConfig::default()), &pi).unwrap();
        assert!(mrp_equal(&a, &b, 0.0, None).unwrap().equal);
    }

    #[test]
    fn rtmrp_matches_turn_based_rtmdp() {
        for seed in 0..5 {
            let env = random_finite_mdp(seed, 3, 2, (-1.0, 1.0));
            let pi = random_augmented_policy(100 + seed, 3, 2);
            let real_time = compose_rtmrp(&env, &pi, 0).unwrap();
            let turn_based = compose_tbmrp(
                &rtmdp(&env, &RtmdpConfig::default()),
                &pi.over_augmented_states(),
            )
            .unwrap();
            let cmp = mrp_equal(&real_time, &turn_based, 1e-12, None).unwrap();
            assert!(cmp.equal, "seed {seed}: {cmp:?}");
        }
    }

    #[test]
    fn tbmdp_alternates_and_freezes() {
        let env = random_finite_mdp(4, 3, 2, (0.5, 1.5));
        let tb = tbmdp(&env);
        let pi = random_policy(5, 3, 2);
        let m = compose_rtmrp(&tb, &lift_to_turn_states(&pi), 0).unwrap();
        let mut rng = seeded(6);
        for _ in 0..50 {
            let path = sample_trajectory(&m, 12, &mut rng);
            for (t, w) in path.windows(2).enumerate() {
                let now = TurnState::from_index(w[0].0, 2);
                let next = TurnState::from_index(w[1].0, 2);
                assert_eq!(now.turn, t % 2 == 1);
                assert_ne!(now.turn, next.turn);
                if !now.turn {
                    assert_eq!(now.state, next.state);
                    assert_eq!(w[0].1, 0.0);
                }
            }
        }
    }

    #[test]
    fn tbmdp_reward_is_zero_on_agent_turn() {
        let env = random_finite_mdp(7, 2, 2, (1.0, 2.0));
        let tb = tbmdp(&env);
        for s in 0..2 {
            for a in 0..2 {
                assert_eq!(tb.r(2 * s, a), 0.0);
                assert_eq!(tb.r(2 * s + 1, a), env.r(s, a));
            }
        }
    }

    fn quiet_point_mass() -> PointMassEnv {
        PointMassEnv::new(
            PointMassConfig {
                noise_std: 0.0,
                ..PointMassConfig::default()
            },
            seeded(0),
        )
    }

    #[test]
    fn new_action_takes_effect_next_step() {
        let mut rt = RealTime::new(quiet_point_mass(), RtmdpConfig::zeros(2));
        rt.reset();
        rt.inner_mut().set_state(&[0.0, 0.0], &[0.0, 0.0]);
        let step = rt.step(&[1.0, 1.0]);
        // the stored action was zero, so the mass has not moved
        assert_eq!(&step.observation[..4], &[0.0; 4]);
        assert_eq!(&step.observation[4..], &[1.0, 1.0]);
        let step = rt.step(&[0.0, 0.0]);
        assert!(step.observation[2] > 0.0);
    }

    #[test]
    fn underlying_dynamics_see_delayed_actions() {
        let actions = [[0.5, -0.5], [-1.0, 0.25], [0.75, 0.0]];
        let mut rt = RealTime::new(quiet_point_mass(), RtmdpConfig::zeros(2));
        rt.reset();
        let start = rt.inner().position().to_vec();
        let mut plain = quiet_point_mass();
        plain.set_state(&start, &[0.0, 0.0]);
        rt.inner_mut().set_state(&start, &[0.0, 0.0]);
        let mut applied = vec![[0.0, 0.0]];
        applied.extend_from_slice(&actions[..2]);
        for (emitted, expected) in actions.iter().zip(&applied) {
            rt.step(emitted);
            plain.step(expected);
            assert_eq!(rt.inner().position(), plain.position());
            assert_eq!(rt.inner().velocity(), plain.velocity());
        }
    }

    #[test]
    fn reward_and_next_state_ignore_emitted_action() {
        let mut rt = RealTime::new(
            PointMassEnv::new(PointMassConfig::default(), seeded(3)),
            RtmdpConfig::zeros(2),
        );
        rt.reset();
        for t in 0..20 {
            let x = [(0.1 * t as f64) % 1.0, -0.3];
            let mut other = rt.clone();
            let sa = rt.step(&x);
            let sb = other.step(&[-x[0], 0.9]);
            assert_eq!(sa.reward.to_bits(), sb.reward.to_bits());
            assert_eq!(&sa.observation[..4], &sb.observation[..4]);
        }
    }
}
