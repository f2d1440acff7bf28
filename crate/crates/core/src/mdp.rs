//! MDPs, policies, and the Markov reward processes they induce under
//! turn-based and real-time interaction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::rng::categorical;
use crate::{Error, Result};

/// Row-sum tolerance for transition tensors, kernels and initial distributions.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Row-sum tolerance for policy tables.
pub const POLICY_TOL: f64 = 1e-9;
/// Largest `|S|^(horizon+1)` that [`enumerate_trajectory_distribution`] accepts by default.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

fn check_distribution(row: &[f64], tol: f64) -> core::result::Result<(), alloc::string::String> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(format!("entry {p} is not a probability"));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(format!("row sums to {total}"));
    }
    Ok(())
}

/// A finite MDP `(S, A, μ, p, r)` with states and actions as indices.
///
/// `transition` is stored as `[(s * |A| + a) * |S| + s']`, `reward` as `[s * |A| + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    initial: Vec<f64>,
    transition: Vec<f64>,
    reward: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        initial: Vec<f64>,
        transition: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("empty state or action space".to_string()));
        }
        if initial.len() != n_states {
            return Err(Error::InvalidMdp(format!(
                "initial distribution has {} entries for {n_states} states",
                initial.len()
            )));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidMdp(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::InvalidMdp(format!(
                "reward table has {} entries, expected {}",
                reward.len(),
                n_states * n_actions
            )));
        }
        check_distribution(&initial, STOCHASTIC_TOL)
            .map_err(|e| Error::InvalidMdp(format!("initial distribution: {e}")))?;
        for (row, probs) in transition.chunks(n_states).enumerate() {
            check_distribution(probs, STOCHASTIC_TOL).map_err(|e| {
                Error::InvalidMdp(format!(
                    "p(.|s={}, a={}): {e}",
                    row / n_actions,
                    row % n_actions
                ))
            })?;
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!(
                "reward r(s={}, a={}) is not finite",
                i / n_actions,
                i % n_actions
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            initial,
            transition,
            reward,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// `p(· | s, a)`
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn p(&self, next: usize, s: usize, a: usize) -> f64 {
        self.transition_row(s, a)[next]
    }

    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }
}

/// What a policy conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// `π(a | s)`
    State,
    /// `π̃(ã | s, a)`
    StateAction,
}

impl fmt::Display for Conditioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conditioning::State => f.write_str("states"),
            Conditioning::StateAction => f.write_str("state-action pairs"),
        }
    }
}

/// Tabular stochastic policy. Rows are indexed by `s` (plain) or
/// `s * |A| + a` (augmented); each row is a distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    conditioning: Conditioning,
    n_states: usize,
    n_actions: usize,
    table: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(
        conditioning: Conditioning,
        n_states: usize,
        n_actions: usize,
        table: Vec<f64>,
    ) -> Result<Self> {
        let rows = match conditioning {
            Conditioning::State => n_states,
            Conditioning::StateAction => n_states * n_actions,
        };
        if n_actions == 0 || table.len() != rows * n_actions {
            return Err(Error::InvalidPolicy(format!(
                "table has {} entries, expected {} rows of {n_actions}",
                table.len(),
                rows
            )));
        }
        for (i, row) in table.chunks(n_actions).enumerate() {
            check_distribution(row, POLICY_TOL)
                .map_err(|e| Error::InvalidPolicy(format!("row {i}: {e}")))?;
        }
        Ok(Self {
            conditioning,
            n_states,
            n_actions,
            table,
        })
    }

    pub fn uniform(conditioning: Conditioning, n_states: usize, n_actions: usize) -> Self {
        let rows = match conditioning {
            Conditioning::State => n_states,
            Conditioning::StateAction => n_states * n_actions,
        };
        Self {
            conditioning,
            n_states,
            n_actions,
            table: vec![1.0 / n_actions as f64; rows * n_actions],
        }
    }

    /// Deterministic plain policy choosing `choice[s]` in state `s`.
    pub fn deterministic(n_actions: usize, choice: &[usize]) -> Result<Self> {
        let mut table = vec![0.0; choice.len() * n_actions];
        for (s, &a) in choice.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidPolicy(format!("action {a} out of range")));
            }
            table[s * n_actions + a] = 1.0;
        }
        Self::new(Conditioning::State, choice.len(), n_actions, table)
    }

    pub fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Distribution for a plain policy in state `s`.
    pub fn row(&self, s: usize) -> &[f64] {
        &self.table[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Distribution for an augmented policy at the pair `(s, a)`.
    pub fn row_at(&self, s: usize, a: usize) -> &[f64] {
        self.row(s * self.n_actions + a)
    }

    /// Reinterpret an augmented policy over `E` as a plain policy over the
    /// states of `RTMDP(E)`, whose state space is `S × A`.
    pub fn over_augmented_states(&self) -> Self {
        match self.conditioning {
            Conditioning::State => self.clone(),
            Conditioning::StateAction => Self {
                conditioning: Conditioning::State,
                n_states: self.n_states * self.n_actions,
                n_actions: self.n_actions,
                table: self.table.clone(),
            },
        }
    }

    /// Lift a plain policy to one that conditions on `(s, a)` but ignores `a`.
    pub fn ignoring_action(&self) -> Self {
        let mut table = Vec::with_capacity(self.table.len() * self.n_actions);
        for s in 0..self.n_states {
            for _ in 0..self.n_actions {
                table.extend_from_slice(self.row(s));
            }
        }
        Self {
            conditioning: Conditioning::StateAction,
            n_states: self.n_states,
            n_actions: self.n_actions,
            table,
        }
    }
}

/// Markov reward process `(S, μ, κ, r̄)` over `n_states` indexed states.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrp {
    n_states: usize,
    initial: Vec<f64>,
    kernel: Vec<f64>,
    reward: Vec<f64>,
}

impl Mrp {
    pub fn new(initial: Vec<f64>, kernel: Vec<f64>, reward: Vec<f64>) -> Result<Self> {
        let n = initial.len();
        if n == 0 || kernel.len() != n * n || reward.len() != n {
            return Err(Error::InvalidMrp(format!(
                "shape mismatch: {} initial, {} kernel, {} reward entries",
                n,
                kernel.len(),
                reward.len()
            )));
        }
        check_distribution(&initial, STOCHASTIC_TOL)
            .map_err(|e| Error::InvalidMrp(format!("initial distribution: {e}")))?;
        for (s, row) in kernel.chunks(n).enumerate() {
            check_distribution(row, STOCHASTIC_TOL)
                .map_err(|e| Error::InvalidMrp(format!("kernel row {s}: {e}")))?;
        }
        if let Some(s) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidMrp(format!(
                "reward of state {s} is not finite"
            )));
        }
        Ok(Self {
            n_states: n,
            initial,
            kernel,
            reward,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    /// `κ(· | s)`
    pub fn kernel_row(&self, s: usize) -> &[f64] {
        &self.kernel[s * self.n_states..(s + 1) * self.n_states]
    }

    /// States with positive mass at some step when started from `μ`.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen: Vec<bool> = self.initial.iter().map(|&p| p > 0.0).collect();
        let mut stack: Vec<usize> = (0..self.n_states).filter(|&s| seen[s]).collect();
        while let Some(s) = stack.pop() {
            for (next, &p) in self.kernel_row(s).iter().enumerate() {
                if p > 0.0 && !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen
    }
}

/// `TBMRP(E, π)`: κ(s'|s) = Σ_a p(s'|s,a) π(a|s), r̄(s) = Σ_a r(s,a) π(a|s).
pub fn compose_tbmrp(env: &FiniteMdp, policy: &TabularPolicy) -> Result<Mrp> {
    if policy.conditioning() != Conditioning::State {
        return Err(Error::SignatureMismatch {
            expected: Conditioning::State,
            found: policy.conditioning(),
        });
    }
    let (ns, na) = (env.n_states(), env.n_actions());
    if policy.n_states() != ns || policy.n_actions() != na {
        return Err(Error::InvalidPolicy(format!(
            "policy is over {}x{} but the MDP has {ns} states and {na} actions",
            policy.n_states(),
            policy.n_actions()
        )));
    }
    let mut kernel = vec![0.0; ns * ns];
    let mut reward = vec![0.0; ns];
    for s in 0..ns {
        let pi = policy.row(s);
        let row = &mut kernel[s * ns..(s + 1) * ns];
        for (a, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (k, &p) in row.iter_mut().zip(env.transition_row(s, a)) {
                *k += p * w;
            }
            reward[s] += env.r(s, a) * w;
        }
    }
    Mrp::new(env.initial().to_vec(), kernel, reward)
}

/// `RTMRP(E, π̃)` over `X = S × A` (index `s * |A| + a`):
/// κ̃((s',a')|(s,a)) = p(s'|s,a) π̃(a'|s,a), r̄((s,a)) = r(s,a),
/// μ̃((s,a)) = μ(s) δ(a − c).
pub fn compose_rtmrp(
    env: &FiniteMdp,
    policy: &TabularPolicy,
    initial_action: usize,
) -> Result<Mrp> {
    if policy.conditioning() != Conditioning::StateAction {
        return Err(Error::SignatureMismatch {
            expected: Conditioning::StateAction,
            found: policy.conditioning(),
        });
    }
    let (ns, na) = (env.n_states(), env.n_actions());
    if policy.n_states() != ns || policy.n_actions() != na {
        return Err(Error::InvalidPolicy(format!(
            "policy is over {}x{} but the MDP has {ns} states and {na} actions",
            policy.n_states(),
            policy.n_actions()
        )));
    }
    if initial_action >= na {
        return Err(Error::InvalidPolicy(format!(
            "initial action {initial_action} outside an action space of size {na}"
        )));
    }
    let nx = ns * na;
    let mut initial = vec![0.0; nx];
    for (s, &mu) in env.initial().iter().enumerate() {
        initial[s * na + initial_action] = mu;
    }
    let mut kernel = vec![0.0; nx * nx];
    let mut reward = vec![0.0; nx];
    for s in 0..ns {
        for a in 0..na {
            let x = s * na + a;
            reward[x] = env.r(s, a);
            let pi = policy.row_at(s, a);
            let row = &mut kernel[x * nx..(x + 1) * nx];
            for (next, &p) in env.transition_row(s, a).iter().enumerate() {
                for (next_a, &w) in pi.iter().enumerate() {
                    row[next * na + next_a] = p * w;
                }
            }
        }
    }
    Mrp::new(initial, kernel, reward)
}

/// Sample `horizon + 1` states from `m` with their state rewards.
pub fn sample_trajectory<R: Rng + ?Sized>(
    m: &Mrp,
    horizon: usize,
    rng: &mut R,
) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut s = categorical(m.initial(), rng);
    out.push((s, m.reward()[s]));
    for _ in 0..horizon {
        s = categorical(m.kernel_row(s), rng);
        out.push((s, m.reward()[s]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub probability: f64,
    pub rewards: Vec<f64>,
}

/// Exact distribution over state sequences of length `horizon + 1`.
/// Zero-probability sequences are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDistribution {
    pub horizon: usize,
    pub n_states: usize,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryDistribution {
    pub fn total_mass(&self) -> f64 {
        self.trajectories.iter().map(|t| t.probability).sum()
    }

    /// Marginal distribution of the state at step `t`.
    pub fn marginal(&self, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for tr in &self.trajectories {
            out[tr.states[t]] += tr.probability;
        }
        out
    }

    /// Total-variation distance between two distributions over sequences.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let mut mass: BTreeMap<&[usize], f64> = BTreeMap::new();
        for t in &self.trajectories {
            *mass.entry(&t.states).or_default() += t.probability;
        }
        for t in &other.trajectories {
            *mass.entry(&t.states).or_default() -= t.probability;
        }
        0.5 * mass.values().map(|d| d.abs()).sum::<f64>()
    }
}

/// Enumerate every state sequence of `m` up to `horizon`, refusing when
/// `|S|^(horizon+1)` exceeds `budget`.
pub fn enumerate_trajectory_distribution(
    m: &Mrp,
    horizon: usize,
    budget: u64,
) -> Result<TrajectoryDistribution> {
    let required = (m.n_states() as u128)
        .checked_pow(horizon as u32 + 1)
        .unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut trajectories = Vec::new();
    let mut states = Vec::with_capacity(horizon + 1);
    for (s, &p) in m.initial().iter().enumerate() {
        if p > 0.0 {
            states.push(s);
            extend_paths(m, horizon, p, &mut states, &mut trajectories);
            states.pop();
        }
    }
    Ok(TrajectoryDistribution {
        horizon,
        n_states: m.n_states(),
        trajectories,
    })
}

fn extend_paths(
    m: &Mrp,
    horizon: usize,
    prob: f64,
    states: &mut Vec<usize>,
    out: &mut Vec<Trajectory>,
) {
    if states.len() == horizon + 1 {
        out.push(Trajectory {
            states: states.clone(),
            probability: prob,
            rewards: states.iter().map(|&s| m.reward()[s]).collect(),
        });
        return;
    }
    let s = *states.last().unwrap();
    for (next, &p) in m.kernel_row(s).iter().enumerate() {
        if p > 0.0 {
            states.push(next);
            extend_paths(m, horizon, prob * p, states, out);
            states.pop();
        }
    }
}

/// Which entry of an MRP a discrepancy refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrpEntry {
    Initial(usize),
    Kernel { from: usize, to: usize },
    Reward(usize),
}

impl fmt::Display for MrpEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MrpEntry::Initial(s) => write!(f, "initial[{s}]"),
            MrpEntry::Kernel { from, to } => write!(f, "kernel[{to} | {from}]"),
            MrpEntry::Reward(s) => write!(f, "reward[{s}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrpComparison {
    pub equal: bool,
    pub max_discrepancy: f64,
    /// Entry (in the first MRP's labels) holding the largest discrepancy.
    pub worst: Option<MrpEntry>,
}

/// Entrywise comparison of two finite MRPs. `relabel[i]` gives the state of
/// `m1` that corresponds to state `i` of `m2`; `None` means identity.
pub fn mrp_equal(m1: &Mrp, m2: &Mrp, tol: f64, relabel: Option<&[usize]>) -> Result<MrpComparison> {
    let n = m1.n_states();
    if m2.n_states() != n {
        return Err(Error::IncomparableStates(format!(
            "{} states vs {} states",
            n,
            m2.n_states()
        )));
    }
    let identity: Vec<usize>;
    let map = match relabel {
        Some(map) => {
            if map.len() != n {
                return Err(Error::IncomparableStates(format!(
                    "relabeling has {} entries for {n} states",
                    map.len()
                )));
            }
            let mut hit = vec![false; n];
            for &j in map {
                if j >= n || core::mem::replace(&mut hit[j], true) {
                    return Err(Error::IncomparableStates(
                        "relabeling is not a permutation".to_string(),
                    ));
                }
            }
            map
        }
        None => {
            identity = (0..n).collect();
            &identity
        }
    };
    let mut worst = None;
    let mut max = 0.0f64;
    let mut note = |entry: MrpEntry, a: f64, b: f64| {
        let d = (a - b).abs();
        if d > max || (worst.is_none() && d >= max) || d.is_nan() {
            max = if d.is_nan() { f64::INFINITY } else { d };
            worst = Some(entry);
        }
    };
    for i in 0..n {
        let s = map[i];
        note(MrpEntry::Initial(s), m1.initial()[s], m2.initial()[i]);
        note(MrpEntry::Reward(s), m1.reward()[s], m2.reward()[i]);
        for (j, &t) in map.iter().enumerate() {
            note(
                MrpEntry::Kernel { from: s, to: t },
                m1.kernel_row(s)[t],
                m2.kernel_row(i)[j],
            );
        }
    }
    Ok(MrpComparison {
        equal: max <= tol,
        max_discrepancy: max,
        worst,
    })
}

/// A simulator-form MDP: continuous states and actions, sampled dynamics.
pub trait Simulator {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Start a new episode and return the first observation.
    fn reset(&mut self) -> Vec<f64>;
    /// Apply `action` and advance one step.
    fn step(&mut self, action: &[f64]) -> Step;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    /// `r(s_t, a_t)` for the state the step started from.
    pub reward: f64,
    pub terminal: bool,
}
