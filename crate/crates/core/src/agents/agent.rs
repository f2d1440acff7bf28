use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hyper::Hyperparameters;
use super::replay::{Batch, ReplayMemory};
use crate::nn::adam::Adam;
use crate::nn::policy::{policy_sample, tape_sample};
use crate::nn::{
    Architecture, Matrix, Network, NetworkSpec, ParamMode, ParameterVector, PopArt, Tape, Var,
};
use crate::rng::{substream, Generator};
use crate::{Error, Result};

const AGENT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    /// Real-time actor-critic with one merged network.
    Rtac,
    /// Real-time actor-critic with separate policy and value networks.
    RtacSeparate,
    /// Soft actor-critic with twin action-value critics.
    Sac,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Rtac, AgentKind::RtacSeparate, AgentKind::Sac];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Rtac => "rtac",
            AgentKind::RtacSeparate => "rtac-separate",
            AgentKind::Sac => "sac",
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            AgentKind::Rtac => Architecture::Merged,
            AgentKind::RtacSeparate => Architecture::Separate,
            AgentKind::Sac => Architecture::ActionValue,
        }
    }

    pub fn is_real_time(self) -> bool {
        self != AgentKind::Sac
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown agent kind `{s}` (expected rtac, rtac-separate or sac)")
            })
    }
}

/// A minibatch together with everything a loss evaluation needs that does
/// not depend on the trainable parameters: the noise draws and the
/// normalized regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub batch: Batch,
    /// `ε` for the action sampled at the stored states.
    pub noise: Matrix,
    /// Value targets in Pop-Art normalized units.
    pub targets: Vec<f64>,
    pub popart: PopArt,
}

#[derive(Debug, Clone, Copy)]
pub struct Losses {
    pub policy: Var,
    pub value: Var,
    pub total: Var,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub policy_loss: f64,
    pub value_loss: f64,
}

/// Online and target parameters, normalization statistics, optimizer
/// state and the agent's own generator.
#[derive(Debug, Clone)]
pub struct Agent {
    pub kind: AgentKind,
    pub hp: Hyperparameters,
    net: Network,
    pub theta: ParameterVector,
    pub target: ParameterVector,
    pub popart: PopArt,
    adam: Adam,
    pub updates: u64,
    rng: Generator,
}

/// `θ̄ ← τθ + (1−τ)θ̄`.
pub fn polyak_update(
    target: &mut ParameterVector,
    online: &ParameterVector,
    tau: f64,
) -> Result<()> {
    if target.layout != online.layout {
        return Err(Error::LayoutMismatch);
    }
    for (t, &o) in target.values.iter_mut().zip(&online.values) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

fn normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| StandardNormal.sample(rng))
            .collect(),
    )
}

fn masks(batch: &Batch, gamma: f64) -> Vec<f64> {
    batch
        .terminals
        .iter()
        .map(|&d| if d { 0.0 } else { gamma })
        .collect()
}

impl Agent {
    /// Real-time agents expect the last `action_dim` observation entries to
    /// be the previously emitted action.
    pub fn new(
        kind: AgentKind,
        observation_dim: usize,
        action_dim: usize,
        hp: Hyperparameters,
        seed: u64,
    ) -> Result<Self> {
        if kind.is_real_time() && observation_dim <= action_dim {
            return Err(Error::Dimension {
                expected: action_dim + 1,
                found: observation_dim,
            });
        }
        let mut rng = substream(seed, AGENT_STREAM);
        let net = Network::new(NetworkSpec {
            input_dim: observation_dim,
            action_dim,
            hidden: hp.hidden.clone(),
            architecture: kind.architecture(),
        });
        let theta = net.init(&mut rng);
        Ok(Self {
            kind,
            net,
            target: theta.clone(),
            adam: Adam::new(theta.len(), hp.lr),
            popart: PopArt::new(hp.popart_alpha),
            theta,
            hp,
            updates: 0,
            rng,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn observation_dim(&self) -> usize {
        self.net.spec().input_dim
    }

    pub fn action_dim(&self) -> usize {
        self.net.spec().action_dim
    }

    pub fn rng(&mut self) -> &mut Generator {
        &mut self.rng
    }

    /// Uniform action in the box, for exploration before learning starts.
    pub fn random_action(&mut self) -> Vec<f64> {
        (0..self.action_dim())
            .map(|_| self.rng.random_range(-1.0..1.0))
            .collect()
    }

    /// Stochastic action from the current policy.
    pub fn act(&mut self, observation: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, observation.len(), observation.to_vec());
        let out = self.net.forward(&self.theta, &x, &self.popart)?;
        let noise: Vec<f64> = (0..self.action_dim())
            .map(|_| StandardNormal.sample(&mut self.rng))
            .collect();
        Ok(policy_sample(&out.mean.data, &out.log_std.data, &noise).action)
    }

    /// `tanh(mean)`, used for evaluation episodes.
    pub fn act_deterministic(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::from_vec(1, observation.len(), observation.to_vec());
        let out = self.net.forward(&self.theta, &x, &self.popart)?;
        Ok(out.mean.data.iter().map(|&m| libm::tanh(m)).collect())
    }

    /// Next-state inputs with the action part replaced by `action`.
    fn with_action(next_states: &Matrix, action: &Matrix) -> Matrix {
        let keep = next_states.cols - action.cols;
        Matrix::hconcat(&[&next_states.columns(0, keep), action])
    }

    /// Draw noise, compute the value targets with the target network,
    /// update Pop-Art (rewriting the value heads of both parameter
    /// vectors) and normalize the targets with the new statistics.
    pub fn prepare(&mut self, batch: Batch) -> Result<Prepared> {
        if batch.is_empty() {
            return Err(Error::InvalidRecord("empty minibatch".into()));
        }
        let (n, da) = (batch.len(), self.action_dim());
        let alpha = self.hp.training_temperature();
        let mask = masks(&batch, self.hp.gamma);
        let noise = normal_matrix(n, da, &mut self.rng);
        let mut targets = Vec::with_capacity(n);
        match self.kind {
            AgentKind::Rtac | AgentKind::RtacSeparate => {
                // ã ~ π̃(·|x_t) evaluated at the stored s_{t+1}
                let out = self.net.forward(&self.theta, &batch.states, &self.popart)?;
                let mut action = Matrix::zeros(n, da);
                let mut log_prob = Vec::with_capacity(n);
                for i in 0..n {
                    let s = policy_sample(out.mean.row(i), out.log_std.row(i), noise.row(i));
                    action.row_mut(i).copy_from_slice(&s.action);
                    log_prob.push(s.log_density);
                }
                let next = Self::with_action(&batch.next_states, &action);
                let v = self
                    .net
                    .forward(&self.target, &next, &self.popart)?
                    .denormalized;
                for i in 0..n {
                    let v_min = v.get(i, 0).min(v.get(i, 1));
                    targets.push(batch.rewards[i] + mask[i] * (v_min - alpha * log_prob[i]));
                }
            }
            AgentKind::Sac => {
                let next_noise = normal_matrix(n, da, &mut self.rng);
                let out = self
                    .net
                    .forward(&self.theta, &batch.next_states, &self.popart)?;
                let mut action = Matrix::zeros(n, da);
                let mut log_prob = Vec::with_capacity(n);
                for i in 0..n {
                    let s = policy_sample(out.mean.row(i), out.log_std.row(i), next_noise.row(i));
                    action.row_mut(i).copy_from_slice(&s.action);
                    log_prob.push(s.log_density);
                }
                let q = self
                    .net
                    .q_forward(&self.target, &batch.next_states, &action)?;
                for i in 0..n {
                    let q_min = self.popart.denormalize(q.get(i, 0).min(q.get(i, 1)));
                    targets.push(batch.rewards[i] + mask[i] * (q_min - alpha * log_prob[i]));
                }
            }
        }
        if let Some(index) = targets.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                index,
                label: "value_target",
            });
        }
        let heads = self.net.value_heads();
        self.popart.update(
            &targets,
            &heads,
            &mut [&mut self.theta.values, &mut self.target.values],
        );
        let popart = self.popart;
        targets.iter_mut().for_each(|y| *y = popart.normalize(*y));
        Ok(Prepared {
            batch,
            noise,
            targets,
            popart,
        })
    }

    /// Record the policy, value and combined losses at trainable
    /// parameters `theta`. `frozen` supplies the detached critic used
    /// inside the policy loss.
    pub fn losses(
        &self,
        tape: &mut Tape,
        theta: &[f64],
        frozen: &[f64],
        prep: &Prepared,
    ) -> Losses {
        let batch = &prep.batch;
        let n = batch.len();
        let alpha = self.hp.training_temperature();
        let scale = prep.popart.scale();
        let mask = masks(batch, self.hp.gamma);
        let x = tape.constant(batch.states.clone());
        let targets = Matrix::from_vec(n, 2, prep.targets.iter().flat_map(|&y| [y, y]).collect());
        let targets = tape.constant(targets);
        let (policy_heads, values) = match self.kind {
            AgentKind::Rtac | AgentKind::RtacSeparate => {
                let heads = self
                    .net
                    .tape_heads(tape, theta, x, ParamMode::Trainable, true, true);
                (heads, heads.values.expect("state-value heads"))
            }
            AgentKind::Sac => {
                let heads = self
                    .net
                    .tape_heads(tape, theta, x, ParamMode::Trainable, true, false);
                let a = tape.constant(batch.actions.clone());
                (
                    heads,
                    self.net.tape_q(tape, theta, x, a, ParamMode::Trainable),
                )
            }
        };
        let err = tape.sub(values, targets);
        let sq = tape.square(err);
        let value = tape.mean(sq);
        let value = tape.name(value, "value_loss");

        let mean = policy_heads.mean.expect("policy head");
        let log_std = policy_heads.log_std.expect("policy head");
        let (action, log_prob) = tape_sample(tape, mean, log_std, &prep.noise);
        // critic values in normalized units, evaluated with detached weights
        let (critic, weight, offset): (Var, Vec<f64>, Vec<f64>) = match self.kind {
            AgentKind::Rtac | AgentKind::RtacSeparate => {
                let keep = batch
                    .next_states
                    .columns(0, batch.next_states.cols - self.action_dim());
                let keep = tape.constant(keep);
                let next = tape.concat(&[keep, action]);
                let heads = self
                    .net
                    .tape_heads(tape, frozen, next, ParamMode::Frozen, false, true);
                let offset = mask.iter().map(|m| m * prep.popart.mean / scale).collect();
                (heads.values.expect("state-value heads"), mask, offset)
            }
            AgentKind::Sac => {
                let q = self.net.tape_q(tape, frozen, x, action, ParamMode::Frozen);
                (
                    q,
                    alloc::vec![1.0; n],
                    alloc::vec![prep.popart.mean / scale; n],
                )
            }
        };
        let c0 = tape.columns(critic, 0, 1);
        let c1 = tape.columns(critic, 1, 2);
        let c_min = tape.min(c0, c1);
        let weight = tape.constant(Matrix::column(weight));
        let weighted = tape.mul(c_min, weight);
        let offset = tape.constant(Matrix::column(offset));
        let weighted = tape.add(weighted, offset);
        let entropy = tape.scale(log_prob, alpha / scale);
        let per_record = tape.sub(entropy, weighted);
        let policy = tape.mean(per_record);
        let policy = tape.name(policy, "policy_loss");

        let total = match self.kind {
            AgentKind::Rtac | AgentKind::RtacSeparate => {
                let p = tape.scale(policy, self.hp.beta);
                let v = tape.scale(value, 1.0 - self.hp.beta);
                tape.add(p, v)
            }
            AgentKind::Sac => tape.add(policy, value),
        };
        let total = tape.name(total, "total_loss");
        Losses {
            policy,
            value,
            total,
        }
    }

    /// One gradient step on a minibatch followed by the target update.
    pub fn update(&mut self, batch: Batch) -> Result<UpdateReport> {
        let prep = self.prepare(batch)?;
        let mut tape = Tape::new();
        let losses = self.losses(&mut tape, &self.theta.values, &self.theta.values, &prep);
        let grad = tape.gradient(losses.total, self.theta.len())?;
        self.adam.step(&mut self.theta.values, &grad);
        self.theta.check_finite()?;
        polyak_update(&mut self.target, &self.theta, self.hp.tau)?;
        self.updates += 1;
        Ok(UpdateReport {
            policy_loss: tape.scalar(losses.policy),
            value_loss: tape.scalar(losses.value),
        })
    }

    /// Sample a minibatch from `memory` with the agent's generator and update.
    pub fn update_from(&mut self, memory: &ReplayMemory) -> Result<UpdateReport> {
        let batch = memory.sample(self.hp.batch_size, &mut self.rng);
        self.update(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::replay::ReplayRecord;
    use crate::nn::gradcheck::finite_difference_check;
    use crate::rng::seeded;
    use alloc::vec;

    fn small_hp() -> Hyperparameters {
        Hyperparameters {
            hidden: vec![8, 8],
            batch_size: 6,
            ..Hyperparameters::default()
        }
    }

    fn random_batch(seed: u64, n: usize, obs: usize, da: usize) -> Batch {
        let mut rng = seeded(seed);
        let mut u = |k: usize| {
            (0..k)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>()
        };
        let records: Vec<ReplayRecord> = (0..n)
            .map(|i| ReplayRecord {
                state: u(obs),
                action: u(da),
                reward: u(1)[0] * 5.0,
                next_state: u(obs),
                terminal: i % 4 == 3,
            })
            .collect();
        Batch::from_records(&records)
    }

    fn agent(kind: AgentKind, beta: f64) -> Agent {
        Agent::new(kind, 4, 2, Hyperparameters { beta, ..small_hp() }, 3).unwrap()
    }

    fn loss_value(a: &Agent, theta: &[f64], prep: &Prepared, pick: fn(&Losses) -> Var) -> f64 {
        let mut tape = Tape::new();
        let l = a.losses(&mut tape, theta, &a.theta.values, prep);
        tape.scalar(pick(&l))
    }

    #[test]
    fn kinds_round_trip_through_names() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>(), Ok(k));
        }
        assert!("ppo".parse::<AgentKind>().is_err());
    }

    #[test]
    fn real_time_agent_needs_action_in_observation() {
        assert!(Agent::new(AgentKind::Rtac, 2, 2, small_hp(), 0).is_err());
        assert!(Agent::new(AgentKind::Sac, 2, 2, small_hp(), 0).is_ok());
    }

    #[test]
    fn polyak_extremes_and_exactness() {
        let a = agent(AgentKind::Rtac, 0.2);
        let mut other = agent(AgentKind::Rtac, 0.2);
        other.theta.values.iter_mut().for_each(|x| *x += 1.0);
        let mut t = a.theta.clone();
        polyak_update(&mut t, &other.theta, 1.0).unwrap();
        assert_eq!(t, other.theta);
        let mut t = a.theta.clone();
        polyak_update(&mut t, &other.theta, 0.0).unwrap();
        assert_eq!(t, a.theta);
        let mut t = a.theta.clone();
        polyak_update(&mut t, &other.theta, 0.005).unwrap();
        for i in 0..t.len() {
            assert_eq!(
                t.values[i],
                0.005 * other.theta.values[i] + 0.995 * a.theta.values[i]
            );
        }
        let sac = agent(AgentKind::Sac, 0.2);
        assert_eq!(
            polyak_update(&mut t, &sac.theta, 0.5),
            Err(Error::LayoutMismatch)
        );
    }

    #[test]
    fn terminal_target_is_reward() {
        for kind in AgentKind::ALL {
            let mut a = agent(kind, 0.2);
            let mut batch = random_batch(1, 4, 4, 2);
            batch.terminals = vec![true; 4];
            let rewards = batch.rewards.clone();
            let prep = a.prepare(batch).unwrap();
            for (y, r) in prep.targets.iter().zip(&rewards) {
                assert!((prep.popart.denormalize(*y) - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_selects_loss_terms() {
        for (beta, pick) in [
            (0.0, (|l: &Losses| l.value) as fn(&Losses) -> Var),
            (1.0, |l: &Losses| l.policy),
        ] {
            let mut a = agent(AgentKind::Rtac, beta);
            let prep = a.prepare(random_batch(2, 5, 4, 2)).unwrap();
            let mut tape = Tape::new();
            let l = a.losses(&mut tape, &a.theta.values, &a.theta.values, &prep);
            assert_eq!(tape.scalar(l.total), tape.scalar(pick(&l)));
        }
    }

    #[test]
    fn value_loss_is_zero_at_targets() {
        let mut a = agent(AgentKind::RtacSeparate, 0.2);
        let mut prep = a.prepare(random_batch(3, 3, 4, 2)).unwrap();
        let out = a
            .network()
            .forward(&a.theta, &prep.batch.states, &a.popart)
            .unwrap();
        prep.targets = (0..3).map(|i| out.values.get(i, 0)).collect();
        // second head off by e in one record: e²/2 averaged over records
        let e = out.values.get(1, 1) - out.values.get(1, 0);
        let mut tape = Tape::new();
        let l = a.losses(&mut tape, &a.theta.values, &a.theta.values, &prep);
        let expected: f64 = (0..3)
            .map(|i| (out.values.get(i, 1) - out.values.get(i, 0)).powi(2))
            .sum::<f64>()
            / 6.0;
        assert!((tape.scalar(l.value) - expected).abs() < 1e-12);
        assert!(e != 0.0);
    }

    #[test]
    fn policy_loss_ignores_stored_next_action() {
        let mut a = agent(AgentKind::Rtac, 0.2);
        let prep = a.prepare(random_batch(4, 6, 4, 2)).unwrap();
        let mut swapped = prep.clone();
        for r in 0..6 {
            swapped.batch.next_states.row_mut(r)[2..].copy_from_slice(&[0.77, -0.31]);
        }
        let pick = |l: &Losses| l.policy;
        let before = loss_value(&a, &a.theta.values, &prep, pick);
        let after = loss_value(&a, &a.theta.values, &swapped, pick);
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn every_loss_passes_finite_differences() {
        let picks: [(&str, fn(&Losses) -> Var); 3] = [
            ("policy", |l| l.policy),
            ("value", |l| l.value),
            ("total", |l| l.total),
        ];
        for kind in AgentKind::ALL {
            let mut a = agent(kind, 0.2);
            let prep = a.prepare(random_batch(5, 5, 4, 2)).unwrap();
            for (name, pick) in picks {
                let mut tape = Tape::new();
                let l = a.losses(&mut tape, &a.theta.values, &a.theta.values, &prep);
                let grad = tape.gradient(pick(&l), a.theta.len()).unwrap();
                let report = finite_difference_check(
                    |t| loss_value(&a, t, &prep, pick),
                    &grad,
                    &a.theta.values,
                    1e-5,
                    1e-4,
                );
                assert!(
                    report.passed,
                    "{kind} {name}: {:?} at {:?}",
                    report.max_relative_error, report.worst
                );
            }
        }
    }

    #[test]
    fn update_is_deterministic() {
        let run = || {
            let mut a = agent(AgentKind::Sac, 0.2);
            for s in 0..3 {
                a.update(random_batch(10 + s, 6, 4, 2)).unwrap();
            }
            a.theta
        };
        assert_eq!(run(), run());
    }
}
