use alloc::vec::Vec;

use super::agent::{Agent, UpdateReport};
use super::replay::{ReplayMemory, ReplayRecord};
use crate::mdp::Simulator;
use crate::Error;

/// Evaluation episodes are cut off here even without a terminal flag.
pub const EVAL_STEP_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_steps: u64,
    /// Environment steps between evaluations; the first happens at step 0.
    pub eval_interval: u64,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 50_000,
            eval_interval: 2_500,
            eval_episodes: 5,
        }
    }
}

/// One point of a learning curve. Losses are averaged over the gradient
/// steps since the previous record and are NaN when there were none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRecord {
    pub step: u64,
    /// Mean undiscounted, unscaled return of the evaluation episodes.
    pub episode_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub popart_mean: f64,
    pub popart_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<CurveRecord>,
    pub gradient_steps: u64,
}

/// Training stopped on a non-finite loss or parameter. The agent keeps the
/// parameters of the failing step for checkpointing.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub step: u64,
    pub cause: Error,
}

/// Mean return of deterministic-policy episodes on `env`.
pub fn evaluate<E: Simulator>(agent: &Agent, env: &mut E, episodes: usize) -> crate::Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset();
        for _ in 0..EVAL_STEP_CAP {
            let step = env.step(&agent.act_deterministic(&obs)?);
            total += step.reward;
            if step.terminal {
                break;
            }
            obs = step.observation;
        }
    }
    Ok(total / episodes.max(1) as f64)
}

#[derive(Default)]
struct LossMeter {
    policy: f64,
    value: f64,
    count: u64,
}

impl LossMeter {
    fn add(&mut self, r: UpdateReport) {
        self.policy += r.policy_loss;
        self.value += r.value_loss;
        self.count += 1;
    }

    fn take(&mut self) -> (f64, f64) {
        let out = if self.count == 0 {
            (f64::NAN, f64::NAN)
        } else {
            (
                self.policy / self.count as f64,
                self.value / self.count as f64,
            )
        };
        *self = Self::default();
        out
    }
}

/// Run the act / store / learn loop for `cfg.total_steps` environment
/// steps, evaluating on `eval_env` every `cfg.eval_interval` steps and at
/// the end. Each record is passed to `observer` as soon as it exists.
pub fn train<E: Simulator>(
    agent: &mut Agent,
    env: &mut E,
    eval_env: &mut E,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&CurveRecord),
) -> Result<TrainOutcome, Abort> {
    let interval = cfg.eval_interval.max(1);
    let mut memory = ReplayMemory::new(
        agent.hp.replay_capacity,
        env.observation_dim(),
        env.action_dim(),
    );
    let mut records = Vec::new();
    let mut meter = LossMeter::default();
    let mut gradient_steps = 0;
    let mut obs = env.reset();
    let mut emit = |agent: &Agent, step: u64, meter: &mut LossMeter| -> Result<(), Abort> {
        let episode_return =
            evaluate(agent, eval_env, cfg.eval_episodes).map_err(|cause| Abort { step, cause })?;
        let (policy_loss, value_loss) = meter.take();
        let record = CurveRecord {
            step,
            episode_return,
            policy_loss,
            value_loss,
            popart_mean: agent.popart.mean,
            popart_scale: agent.popart.scale(),
        };
        observer(&record);
        records.push(record);
        Ok(())
    };
    for step in 0..cfg.total_steps {
        if step % interval == 0 {
            emit(agent, step, &mut meter)?;
        }
        let learning = step >= agent.hp.start_training;
        let action = if learning {
            agent.act(&obs).map_err(|cause| Abort { step, cause })?
        } else {
            agent.random_action()
        };
        let out = env.step(&action);
        memory.push(ReplayRecord {
            state: obs,
            action,
            reward: out.reward * agent.hp.reward_scale,
            next_state: out.observation.clone(),
            terminal: out.terminal,
        });
        obs = if out.terminal {
            env.reset()
        } else {
            out.observation
        };
        if learning {
            for _ in 0..agent.hp.steps_per_env_step {
                let report = agent
                    .update_from(&memory)
                    .map_err(|cause| Abort { step, cause })?;
                if !(report.policy_loss.is_finite() && report.value_loss.is_finite()) {
                    return Err(Abort {
                        step,
                        cause: Error::NonFinite {
                            index: 0,
                            label: "loss",
                        },
                    });
                }
                meter.add(report);
                gradient_steps += 1;
            }
        }
    }
    emit(agent, cfg.total_steps, &mut meter)?;
    Ok(TrainOutcome {
        records,
        gradient_steps,
    })
}

/// Trapezoid-rule area under a learning curve.
pub fn area_under_curve(steps: &[f64], returns: &[f64]) -> f64 {
    steps
        .windows(2)
        .zip(returns.windows(2))
        .map(|(s, r)| 0.5 * (s[1] - s[0]) * (r[0] + r[1]))
        .sum()
}
