//! Experiment configuration: flat `key = value` text with dotted keys.
//!
//! ```text
//! # SAC in the real-time wrapped point mass
//! agent.kind = sac
//! env.wrap = rtmdp
//! run.seeds = 0,1,2
//! hp.hidden = 64,64
//! ```
//!
//! Every key has a default; unknown or repeated keys are errors.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rtrl_core::agents::{AgentKind, Hyperparameters};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    Value {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    PointMass,
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "point-mass" => Ok(EnvKind::PointMass),
            _ => Err(format!("unknown environment `{s}` (expected point-mass)")),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("point-mass")
    }
}

/// Whether the environment is used as is or through its real-time
/// augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrap {
    Plain,
    Rtmdp,
}

impl FromStr for Wrap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plain" => Ok(Wrap::Plain),
            "rtmdp" => Ok(Wrap::Rtmdp),
            _ => Err(format!("unknown wrapping `{s}` (expected plain or rtmdp)")),
        }
    }
}

impl std::fmt::Display for Wrap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Wrap::Plain => "plain",
            Wrap::Rtmdp => "rtmdp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    pub env: EnvKind,
    pub wrap: Wrap,
    pub hp: Hyperparameters,
    pub seeds: Vec<u64>,
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::Rtac,
            env: EnvKind::PointMass,
            wrap: Wrap::Rtmdp,
            hp: Hyperparameters::default(),
            seeds: vec![0],
            total_steps: 50_000,
            eval_interval: 2_500,
            eval_episodes: 5,
            out: PathBuf::from("runs"),
        }
    }
}

/// Keys accepted in a config file, in manifest order.
pub const KEYS: [&str; 20] = [
    "agent.kind",
    "env.kind",
    "env.wrap",
    "hp.lr",
    "hp.gamma",
    "hp.tau",
    "hp.batch_size",
    "hp.reward_scale",
    "hp.entropy_scale",
    "hp.beta",
    "hp.start_training",
    "hp.steps_per_env_step",
    "hp.popart_alpha",
    "hp.hidden",
    "hp.replay_capacity",
    "run.seeds",
    "run.total_steps",
    "run.eval_interval",
    "run.eval_episodes",
    "run.out",
];

/// Written into manifests; accepted (and not interpreted) when a manifest
/// is used as a config.
pub const VERSION_KEY: &str = "code.version";

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|e| format!("`{}`: {e}", v.trim()))
        })
        .collect()
}

fn scalar<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: body.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            if key == VERSION_KEY {
                seen.push(VERSION_KEY);
                continue;
            }
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            };
            seen.push(known);
            cfg.set(known, value).map_err(|reason| ConfigError::Value {
                line,
                key: key.to_string(),
                reason,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let hp = &mut self.hp;
        match key {
            "agent.kind" => self.agent = scalar(value)?,
            "env.kind" => self.env = scalar(value)?,
            "env.wrap" => self.wrap = scalar(value)?,
            "hp.lr" => hp.lr = scalar(value)?,
            "hp.gamma" => hp.gamma = scalar(value)?,
            "hp.tau" => hp.tau = scalar(value)?,
            "hp.batch_size" => hp.batch_size = scalar(value)?,
            "hp.reward_scale" => hp.reward_scale = scalar(value)?,
            "hp.entropy_scale" => hp.entropy_scale = scalar(value)?,
            "hp.beta" => hp.beta = scalar(value)?,
            "hp.start_training" => hp.start_training = scalar(value)?,
            "hp.steps_per_env_step" => hp.steps_per_env_step = scalar(value)?,
            "hp.popart_alpha" => hp.popart_alpha = scalar(value)?,
            "hp.hidden" => hp.hidden = list(value)?,
            "hp.replay_capacity" => hp.replay_capacity = scalar(value)?,
            "run.seeds" => self.seeds = list(value)?,
            "run.total_steps" => self.total_steps = scalar(value)?,
            "run.eval_interval" => self.eval_interval = scalar(value)?,
            "run.eval_episodes" => self.eval_episodes = scalar(value)?,
            "run.out" => self.out = PathBuf::from(value),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        let hp = &self.hp;
        if self.agent.is_real_time() && self.wrap != Wrap::Rtmdp {
            return bad("real-time actor-critic agents need env.wrap = rtmdp");
        }
        if !(0.0..1.0).contains(&hp.gamma) {
            return bad("hp.gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&hp.tau) || !(0.0..=1.0).contains(&hp.beta) {
            return bad("hp.tau and hp.beta must lie in [0, 1]");
        }
        if !(hp.lr > 0.0 && hp.reward_scale > 0.0 && hp.entropy_scale >= 0.0) {
            return bad(
                "hp.lr and hp.reward_scale must be positive, hp.entropy_scale non-negative",
            );
        }
        if !(hp.popart_alpha > 0.0 && hp.popart_alpha <= 1.0) {
            return bad("hp.popart_alpha must lie in (0, 1]");
        }
        if hp.batch_size == 0 || hp.replay_capacity == 0 || hp.hidden.contains(&0) {
            return bad("hp.batch_size, hp.replay_capacity and hidden widths must be positive");
        }
        if self.seeds.is_empty() || self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad(
                "run.seeds must be non-empty; run.eval_interval and run.eval_episodes positive",
            );
        }
        Ok(())
    }

    /// Every key with its resolved value, one per line; parses back to
    /// `self`.
    pub fn to_text(&self) -> String {
        let hp = &self.hp;
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("write to string");
        put("agent.kind", self.agent.to_string());
        put("env.kind", self.env.to_string());
        put("env.wrap", self.wrap.to_string());
        put("hp.lr", hp.lr.to_string());
        put("hp.gamma", hp.gamma.to_string());
        put("hp.tau", hp.tau.to_string());
        put("hp.batch_size", hp.batch_size.to_string());
        put("hp.reward_scale", hp.reward_scale.to_string());
        put("hp.entropy_scale", hp.entropy_scale.to_string());
        put("hp.beta", hp.beta.to_string());
        put("hp.start_training", hp.start_training.to_string());
        put("hp.steps_per_env_step", hp.steps_per_env_step.to_string());
        put("hp.popart_alpha", hp.popart_alpha.to_string());
        put("hp.hidden", join(&hp.hidden));
        put("hp.replay_capacity", hp.replay_capacity.to_string());
        put("run.seeds", join(&self.seeds));
        put("run.total_steps", self.total_steps.to_string());
        put("run.eval_interval", self.eval_interval.to_string());
        put("run.eval_episodes", self.eval_episodes.to_string());
        put("run.out", self.out.display().to_string());
        out
    }

    /// Label used to group runs in summaries, e.g. `sac rtmdp(point-mass)`.
    pub fn condition(&self) -> String {
        match self.wrap {
            Wrap::Plain => format!("{} {}", self.agent, self.env),
            Wrap::Rtmdp => format!("{} rtmdp({})", self.agent, self.env),
        }
    }
}
