//! Training runs: one directory per config, one log and checkpoint per seed.
//!
//! ```text
//! <out>/manifest.txt        resolved config plus `code.version`
//! <out>/seed_<n>.csv        learning curve
//! <out>/seed_<n>.ckpt       final parameters (`seed_<n>.abort.ckpt` on abort)
//! ```

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rtrl_core::agents::{train, Abort, Agent, TrainConfig, TrainOutcome};
use rtrl_core::augment::{RealTime, RtmdpConfig};
use rtrl_core::envs::{PointMassConfig, PointMassEnv};
use rtrl_core::mdp::Simulator;
use rtrl_core::rng::substream;
use thiserror::Error;

use crate::config::{EnvKind, ExperimentConfig, Wrap, VERSION_KEY};
use crate::format::write_checkpoint;
use crate::log::LogWriter;

pub const MANIFEST: &str = "manifest.txt";
/// Random streams of the training and evaluation environments of a seed.
pub const TRAIN_ENV_STREAM: u64 = 10;
pub const EVAL_ENV_STREAM: u64 = 11;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write to {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error("log {path}: {source}")]
    Log { path: PathBuf, source: csv::Error },
    #[error("cannot build agent: {0}")]
    Agent(rtrl_core::Error),
}

#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub log: PathBuf,
    pub result: Result<TrainOutcome, Abort>,
}

#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub seeds: Vec<SeedRun>,
}

impl RunReport {
    pub fn aborts(&self) -> impl Iterator<Item = (u64, &Abort)> {
        self.seeds
            .iter()
            .filter_map(|s| s.result.as_ref().err().map(|a| (s.seed, a)))
    }
}

pub fn manifest_text(cfg: &ExperimentConfig) -> String {
    format!(
        "{VERSION_KEY} = {}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    )
}

pub fn log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

fn output<T>(path: &Path, r: io::Result<T>) -> Result<T, RunError> {
    r.map_err(|source| RunError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Run every seed of `cfg`, at most `workers` at a time. Seeds are
/// independent, so the logs do not depend on `workers`.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<RunReport, RunError> {
    let dir = cfg.out.clone();
    output(&dir, fs::create_dir_all(&dir))?;
    let manifest = dir.join(MANIFEST);
    output(&manifest, fs::write(&manifest, manifest_text(cfg)))?;

    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::new());
    let failure = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, cfg.seeds.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = cfg.seeds.get(i) else { break };
                match run_seed(cfg, &dir, seed) {
                    Ok(r) => results.lock().unwrap().push((i, r)),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mut seeds = results.into_inner().unwrap();
    seeds.sort_by_key(|(i, _)| *i);
    Ok(RunReport {
        dir,
        seeds: seeds.into_iter().map(|(_, r)| r).collect(),
    })
}

fn run_seed(cfg: &ExperimentConfig, dir: &Path, seed: u64) -> Result<SeedRun, RunError> {
    let base = match cfg.env {
        EnvKind::PointMass => PointMassConfig::default(),
    };
    let point_mass = |stream| PointMassEnv::new(base.clone(), substream(seed, stream));
    match cfg.wrap {
        Wrap::Plain => run_with(
            cfg,
            dir,
            seed,
            point_mass(TRAIN_ENV_STREAM),
            point_mass(EVAL_ENV_STREAM),
        ),
        Wrap::Rtmdp => {
            let wrap = |env: PointMassEnv| {
                let zeros = RtmdpConfig::zeros(env.action_dim());
                RealTime::new(env, zeros)
            };
            run_with(
                cfg,
                dir,
                seed,
                wrap(point_mass(TRAIN_ENV_STREAM)),
                wrap(point_mass(EVAL_ENV_STREAM)),
            )
        }
    }
}

fn run_with<E: Simulator>(
    cfg: &ExperimentConfig,
    dir: &Path,
    seed: u64,
    mut env: E,
    mut eval_env: E,
) -> Result<SeedRun, RunError> {
    let mut agent = Agent::new(
        cfg.agent,
        env.observation_dim(),
        env.action_dim(),
        cfg.hp.clone(),
        seed,
    )
    .map_err(RunError::Agent)?;
    let train_cfg = TrainConfig {
        total_steps: cfg.total_steps,
        eval_interval: cfg.eval_interval,
        eval_episodes: cfg.eval_episodes,
    };
    let log = log_path(dir, seed);
    let file = output(&log, File::create(&log))?;
    let log_err = |source| RunError::Log {
        path: log.clone(),
        source,
    };
    let mut writer = LogWriter::new(BufWriter::new(file)).map_err(log_err)?;
    let start = Instant::now();
    let mut write_failure = None;
    let result = train(&mut agent, &mut env, &mut eval_env, &train_cfg, |r| {
        if write_failure.is_none() {
            write_failure = writer.write(r, start.elapsed().as_secs_f64()).err();
        }
    });
    if let Some(e) = write_failure {
        return Err(log_err(e));
    }
    let name = if result.is_ok() {
        format!("seed_{seed}.ckpt")
    } else {
        format!("seed_{seed}.abort.ckpt")
    };
    let ckpt = dir.join(name);
    let file = output(&ckpt, File::create(&ckpt))?;
    output(&ckpt, write_checkpoint(BufWriter::new(file), &agent.theta))?;
    Ok(SeedRun { seed, log, result })
}
