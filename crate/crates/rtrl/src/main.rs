use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rtrl::config::ExperimentConfig;
use rtrl::{runner, summarize, verify};

const EXIT_USAGE: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;
const EXIT_ABORTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rtrl",
    version,
    about = "Real-time reinforcement learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config and write logs, checkpoints and a manifest.
    Run {
        /// Config or manifest file (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of environment steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds trained concurrently.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Run a verification suite (or `all`) and print a tab-separated report.
    Verify { suite: String },
    /// Compare run directories: table and plots.
    Summarize {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Where to write summary.txt and the plots.
        #[arg(long, default_value = "summary")]
        out: PathBuf,
    },
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    steps: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg =
        ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(steps) = steps {
        cfg.total_steps = steps;
    }
    if let Some(out) = out {
        cfg.out = out;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Run {
            config,
            seed,
            steps,
            out,
            workers,
        } => {
            let cfg = load_config(&config, seed, steps, out)?;
            let report = runner::run(&cfg, workers)?;
            let mut code = 0;
            for s in &report.seeds {
                match &s.result {
                    Ok(o) => {
                        let last = o.records.last().map_or(f64::NAN, |r| r.episode_return);
                        println!(
                            "seed {}: final return {last:.3}, {} gradient steps",
                            s.seed, o.gradient_steps
                        );
                    }
                    Err(abort) => {
                        eprintln!(
                            "seed {}: aborted at step {}: {}",
                            s.seed, abort.step, abort.cause
                        );
                        code = EXIT_ABORTED;
                    }
                }
            }
            println!("wrote {}", report.dir.display());
            Ok(code)
        }
        Command::Verify { suite } => {
            let reports = verify::verify(&suite)?;
            print!("{}", verify::report_tsv(&reports));
            Ok(if reports.iter().all(|r| r.passed()) {
                0
            } else {
                EXIT_VERIFY_FAILED
            })
        }
        Command::Summarize { dirs, out } => {
            let summary = summarize::summarize(&dirs)?;
            print!("{}", summarize::table(&summary));
            for path in summarize::write_outputs(&summary, &out)? {
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
