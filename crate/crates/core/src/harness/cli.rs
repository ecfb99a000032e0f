use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use crate::envs::placement_strategy_returns;
use crate::error::{Error, Result};
use crate::learner::load_checkpoint;

use super::config::{particle_task, ExperimentConfig};
use super::log::RunLog;
use super::plot::{aggregate_and_plot, Series};
use super::run::{evaluate_checkpoint, run_dir, run_training};
use super::selftest;

#[derive(Debug, Parser)]
#[command(name = "marlx", about = "Multi-agent exploration lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train several seeds of one config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate run directories into CSV and SVG.
    Plot {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gradient, Sherman–Morrison, reward-table and mixer suites.
    Selftest,
}

/// `--out`, then `MARLX_OUT`, then the config.
fn output_root(flag: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("MARLX_OUT").map(PathBuf::from))
        .unwrap_or_else(|| config.out_dir.clone())
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs the CLI on explicit arguments (the first is the program name).
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(c) => match dispatch(c.command) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let dir = run_dir(&output_root(out, &cfg), &cfg, seed);
            let res = run_training(&cfg, seed, Some(&dir))?;
            println!(
                "seed {seed}: final eval return {:.3} ({} eval points) -> {}",
                res.log.final_return().unwrap_or(f64::NAN),
                res.log.records.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let (mean, std) = evaluate_checkpoint(&ckpt, episodes, seed)?;
            println!("mean {mean:.6} std {std:.6} over {episodes} episodes");
            Ok(())
        }
        Command::Sweep {
            config,
            seeds,
            parallel,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let seeds = seeds.unwrap_or_else(|| cfg.seeds.clone());
            let root = output_root(out, &cfg);
            let logs = sweep(&cfg, &seeds, parallel, &root)?;
            for log in logs {
                println!(
                    "seed {}: final eval return {:.3}",
                    log.seed,
                    log.final_return().unwrap_or(f64::NAN)
                );
            }
            Ok(())
        }
        Command::Plot { runs, out } => {
            let mut series = Vec::with_capacity(runs.len());
            let mut references = Vec::new();
            for dir in &runs {
                let (label, logs, cfg) = load_series(dir)?;
                if let Some(cfg) = cfg {
                    if let (Some(crate::envs::ParticleTask::Placement), crate::envs::EnvConfig::Particle(p)) =
                        (particle_task(&cfg.env), &cfg.env)
                    {
                        references = placement_strategy_returns(p);
                    }
                }
                series.push(Series { label, logs });
            }
            for p in aggregate_and_plot(&series, &references, &out)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Selftest => {
            let suites = selftest::run_all()?;
            let mut ok = true;
            for s in &suites {
                println!("{}: {}/{} passed", s.name, s.passed, s.total);
                ok &= s.ok();
            }
            if ok {
                Ok(())
            } else {
                Err(Error::Domain("selftest failures".into()))
            }
        }
    }
}

/// Runs `seeds` on up to `parallel` threads. Logs come back in seed order.
pub fn sweep(cfg: &ExperimentConfig, seeds: &[u64], parallel: usize, root: &Path) -> Result<Vec<RunLog>> {
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let mut check = cfg.clone();
    check.seeds = seeds.to_vec();
    check.validate()?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunLog>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..parallel.clamp(1, seeds.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= seeds.len() {
                    break;
                }
                let dir = run_dir(root, cfg, seeds[k]);
                let r = run_training(cfg, seeds[k], Some(&dir)).map(|r| r.log);
                results.lock().expect("sweep results lock")[k] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("sweep results lock")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect()
}

/// A run directory (`log.csv`) or a config directory of `seed_*` runs.
fn load_series(dir: &Path) -> Result<(String, Vec<RunLog>, Option<ExperimentConfig>)> {
    let label = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let read_cfg = |d: &Path| ExperimentConfig::load(&d.join("config.txt")).ok();
    if dir.join("log.csv").is_file() {
        let seed = read_cfg(dir).map_or(0, |c| c.seeds[0]);
        return Ok((label, vec![RunLog::load(&dir.join("log.csv"), seed)?], read_cfg(dir)));
    }
    let mut runs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("log.csv").is_file())
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(Error::Config(format!("{} holds no run logs", dir.display())));
    }
    let mut logs = Vec::with_capacity(runs.len());
    for (k, r) in runs.iter().enumerate() {
        let seed = read_cfg(r).map_or(k as u64, |c| c.seeds[0]);
        logs.push(RunLog::load(&r.join("log.csv"), seed)?);
    }
    let cfg = read_cfg(&runs[0]);
    Ok((label, logs, cfg))
}
