//! Experiment orchestration: configs, seeded runs, evaluation, plots and the CLI.

pub mod cli;
mod config;
mod log;
mod plot;
mod run;
pub mod selftest;

pub use config::{Algo, ExperimentConfig};
pub use log::{EvalRecord, RunLog};
pub use plot::{aggregate, aggregate_and_plot, aggregate_csv, render_svg, AggregatePoint, Series};
pub use run::{checkpoint_of, evaluate, evaluate_checkpoint, mean_std, run_dir, run_training, RunResult};
