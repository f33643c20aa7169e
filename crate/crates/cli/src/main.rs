//! `shellsim`: rollouts, trajectory optimization, parameter design,
//! gradient checks and scene export from a TOML manifest.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shellsim::optimize::Method;

#[derive(Debug, Parser)]
#[command(name = "shellsim", version, about = "Differentiable thin-shell manipulation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML manifest with [task] and optional [optimizer], [rollout], [gradcheck] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seeds, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Episodes per seed (optimize) or iterations (identify).
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[arg(long, global = true)]
    pub method: Option<Method>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seeds run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Steps between exported OBJ frames.
    #[arg(long, global = true, default_value_t = 5)]
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Roll out a trajectory; write OBJ frames and rewards.csv.
    Rollout,
    /// Optimize a trajectory for every seed.
    Optimize,
    /// Gradient ascent on the parameters of an inverse-design task.
    Identify,
    /// Compare adjoint action gradients with finite differences.
    Gradcheck,
    /// Write the initial scene meshes and a scene summary.
    Export,
}

#[derive(Debug)]
pub enum CliError {
    Config { path: String, message: String },
    GradcheckFailed,
    Infeasible,
    Other(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

impl From<shellsim::SimError> for CliError {
    fn from(e: shellsim::SimError) -> Self {
        match e {
            shellsim::SimError::Config { path, message } => CliError::Config { path, message },
            shellsim::SimError::UnknownTask(t) => CliError::Config { path: "task.task".into(), message: format!("unknown task `{t}`") },
            other => CliError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = std::env::var("SHELLSIM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread cap not applied: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config { path, message }) => {
            eprintln!("config error at `{path}`: {message}");
            ExitCode::from(2)
        }
        Err(CliError::GradcheckFailed) => {
            eprintln!("gradient check failed");
            ExitCode::from(3)
        }
        Err(CliError::Infeasible) => {
            eprintln!("optimizer found no feasible rollout");
            ExitCode::from(4)
        }
        Err(CliError::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
