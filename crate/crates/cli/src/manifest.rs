use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use shellsim::optimize::{CmaSettings, GdSettings, Method, ParamSettings};
use shellsim::tasks::{TaskConfig, TaskSpec};

use crate::CliError;

/// Run manifest read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub task: TaskConfig,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub rollout: RolloutSection,
    #[serde(default)]
    pub gradcheck: GradcheckSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub method: Method,
    /// Episodes (rollouts) per seed.
    pub budget: usize,
    pub seeds: Vec<u64>,
    /// Ascent iterations of `identify`.
    pub iterations: usize,
    pub gd: GdSettings,
    pub cma: CmaSettings,
    pub params: ParamSettings,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            method: Method::Hybrid,
            budget: 200,
            seeds: vec![1],
            iterations: 20,
            gd: GdSettings::default(),
            cma: CmaSettings::default(),
            params: ParamSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutSection {
    /// Trajectory file, relative to the config file; the task default when absent.
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckSection {
    pub eps: f64,
    pub newton_tolerance: f64,
    /// Seed of the random linear loss.
    pub loss_seed: u64,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        GradcheckSection { eps: 1e-7, newton_tolerance: 1e-11, loss_seed: 0 }
    }
}

pub struct Loaded {
    pub manifest: Manifest,
    pub spec: TaskSpec,
    /// SHA-256 of the config text.
    pub hash: String,
    pub dir: PathBuf,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: message.into() }
}

pub fn parse(text: &str) -> Result<Manifest, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(path, e.into_inner().message().to_string())
    })
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
    let manifest = parse(&text)?;
    let spec = manifest.task.to_spec().map_err(|e| match e {
        shellsim::SimError::Config { path, message } => config_error(format!("task.{path}"), message),
        other => config_error("task", other.to_string()),
    })?;
    let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { manifest, spec, hash, dir })
}
