//! Trajectory optimizers (Adam gradient ascent through the adjoint, CMA-ES
//! and the CMA-ES then GD hybrid) and gradient-based parameter design.

mod adam;
mod cmaes;
mod params;
mod report;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adam::{adam_ascent, AdamParams, AscentStep};
pub use cmaes::{cmaes_minimize, CmaEs};
pub use params::{optimize_parameters, ParamResult, ParamSettings};
pub use report::{EpisodeRecord, OptimizerReport};
pub use trajectory::{
    action_bounds, cmaes_optimize, evaluate, gd_optimize, hybrid_optimize, project, CmaSettings, GdSettings,
    TrajectoryResult,
};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gd,
    Cmaes,
    Hybrid,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Cmaes => "cmaes",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Method::Gd),
            "cmaes" | "cma-es" | "cma" => Ok(Method::Cmaes),
            "hybrid" => Ok(Method::Hybrid),
            _ => Err(SimError::Config { path: "method".into(), message: format!("unknown method `{s}` (gd, cmaes, hybrid)") }),
        }
    }
}

/// Share of the episode budget the hybrid spends in CMA-ES.
pub const HYBRID_CMA_SHARE: f64 = 0.8;
