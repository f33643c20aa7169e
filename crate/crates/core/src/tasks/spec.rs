use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contact::MaterialClass;
use crate::dynamics::ParamId;
use crate::error::{Result, SimError};

/// The benchmark tasks: seven manipulation and three inverse-design scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TaskId {
    Lifting,
    Separating,
    Following,
    FoldingU,
    FoldingL,
    PickFolding,
    Forming,
    Sliding,
    Bouncing,
    Card,
}

impl TaskId {
    pub const ALL: [TaskId; 10] = [
        TaskId::Lifting,
        TaskId::Separating,
        TaskId::Following,
        TaskId::FoldingU,
        TaskId::FoldingL,
        TaskId::PickFolding,
        TaskId::Forming,
        TaskId::Sliding,
        TaskId::Bouncing,
        TaskId::Card,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TaskId::Lifting => "lifting",
            TaskId::Separating => "separating",
            TaskId::Following => "following",
            TaskId::FoldingU => "folding_u",
            TaskId::FoldingL => "folding_l",
            TaskId::PickFolding => "pick_folding",
            TaskId::Forming => "forming",
            TaskId::Sliding => "sliding",
            TaskId::Bouncing => "bouncing",
            TaskId::Card => "card",
        }
    }

    pub fn mode(&self) -> OptimizationMode {
        match self {
            TaskId::Sliding | TaskId::Bouncing | TaskId::Card => OptimizationMode::Parameters,
            _ => OptimizationMode::Trajectory,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = SimError;

    /// Case-insensitive; `-` and `_` are ignored, so `Folding-L`,
    /// `folding_l` and `FoldingL` all parse.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').flat_map(char::to_lowercase).collect();
        TaskId::ALL
            .into_iter()
            .find(|t| t.name().replace('_', "") == key)
            .ok_or_else(|| SimError::UnknownTask(s.to_string()))
    }
}

impl TryFrom<String> for TaskId {
    type Error = SimError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TaskId> for String {
    fn from(t: TaskId) -> String {
        t.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizationMode {
    Trajectory,
    Parameters,
}

/// One friction table entry in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionEntry {
    pub a: MaterialClass,
    pub b: MaterialClass,
    pub mu: f64,
}

/// Full description of a task instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task: TaskId,
    /// Vertices along the long side of the main sheet.
    pub resolution: usize,
    pub horizon: usize,
    /// Translation clamp per step (m).
    pub action_range: f64,
    pub friction: BTreeMap<(MaterialClass, MaterialClass), f64>,
    /// Task units, see `energy::BENDING_UNIT`.
    pub bending_stiffness: f64,
    /// Manipulator contact force beyond which a rollout is infeasible (N).
    pub force_limit: f64,
    /// Consecutive steps without manipulator-shell contact tolerated.
    pub contact_grace: usize,
    /// Seed of the Forming goal trajectory.
    pub goal_seed: u64,
    /// Length of the Forming goal trajectory.
    pub goal_steps: usize,
    /// Discount, carried for RL use; optimizers use undiscounted returns.
    pub gamma: f64,
    pub mode: OptimizationMode,
    /// Parameters optimized in parameter mode.
    pub params: Vec<ParamId>,
}

fn table(entries: &[(MaterialClass, MaterialClass, f64)]) -> BTreeMap<(MaterialClass, MaterialClass), f64> {
    entries.iter().map(|&(a, b, mu)| (if a <= b { (a, b) } else { (b, a) }, mu)).collect()
}

impl TaskSpec {
    /// Default parameters of `task`: friction, bending stiffness and action
    /// range per task; geometry at desk scale.
    pub fn new(task: TaskId) -> Self {
        use MaterialClass::{Cloth, Manipulator, Object, Table};
        let (friction, k_b, range, horizon, resolution) = match task {
            TaskId::Lifting => (table(&[(Cloth, Manipulator, 5.0), (Cloth, Object, 5.0)]), 100.0, 1e-3, 40, 10),
            TaskId::Separating | TaskId::Following => (
                table(&[(Object, Table, 0.0), (Cloth, Table, 0.2), (Cloth, Manipulator, 5.0), (Cloth, Object, 0.2)]),
                100.0,
                2e-3,
                40,
                10,
            ),
            TaskId::FoldingU | TaskId::FoldingL => {
                (table(&[(Cloth, Table, 5.0), (Cloth, Manipulator, 5.0)]), 400.0, 1e-3, 40, 12)
            }
            TaskId::PickFolding => (table(&[(Cloth, Table, 0.1), (Cloth, Manipulator, 5.0)]), 200.0, 1e-3, 60, 11),
            TaskId::Forming => (table(&[(Cloth, Table, 5.0), (Cloth, Manipulator, 5.0)]), 200.0, 1e-3, 30, 10),
            TaskId::Sliding => {
                (table(&[(Cloth, Table, 0.4), (Cloth, Manipulator, 1.0), (Cloth, Cloth, 0.1)]), 1000.0, 1e-3, 30, 8)
            }
            TaskId::Bouncing => (table(&[(Cloth, Table, 0.5)]), 100.0, 1e-3, 16, 12),
            TaskId::Card => (table(&[(Cloth, Table, 1.0), (Cloth, Manipulator, 1.0)]), 100.0, 1e-3, 40, 10),
        };
        let params = match task {
            TaskId::Sliding => vec![ParamId::Friction(Cloth, Cloth)],
            TaskId::Bouncing | TaskId::Card => vec![ParamId::BendingStiffness],
            _ => Vec::new(),
        };
        TaskSpec {
            task,
            resolution,
            horizon,
            action_range: range,
            friction,
            bending_stiffness: k_b,
            force_limit: 50.0,
            contact_grace: 5,
            goal_seed: 0,
            goal_steps: 20,
            gamma: 1.0,
            mode: task.mode(),
            params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |path: &str, message: String| Err(SimError::Config { path: path.into(), message });
        if !(8..=32).contains(&self.resolution) {
            return err("resolution", format!("{} outside the supported range 8..=32", self.resolution));
        }
        if self.horizon == 0 {
            return err("horizon", "must be positive".into());
        }
        if !(self.action_range > 0.0) {
            return err("action_range", format!("{} must be positive", self.action_range));
        }
        if !(self.bending_stiffness >= 0.0) {
            return err("bending_stiffness", format!("{} must be non-negative", self.bending_stiffness));
        }
        if !(self.force_limit > 0.0) {
            return err("force_limit", format!("{} must be positive", self.force_limit));
        }
        if let Some((k, mu)) = self.friction.iter().find(|(_, mu)| !(**mu >= 0.0)) {
            return err("friction", format!("{k:?} = {mu} must be non-negative"));
        }
        Ok(())
    }
}

/// Task section of a configuration file. Every field but `task` is an
/// optional override of the task defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task: Option<TaskId>,
    pub resolution: Option<usize>,
    pub horizon: Option<usize>,
    pub action_range: Option<f64>,
    pub bending_stiffness: Option<f64>,
    pub force_limit: Option<f64>,
    pub contact_grace: Option<usize>,
    pub goal_seed: Option<u64>,
    pub goal_steps: Option<usize>,
    pub gamma: Option<f64>,
    pub params: Option<Vec<ParamId>>,
    #[serde(default)]
    pub friction: Vec<FrictionEntry>,
}

impl TaskConfig {
    pub fn to_spec(&self) -> Result<TaskSpec> {
        let task = self.task.ok_or_else(|| SimError::Config { path: "task".into(), message: "missing task id".into() })?;
        let mut s = TaskSpec::new(task);
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        take!(resolution, horizon, action_range, bending_stiffness, force_limit, contact_grace, goal_seed, goal_steps, gamma);
        if let Some(p) = &self.params {
            s.params = p.clone();
        }
        for e in &self.friction {
            s.friction.insert(if e.a <= e.b { (e.a, e.b) } else { (e.b, e.a) }, e.mu);
        }
        s.validate()?;
        Ok(s)
    }
}

/// Parses a TOML document into a [`TaskConfig`]; unknown keys are rejected.
pub fn parse_task_config(text: &str) -> Result<TaskConfig> {
    toml::from_str(text).map_err(|e| SimError::Config {
        path: e.span().map(|r| format!("bytes {}..{}", r.start, r.end)).unwrap_or_default(),
        message: e.message().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in TaskId::ALL {
            assert_eq!(t.name().parse::<TaskId>().unwrap(), t);
        }
        assert_eq!("Folding-L".parse::<TaskId>().unwrap(), TaskId::FoldingL);
        assert!("Juggling".parse::<TaskId>().is_err());
    }

    #[test]
    fn config_overrides_and_rejects_unknown_keys() {
        let c = parse_task_config("task = \"folding_l\"\nhorizon = 7\n[[friction]]\na = \"table\"\nb = \"cloth\"\nmu = 1.5\n").unwrap();
        let s = c.to_spec().unwrap();
        assert_eq!(s.horizon, 7);
        assert_eq!(s.friction[&(MaterialClass::Cloth, MaterialClass::Table)], 1.5);
        assert!(parse_task_config("task = \"folding_l\"\nhorizn = 7\n").is_err());
        let bad = parse_task_config("task = \"folding_l\"\nresolution = 4\n").unwrap();
        assert!(matches!(bad.to_spec(), Err(SimError::Config { .. })));
    }
}
