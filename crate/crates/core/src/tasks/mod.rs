//! Benchmark scenes, rewards, observations and rollouts.

mod build;
mod spec;

use nalgebra::Vector3;

use crate::contact::MaterialClass;
use crate::dynamics::{BodyKind, ClampMode, ParamId, Scene, Simulation, StepRecord};
use crate::error::{Result, SimError};
use crate::geometry::SceneState;

pub use spec::{parse_task_config, FrictionEntry, OptimizationMode, TaskConfig, TaskId, TaskSpec};

/// Upper bound on sampled observation points.
pub const MAX_SAMPLES: usize = 64;

/// Index sets a reward refers to, fixed when the scene is built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Roles {
    /// Vertices of the main (or bottom) sheet.
    pub sheet: Vec<usize>,
    pub block: Vec<usize>,
    /// Folding crease hinges above / below the height of the curve centre.
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
    /// Pick-Folding hinges on the central grid column.
    pub middle: Vec<usize>,
    /// Bouncing crease hinges with the sign of their initial fold.
    pub crease_hinges: Vec<(usize, f64)>,
    pub crease_points: Vec<usize>,
    pub goal_vertices: Vec<usize>,
    pub goal: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardReport {
    pub reward: f64,
    /// `-lg(-reward)` for the distance rewards, `reward` otherwise.
    pub reported: f64,
    pub terms: Vec<(&'static str, f64)>,
    pub feasible: bool,
}

/// Why a rollout was cut short.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasibility {
    /// No manipulator touched a shell for `contact_grace` consecutive steps.
    NoContact { step: usize },
    ExcessiveForce { step: usize },
}

#[derive(Debug, Clone)]
pub struct RolloutResult {
    /// Raw reward after every executed step.
    pub rewards: Vec<f64>,
    pub newton_iters: Vec<usize>,
    pub converged: Vec<bool>,
    pub report: RewardReport,
    pub infeasible: Option<Infeasibility>,
    /// More than 10% of the executed steps did not converge.
    pub unreliable: bool,
    pub clamped_steps: usize,
    pub tape: Vec<StepRecord>,
    pub state: SceneState,
}

impl RolloutResult {
    pub fn feasible(&self) -> bool {
        self.infeasible.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Task {
    pub spec: TaskSpec,
    pub scene: Scene,
    pub roles: Roles,
    /// Scripted actions of the inverse-design tasks.
    pub fixed_trajectory: Vec<Vec<f64>>,
    /// Orientation of a positive fold for the crease rewards.
    pub sign: f64,
    /// Best reward ignoring physical constraints, where it is known.
    pub oracle: Option<f64>,
    /// Reward assigned to infeasible rollouts.
    pub floor: f64,
    /// Observation sample vertices.
    pub samples: Vec<usize>,
}

fn log_reward(raw: f64) -> f64 {
    -(-raw).max(f64::MIN_POSITIVE).log10()
}

impl Task {
    pub fn new(spec: &TaskSpec) -> Result<Task> {
        build::build(spec)
    }

    pub fn from_id(task: TaskId) -> Result<Task> {
        Self::new(&TaskSpec::new(task))
    }

    fn assemble(
        spec: TaskSpec,
        scene: Scene,
        roles: Roles,
        fixed_trajectory: Vec<Vec<f64>>,
        sign: f64,
        oracle: Option<f64>,
    ) -> Task {
        let free: Vec<usize> = scene
            .bodies
            .iter()
            .filter(|b| b.manipulator.is_none() && !matches!(b.kind, BodyKind::Static { .. }))
            .flat_map(|b| b.first_vertex..b.first_vertex + b.num_vertices())
            .collect();
        let stride = free.len().div_ceil(MAX_SAMPLES).max(1);
        let samples = free.into_iter().step_by(stride).collect();
        let mut task = Task { spec, scene, roles, fixed_trajectory, sign, oracle, floor: 0.0, samples };
        let r0 = task.raw_reward(task.scene.initial.x.as_slice(), &task.scene.initial.rest_angles);
        let spread = [1.0, r0.abs(), oracle.unwrap_or(0.0).abs()].into_iter().fold(0.0, f64::max);
        task.floor = r0 - 2.0 * spread;
        task
    }

    pub fn id(&self) -> TaskId {
        self.spec.task
    }

    pub fn action_len(&self) -> usize {
        self.scene.action_len()
    }

    pub fn zero_trajectory(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.action_len()]; self.spec.horizon]
    }

    /// Trajectory used by rollouts without an explicit one.
    pub fn default_trajectory(&self) -> Vec<Vec<f64>> {
        if self.fixed_trajectory.is_empty() {
            self.zero_trajectory()
        } else {
            self.fixed_trajectory.clone()
        }
    }

    /// Copy with scene parameters replaced.
    pub fn with_params(&self, values: &[(ParamId, f64)]) -> Result<Task> {
        let mut t = self.clone();
        for &(id, v) in values {
            t.scene.set_param(id, v)?;
        }
        Ok(t)
    }

    fn coord(x: &[f64], v: usize, axis: usize) -> f64 {
        x[3 * v + axis]
    }

    fn sum_axis(x: &[f64], set: &[usize], axis: usize) -> f64 {
        set.iter().map(|&v| Self::coord(x, v, axis)).sum()
    }

    fn terms(&self, x: &[f64], rest: &[f64]) -> Vec<(&'static str, f64)> {
        let r = &self.roles;
        let hinge_sum = |set: &[usize]| set.iter().map(|&k| rest[k]).sum::<f64>() * self.sign;
        let goal_dist = || {
            r.goal_vertices
                .iter()
                .zip(&r.goal)
                .map(|(&v, g)| (Vector3::new(x[3 * v], x[3 * v + 1], x[3 * v + 2]) - g).norm_squared())
                .sum::<f64>()
        };
        match self.spec.task {
            TaskId::Lifting | TaskId::Forming => vec![("squared_distance", -goal_dist())],
            TaskId::Separating => {
                let ratio = r.block.len() as f64 / r.sheet.len() as f64;
                vec![("block_x", Self::sum_axis(x, &r.block, 0)), ("paper_x", -ratio * Self::sum_axis(x, &r.sheet, 0))]
            }
            TaskId::Following => vec![("block_mean_x", -Self::sum_axis(x, &r.block, 0) / r.block.len() as f64)],
            TaskId::FoldingU => vec![("upper", hinge_sum(&r.upper)), ("lower", -hinge_sum(&r.lower))],
            TaskId::FoldingL => vec![("lower", hinge_sum(&r.lower)), ("upper", -hinge_sum(&r.upper))],
            TaskId::PickFolding => vec![("middle", hinge_sum(&r.middle))],
            TaskId::Sliding => vec![("bottom_x", -Self::sum_axis(x, &r.sheet, 0))],
            TaskId::Bouncing => vec![("crease_z", Self::sum_axis(x, &r.crease_points, 2))],
            TaskId::Card => vec![("card_x", -Self::sum_axis(x, &r.sheet, 0))],
        }
    }

    /// Reward of positions `x` and rest angles `rest`, before any transform.
    pub fn raw_reward(&self, x: &[f64], rest: &[f64]) -> f64 {
        self.terms(x, rest).iter().map(|t| t.1).sum()
    }

    pub fn reward(&self, state: &SceneState) -> RewardReport {
        let terms = self.terms(state.x.as_slice(), &state.rest_angles);
        let reward = terms.iter().map(|t| t.1).sum();
        RewardReport { reward, reported: self.reported(reward), terms, feasible: true }
    }

    /// Report for an infeasible rollout.
    pub fn floor_report(&self) -> RewardReport {
        RewardReport { reward: self.floor, reported: self.reported(self.floor), terms: Vec::new(), feasible: false }
    }

    pub fn reported(&self, raw: f64) -> f64 {
        match self.spec.task {
            TaskId::Lifting | TaskId::Forming => log_reward(raw),
            _ => raw,
        }
    }

    /// Gradient of [`Task::raw_reward`] with respect to positions and rest angles.
    pub fn reward_gradient(&self, x: &[f64], rest: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut gx = vec![0.0; x.len()];
        let mut gr = vec![0.0; rest.len()];
        let r = &self.roles;
        let axis = |set: &[usize], a: usize, w: f64, gx: &mut Vec<f64>| {
            for &v in set {
                gx[3 * v + a] += w;
            }
        };
        match self.spec.task {
            TaskId::Lifting | TaskId::Forming => {
                for (&v, g) in r.goal_vertices.iter().zip(&r.goal) {
                    for a in 0..3 {
                        gx[3 * v + a] -= 2.0 * (x[3 * v + a] - g[a]);
                    }
                }
            }
            TaskId::Separating => {
                axis(&r.block, 0, 1.0, &mut gx);
                axis(&r.sheet, 0, -(r.block.len() as f64) / r.sheet.len() as f64, &mut gx);
            }
            TaskId::Following => axis(&r.block, 0, -1.0 / r.block.len() as f64, &mut gx),
            TaskId::FoldingU | TaskId::FoldingL => {
                let (plus, minus) = if self.spec.task == TaskId::FoldingU { (&r.upper, &r.lower) } else { (&r.lower, &r.upper) };
                for &k in plus {
                    gr[k] += self.sign;
                }
                for &k in minus {
                    gr[k] -= self.sign;
                }
            }
            TaskId::PickFolding => {
                for &k in &r.middle {
                    gr[k] += self.sign;
                }
            }
            TaskId::Sliding | TaskId::Card => axis(&r.sheet, 0, -1.0, &mut gx),
            TaskId::Bouncing => axis(&r.crease_points, 2, 1.0, &mut gx),
        }
        (gx, gr)
    }

    /// Sampled positions and velocities followed by the manipulator poses.
    pub fn observe(&self, state: &SceneState) -> Vec<f64> {
        let mut out = Vec::with_capacity(6 * self.samples.len() + state.manipulator_poses.len());
        for &v in &self.samples {
            out.extend_from_slice(&state.x.as_slice()[3 * v..3 * v + 3]);
            out.extend_from_slice(&state.v.as_slice()[3 * v..3 * v + 3]);
        }
        out.extend_from_slice(&state.manipulator_poses);
        out
    }

    /// Steps `trajectory` from the initial state. Infeasible rollouts stop at
    /// the offending step and report the floor reward.
    pub fn rollout(&self, trajectory: &[Vec<f64>], record: bool) -> Result<RolloutResult> {
        self.rollout_observed(trajectory, record, |_, _| {})
    }

    /// [`Task::rollout`] calling `observe(step, state)` after every step.
    pub fn rollout_observed<F>(&self, trajectory: &[Vec<f64>], record: bool, mut observe: F) -> Result<RolloutResult>
    where
        F: FnMut(usize, &SceneState),
    {
        if trajectory.len() != self.spec.horizon {
            return Err(SimError::Dimension(format!(
                "trajectory has {} steps, task horizon is {}",
                trajectory.len(),
                self.spec.horizon
            )));
        }
        let mut sim = Simulation::new(&self.scene);
        sim.record = record;
        let mut rewards = Vec::with_capacity(trajectory.len());
        let mut newton_iters = Vec::with_capacity(trajectory.len());
        let mut converged = Vec::with_capacity(trajectory.len());
        let mut infeasible = None;
        let mut clamped_steps = 0;
        let mut no_contact = 0;
        let watch_contact = self.spec.mode == OptimizationMode::Trajectory && !self.scene.manipulators.is_empty();
        for (t, action) in trajectory.iter().enumerate() {
            let res = sim.step(action, ClampMode::Clamp)?;
            clamped_steps += usize::from(res.clamped);
            newton_iters.push(res.newton.iterations);
            converged.push(res.newton.converged);
            rewards.push(self.raw_reward(sim.state.x.as_slice(), &sim.state.rest_angles));
            observe(t, &sim.state);
            if res.manipulator_force > self.spec.force_limit {
                infeasible = Some(Infeasibility::ExcessiveForce { step: t });
                break;
            }
            if watch_contact {
                let touching = sim
                    .pairs
                    .iter()
                    .any(|p| p.manipulator && (p.classes.0 == MaterialClass::Cloth || p.classes.1 == MaterialClass::Cloth));
                no_contact = if touching { 0 } else { no_contact + 1 };
                if no_contact >= self.spec.contact_grace {
                    infeasible = Some(Infeasibility::NoContact { step: t });
                    break;
                }
            }
        }
        let failed = converged.iter().filter(|c| !**c).count();
        let unreliable = 10 * failed > converged.len();
        if unreliable {
            log::warn!("{}: {failed} of {} steps did not converge", self.id(), converged.len());
        }
        let report = if infeasible.is_some() { self.floor_report() } else { self.reward(&sim.state) };
        Ok(RolloutResult {
            rewards,
            newton_iters,
            converged,
            report,
            infeasible,
            unreliable,
            clamped_steps,
            tape: std::mem::take(&mut sim.tape),
            state: sim.state,
        })
    }
}
