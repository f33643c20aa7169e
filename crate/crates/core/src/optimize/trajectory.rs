use serde::{Deserialize, Serialize};

use super::adam::{adam_ascent, AdamParams, AscentStep};
use super::cmaes::CmaEs;
use super::report::OptimizerReport;
use super::HYBRID_CMA_SHARE;
use crate::adjoint::{trajectory_gradient, LossGrads};
use crate::dynamics::Scene;
use crate::error::{Result, SimError};
use crate::tasks::Task;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GdSettings {
    pub adam: AdamParams,
    /// Weight of the mean squared clamp excess of normalized actions.
    pub penalty: f64,
}

impl Default for GdSettings {
    fn default() -> Self {
        GdSettings { adam: AdamParams::default(), penalty: 1e2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmaSettings {
    pub population: usize,
    /// Initial step size in search units.
    pub sigma: f64,
    /// Translation per search unit (m); rotation and width components scale
    /// with their clamp relative to the translation clamp.
    pub unit: f64,
}

impl Default for CmaSettings {
    fn default() -> Self {
        CmaSettings { population: 40, sigma: 1.0, unit: 3e-4 }
    }
}

/// Best trajectory found and the per-episode log.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub trajectory: Vec<Vec<f64>>,
    pub report: OptimizerReport,
}

/// Clamp bound of each entry of one action vector.
pub fn action_bounds(scene: &Scene) -> Vec<f64> {
    scene.action_dofs().iter().flat_map(|&d| (0..d).map(|c| scene.limits.bound(c))).collect()
}

/// Clamps every entry into its bound; non-finite entries become zero.
pub fn project(trajectory: &mut [Vec<f64>], bounds: &[f64]) {
    for a in trajectory {
        for (v, &b) in a.iter_mut().zip(bounds) {
            *v = if v.is_finite() { v.clamp(-b, b) } else { 0.0 };
        }
    }
}

/// Reported reward of `trajectory` and its feasibility. A failed rollout
/// counts as infeasible.
pub fn evaluate(task: &Task, trajectory: &[Vec<f64>]) -> (f64, bool) {
    match task.rollout(trajectory, false) {
        Ok(r) => (r.report.reported, r.feasible()),
        Err(e) => {
            log::warn!("{}: rollout failed: {e}", task.id());
            (task.floor_report().reported, false)
        }
    }
}

fn unflatten(v: &[f64], width: usize) -> Vec<Vec<f64>> {
    v.chunks(width.max(1)).map(<[f64]>::to_vec).collect()
}

fn check_shape(task: &Task, t: &[Vec<f64>]) -> Result<()> {
    if t.len() != task.spec.horizon || t.iter().any(|a| a.len() != task.action_len()) {
        return Err(SimError::Dimension(format!(
            "trajectory must be {} x {}",
            task.spec.horizon,
            task.action_len()
        )));
    }
    Ok(())
}

/// Adam ascent on the reward through the adjoint. Actions are optimized in
/// units of their clamp; the loss is `-reward` plus `penalty` times the
/// mean squared excess beyond the clamp. One iteration is one episode.
pub fn gd_optimize(task: &Task, init: &[Vec<f64>], iterations: usize, settings: &GdSettings) -> Result<TrajectoryResult> {
    check_shape(task, init)?;
    let bounds = action_bounds(&task.scene);
    let width = bounds.len();
    let steps = task.spec.horizon;
    let u0: Vec<f64> = init.iter().flat_map(|a| a.iter().zip(&bounds).map(|(v, b)| v / b)).collect();
    let mut report = OptimizerReport::new();
    let to_actions = |u: &[f64]| -> Vec<Vec<f64>> {
        unflatten(&u.iter().enumerate().map(|(i, v)| v * bounds[i % width.max(1)]).collect::<Vec<_>>(), width)
    };
    let count = u0.len().max(1) as f64;
    let eval = |u: &[f64]| -> Result<AscentStep> {
        let res = task.rollout(&to_actions(u), true)?;
        if !res.feasible() {
            return Ok(AscentStep { reported: res.report.reported, feasible: false, gradient: Vec::new() });
        }
        let (dx, drest) = task.reward_gradient(res.state.x.as_slice(), &res.state.rest_angles);
        // loss = -reward, so the reward gradient is the ascent direction
        let ga = trajectory_gradient(&task.scene, &res.tape, &LossGrads::terminal(steps, dx, drest))?;
        let gradient = u
            .iter()
            .enumerate()
            .map(|(i, &ui)| {
                let inside = if ui.abs() <= 1.0 { ga[i / width][i % width] * bounds[i % width] } else { 0.0 };
                let excess = (ui.abs() - 1.0).max(0.0);
                inside - settings.penalty * 2.0 * excess * ui.signum() / count
            })
            .collect();
        Ok(AscentStep { reported: res.report.reported, feasible: true, gradient })
    };
    let best = adam_ascent(u0, iterations, &settings.adam, &mut report, eval, |_| {})?;
    let mut trajectory = to_actions(&best);
    project(&mut trajectory, &bounds);
    Ok(TrajectoryResult { trajectory, report })
}

/// CMA-ES over whole trajectories from the zero trajectory. Candidates are
/// scaled by the search unit and hard-clamped; infeasible rollouts stop at
/// the offending step and score the floor reward.
pub fn cmaes_optimize(task: &Task, episodes: usize, settings: &CmaSettings, seed: u64) -> Result<TrajectoryResult> {
    let bounds = action_bounds(&task.scene);
    let width = bounds.len();
    if width == 0 {
        return Err(SimError::Dimension(format!("{} has no actions to optimize", task.id())));
    }
    let scale: Vec<f64> = bounds.iter().map(|b| settings.unit * b / task.scene.limits.translation).collect();
    let to_actions = |z: &[f64]| -> Vec<Vec<f64>> {
        let mut t = unflatten(&z.iter().enumerate().map(|(i, v)| v * scale[i % width]).collect::<Vec<_>>(), width);
        project(&mut t, &bounds);
        t
    };
    let dim = width * task.spec.horizon;
    let mut es = CmaEs::new(vec![0.0; dim], settings.sigma, settings.population, seed);
    let mut report = OptimizerReport::new();
    let mut best: (Vec<f64>, f64) = (vec![0.0; dim], f64::NEG_INFINITY);
    while report.evaluations() < episodes {
        let mut cands = es.ask();
        let room = episodes - report.evaluations();
        let partial = room < cands.len();
        cands.truncate(room);
        let scored: Vec<(f64, bool)> = cands.par_iter().map(|z| evaluate(task, &to_actions(z))).collect();
        for (z, &(r, ok)) in cands.iter().zip(&scored) {
            report.push(r, ok);
            if r > best.1 {
                best = (z.clone(), r);
            }
        }
        if !partial {
            es.tell(&scored.iter().map(|s| -s.0).collect::<Vec<_>>());
        }
    }
    if es.repairs > 0 {
        log::warn!("{}: {} covariance repairs", task.id(), es.repairs);
    }
    Ok(TrajectoryResult { trajectory: to_actions(&best.0), report })
}

/// CMA-ES for the first 80% of `episodes`, then GD from its best candidate
/// for the rest; the two logs are concatenated.
pub fn hybrid_optimize(
    task: &Task,
    episodes: usize,
    cma: &CmaSettings,
    gd: &GdSettings,
    seed: u64,
) -> Result<TrajectoryResult> {
    if episodes < 50 {
        return Err(SimError::Config { path: "budget".into(), message: format!("hybrid needs at least 50 episodes, got {episodes}") });
    }
    let n_cma = (HYBRID_CMA_SHARE * episodes as f64).round() as usize;
    let first = cmaes_optimize(task, n_cma, cma, seed)?;
    let second = gd_optimize(task, &first.trajectory, episodes - n_cma, gd)?;
    let mut report = first.report;
    report.append(&second.report);
    let trajectory = if second.report.best() >= report.episodes[..n_cma].last().map_or(f64::NEG_INFINITY, |e| e.prefix_max) {
        second.trajectory
    } else {
        first.trajectory
    };
    Ok(TrajectoryResult { trajectory, report })
}
