use serde::{Deserialize, Serialize};

use super::adam::{adam_ascent, AdamParams, AscentStep};
use super::report::OptimizerReport;
use crate::adjoint::{check_params, parameter_gradient, LossGrads};
use crate::dynamics::ParamId;
use crate::error::{Result, SimError};
use crate::tasks::{OptimizationMode, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamSettings {
    /// Adam settings on parameters divided by their initial magnitude.
    pub adam: AdamParams,
}

impl Default for ParamSettings {
    fn default() -> Self {
        ParamSettings { adam: AdamParams { lr: 0.05, ..AdamParams::default() } }
    }
}

#[derive(Debug, Clone)]
pub struct ParamResult {
    /// Best parameter values found.
    pub values: Vec<(ParamId, f64)>,
    /// Parameter values at each episode.
    pub history: Vec<Vec<f64>>,
    pub report: OptimizerReport,
}

/// Lower end of the admissible box of a parameter (friction may vanish,
/// stiffnesses stay positive).
fn lower_bound(id: ParamId, scale: f64) -> f64 {
    match id {
        ParamId::Friction(..) => 0.0,
        _ => 1e-6 * scale,
    }
}

/// Gradient ascent of the reward of the task's fixed trajectory with
/// respect to `params`, projected onto the admissible box.
pub fn optimize_parameters(task: &Task, params: &[ParamId], iterations: usize, settings: &ParamSettings) -> Result<ParamResult> {
    if task.spec.mode != OptimizationMode::Parameters {
        return Err(SimError::Config {
            path: "task".into(),
            message: format!("{} is not a parameter-design task", task.id()),
        });
    }
    check_params(params)?;
    let initial: Vec<f64> = params.iter().map(|&p| task.scene.param(p)).collect();
    let scales: Vec<f64> = initial.iter().map(|v| v.abs().max(1e-2)).collect();
    let trajectory = task.default_trajectory();
    let steps = task.spec.horizon;
    let mut report = OptimizerReport::new();
    let mut history = Vec::new();
    let values_of = |u: &[f64]| -> Vec<(ParamId, f64)> { params.iter().zip(u).zip(&scales).map(|((&p, v), s)| (p, v * s)).collect() };
    let u0: Vec<f64> = initial.iter().zip(&scales).map(|(v, s)| v / s).collect();
    let eval = |u: &[f64]| -> Result<AscentStep> {
        let values = values_of(u);
        history.push(values.iter().map(|v| v.1).collect());
        let t = task.with_params(&values)?;
        let res = t.rollout(&trajectory, true)?;
        if !res.feasible() {
            return Ok(AscentStep { reported: res.report.reported, feasible: false, gradient: Vec::new() });
        }
        let (dx, drest) = t.reward_gradient(res.state.x.as_slice(), &res.state.rest_angles);
        let g = parameter_gradient(&t.scene, &res.tape, &LossGrads::terminal(steps, dx, drest), params)?;
        let gradient = params.iter().zip(&scales).map(|(p, s)| g[p] * s).collect();
        Ok(AscentStep { reported: res.report.reported, feasible: true, gradient })
    };
    let project = |u: &mut [f64]| {
        for ((v, &p), s) in u.iter_mut().zip(params).zip(&scales) {
            *v = v.max(lower_bound(p, *s) / s);
        }
    };
    let best = adam_ascent(u0, iterations, &settings.adam, &mut report, eval, project)?;
    Ok(ParamResult { values: values_of(&best), history, report })
}
