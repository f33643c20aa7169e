use serde::{Deserialize, Serialize};

use super::report::OptimizerReport;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Outcome of one evaluation inside [`adam_ascent`].
#[derive(Debug, Clone)]
pub struct AscentStep {
    /// Value logged in the report.
    pub reported: f64,
    pub feasible: bool,
    /// Ascent direction (gradient of the objective being maximized);
    /// ignored when infeasible.
    pub gradient: Vec<f64>,
}

/// Adam ascent with bias correction from `x0` for `iterations`
/// evaluations, each logged as one episode. `project` is applied after
/// every update. An infeasible iterate sends the search back to the best
/// point with half the learning rate. Returns the best point; if the very
/// first evaluation is infeasible it is returned unchanged with
/// `report.init_infeasible` set.
pub fn adam_ascent<F, P>(
    x0: Vec<f64>,
    iterations: usize,
    adam: &AdamParams,
    report: &mut OptimizerReport,
    mut eval: F,
    project: P,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<AscentStep>,
    P: Fn(&mut [f64]),
{
    let n = x0.len();
    let mut x = x0;
    let mut best = x.clone();
    let mut best_value = f64::NEG_INFINITY;
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut lr = adam.lr;
    let mut t = 0;
    for it in 0..iterations {
        let step = eval(&x)?;
        report.push(step.reported, step.feasible);
        if !step.feasible {
            if it == 0 {
                report.init_infeasible = true;
                return Ok(x);
            }
            x.clone_from(&best);
            lr *= 0.5;
            continue;
        }
        if step.reported > best_value {
            best_value = step.reported;
            best.clone_from(&x);
        }
        t += 1;
        let c1 = 1.0 - adam.beta1.powi(t);
        let c2 = 1.0 - adam.beta2.powi(t);
        for i in 0..n {
            let g = step.gradient[i];
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g;
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g * g;
            x[i] += lr * (m[i] / c1) / ((v[i] / c2).sqrt() + adam.eps);
        }
        project(&mut x);
    }
    Ok(best)
}
