use serde::{Deserialize, Serialize};

use super::linalg::{fix_dofs, solve_spd, SparseSystem};

/// What an energy evaluation has to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalLevel {
    Value,
    Gradient,
    /// Hessian triplets, per-element SPD projected or not.
    Hessian { projected: bool },
}

/// Assembled value, gradient (empty below `Gradient`) and Hessian triplets
/// (empty below `Hessian`).
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<(usize, usize, f64)>,
    /// Sum of per-element gradient 1-norms (from `Gradient` up). Rounding
    /// the coordinates perturbs the value by about this times `eps |x|`,
    /// which can far exceed `eps |value|` when large internal forces cancel.
    pub force_sum: f64,
}

/// A potential energy over the global coordinate vector.
pub trait Potential: Sync {
    fn eval(&self, x: &[f64], level: EvalLevel) -> Evaluation;
}

/// `g(x) = 1/(2h^2) |x - y|_M^2 + U(x)`, the inertia term restricted to free DOFs.
pub struct IncrementalPotential<'a, P: Potential> {
    pub energy: &'a P,
    pub mass: &'a [f64],
    pub y: &'a [f64],
    pub h: f64,
    pub fixed: &'a [bool],
}

impl<P: Potential> IncrementalPotential<'_, P> {
    pub fn eval(&self, x: &[f64], level: EvalLevel) -> Evaluation {
        let mut e = self.energy.eval(x, level);
        let ih2 = 1.0 / (self.h * self.h);
        for i in 0..x.len() {
            if self.fixed[i] {
                continue;
            }
            let d = x[i] - self.y[i];
            e.value += 0.5 * ih2 * self.mass[i] * d * d;
            if level != EvalLevel::Value {
                e.gradient[i] += ih2 * self.mass[i] * d;
                e.force_sum += (ih2 * self.mass[i] * d).abs();
            }
            if let EvalLevel::Hessian { .. } = level {
                e.hessian.push((i, i, ih2 * self.mass[i]));
            }
        }
        e
    }

    /// `max(1, |M (x - y) / h^2|_inf)` over free DOFs.
    pub fn residual_scale(&self, x: &[f64]) -> f64 {
        let ih2 = 1.0 / (self.h * self.h);
        (0..x.len())
            .filter(|&i| !self.fixed[i])
            .map(|i| (ih2 * self.mass[i] * (x[i] - self.y[i])).abs())
            .fold(1.0, f64::max)
    }

    /// Absolute rounding noise of `e.value` at `x`.
    pub fn value_noise(&self, x: &[f64], e: &Evaluation) -> f64 {
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        64.0 * f64::EPSILON * (e.value.abs() + e.force_sum * xmax).max(f64::MIN_POSITIVE)
    }

    fn free_norm(&self, g: &[f64]) -> f64 {
        g.iter().zip(self.fixed).filter(|(_, &f)| !f).map(|(v, _)| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonParams {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub min_step: f64,
    pub regularization: f64,
    pub max_regularizations: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            tolerance: 1e-8,
            max_iterations: 50,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 2f64.powi(-20),
            regularization: 1e-8,
            max_regularizations: 6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    /// Linear solves performed.
    pub iterations: usize,
    pub converged: bool,
    /// Final free-DOF gradient infinity norm.
    pub residual: f64,
    pub scale: f64,
    pub regularized: usize,
    /// True if some iteration could not find an acceptable step.
    pub stalled: bool,
    /// Objective value after each accepted iterate, starting with `x_init`.
    pub history: Vec<f64>,
    /// Largest rounding noise of the objective seen; `history` is monotone
    /// up to this.
    pub noise: f64,
}

/// Minimizes `ip` from `x_init` (fixed DOFs already at their targets).
pub fn newton_solve<P: Potential>(
    ip: &IncrementalPotential<'_, P>,
    x_init: Vec<f64>,
    params: &NewtonParams,
) -> (Vec<f64>, NewtonReport) {
    let n = x_init.len();
    let scale = ip.residual_scale(&x_init);
    let tol = params.tolerance * scale;
    let mut x = x_init;
    let mut report = NewtonReport { scale, ..Default::default() };
    let mut eval = ip.eval(&x, EvalLevel::Hessian { projected: false });
    report.history.push(eval.value);
    loop {
        let r = ip.free_norm(&eval.gradient);
        report.residual = r;
        if r <= tol {
            report.converged = true;
            break;
        }
        if report.iterations >= params.max_iterations {
            break;
        }
        // the exact Hessian keeps quadratic convergence whenever the whole
        // system is positive definite; element projection is the fallback
        let mut rhs: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
        let mut system = SparseSystem { n, triplets: std::mem::take(&mut eval.hessian) };
        fix_dofs(&mut system, &mut rhs, ip.fixed);
        let exact = solve_spd(&system, &rhs).ok();
        let dx = match exact {
            Some(dx) => Some(dx),
            None => {
                let mut projected = SparseSystem { n, triplets: ip.eval(&x, EvalLevel::Hessian { projected: true }).hessian };
                fix_dofs(&mut projected, &mut rhs, ip.fixed);
                solve_with_ladder(&mut projected, &rhs, params, &mut report)
            }
        };
        let Some(dx) = dx else {
            report.stalled = true;
            break;
        };
        report.iterations += 1;

        let slope: f64 = dx.iter().zip(&eval.gradient).map(|(d, g)| d * g).sum();
        let mut alpha = 1.0;
        let mut accepted = None;
        let g0 = eval.value;
        let roundoff = ip.value_noise(&x, &eval);
        report.noise = report.noise.max(roundoff);
        while alpha >= params.min_step {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
            let gv = ip.eval(&trial, EvalLevel::Value).value;
            if !gv.is_finite() {
                alpha *= params.backtrack;
                continue;
            }
            if gv <= g0 + params.armijo * alpha * slope {
                accepted = Some(trial);
                break;
            }
            // near the minimizer the predicted decrease drops below what g can
            // resolve; fall back to the curvature condition on the slope or a
            // clear drop of the residual
            if -slope * alpha <= roundoff && (gv - g0).abs() <= roundoff {
                let e = ip.eval(&trial, EvalLevel::Gradient);
                let s1: f64 = dx.iter().zip(&e.gradient).map(|(d, g)| d * g).sum();
                if s1.abs() <= 0.9 * slope.abs() || ip.free_norm(&e.gradient) <= 0.5 * r {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= params.backtrack;
        }
        let Some(next) = accepted else {
            report.stalled = true;
            eval = ip.eval(&x, EvalLevel::Gradient);
            report.residual = ip.free_norm(&eval.gradient);
            break;
        };
        x = next;
        eval = ip.eval(&x, EvalLevel::Hessian { projected: false });
        report.history.push(eval.value);
    }
    (x, report)
}

fn solve_with_ladder(
    system: &mut SparseSystem,
    rhs: &[f64],
    params: &NewtonParams,
    report: &mut NewtonReport,
) -> Option<Vec<f64>> {
    if let Ok(u) = solve_spd(system, rhs) {
        return Some(u);
    }
    let diag_max = system.triplets.iter().filter(|t| t.0 == t.1).map(|t| t.2.abs()).fold(1.0, f64::max);
    let mut tau = params.regularization;
    for _ in 0..params.max_regularizations {
        let mut s = system.clone();
        for i in 0..s.n {
            s.push(i, i, tau * diag_max);
        }
        report.regularized += 1;
        if let Ok(u) = solve_spd(&s, rhs) {
            log::debug!("newton system regularized with tau = {tau:e}");
            return Some(u);
        }
        tau *= 10.0;
    }
    log::warn!("newton step rejected: linear solve failed after regularization");
    None
}
