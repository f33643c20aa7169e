//! Finite-difference audit of trajectory gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{trajectory_gradient, LossGrads};
use crate::dynamics::{ClampMode, Scene, Simulation, StepRecord};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    /// Central-difference step on each action entry.
    pub eps: f64,
    /// Newton tolerance used for every rollout of the check.
    pub newton_tolerance: f64,
    /// Action components checked (all when `None`).
    pub components: Option<&'static [usize]>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions { eps: 1e-7, newton_tolerance: 1e-11, components: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordCheck {
    pub step: usize,
    pub component: usize,
    pub analytic: f64,
    pub fd: f64,
    /// `None` when the perturbed rollouts changed the contact set or the
    /// yield decisions, or the entry sits at its clamp.
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct GradcheckReport {
    pub coords: Vec<CoordCheck>,
}

impl GradcheckReport {
    pub fn checked(&self) -> impl Iterator<Item = f64> + '_ {
        self.coords.iter().filter_map(|c| c.rel_err)
    }

    pub fn excluded(&self) -> usize {
        self.coords.iter().filter(|c| c.rel_err.is_none()).count()
    }

    pub fn excluded_fraction(&self) -> f64 {
        self.excluded() as f64 / self.coords.len().max(1) as f64
    }

    /// Share of checked coordinates with relative error below `tol`.
    pub fn fraction_below(&self, tol: f64) -> f64 {
        let n = self.checked().count();
        if n == 0 {
            return 0.0;
        }
        self.checked().filter(|e| *e < tol).count() as f64 / n as f64
    }

    pub fn max_rel_err(&self) -> f64 {
        self.checked().fold(0.0, f64::max)
    }

    /// 95% of checked coordinates below 1e-3, all below 1e-2, fewer than
    /// 10% excluded.
    pub fn passes(&self) -> bool {
        self.checked().count() > 0
            && self.fraction_below(1e-3) >= 0.95
            && self.max_rel_err() < 1e-2
            && self.excluded_fraction() < 0.1
    }
}

/// Random linear loss on the final positions (free DOFs) and rest angles.
pub fn random_linear_loss(scene: &Scene, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wx = (0..scene.num_dofs()).map(|i| if scene.dof_map.fixed[i] { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    let wr = (0..scene.num_hinges()).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    (wx, wr)
}

struct Run {
    loss: f64,
    structure: Vec<(Vec<(usize, usize, usize, i8)>, Vec<bool>)>,
    tape: Vec<StepRecord>,
}

fn run(scene: &Scene, actions: &[Vec<f64>], wx: &[f64], wr: &[f64]) -> Result<Run> {
    let mut sim = Simulation::new(scene);
    for a in actions {
        sim.step(a, ClampMode::Clamp)?;
    }
    let loss = wx.iter().zip(sim.state.x.iter()).map(|(w, x)| w * x).sum::<f64>()
        + wr.iter().zip(&sim.state.rest_angles).map(|(w, r)| w * r).sum::<f64>();
    let structure = sim
        .tape
        .iter()
        .map(|s| (s.pairs.iter().map(|p| (p.vertex, p.surface, p.triangle_index, p.side as i8)).collect(), s.yielded.clone()))
        .collect();
    Ok(Run { loss, structure, tape: sim.tape })
}

/// Compares the adjoint gradient of the loss `wx . x^T + wr . rest^T` with
/// central differences on every action entry. Relative errors use
/// `max(|analytic|, |fd|, 1e-6 max|analytic|)` as the denominator.
pub fn gradcheck(scene: &Scene, actions: &[Vec<f64>], wx: &[f64], wr: &[f64], opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let mut scene = scene.clone();
    scene.newton.tolerance = opts.newton_tolerance;
    let scene = &scene;
    let nominal = run(scene, actions, wx, wr)?;
    let grad = trajectory_gradient(scene, &nominal.tape, &LossGrads::terminal(actions.len(), wx.to_vec(), wr.to_vec()))?;
    let dofs = scene.action_dofs();
    let mut entries = Vec::new();
    for (t, a) in actions.iter().enumerate() {
        let mut off = 0;
        for &d in &dofs {
            for c in 0..d {
                if opts.components.is_none_or(|cs| cs.contains(&c)) {
                    entries.push((t, off + c, scene.limits.bound(c), a[off + c]));
                }
            }
            off += d;
        }
    }
    let scale = entries.iter().map(|&(t, i, _, _)| grad[t][i].abs()).fold(0.0, f64::max);
    let coords: Vec<CoordCheck> = entries
        .par_iter()
        .map(|&(t, i, bound, v)| -> Result<CoordCheck> {
            let analytic = grad[t][i];
            if v.abs() + opts.eps > bound {
                return Ok(CoordCheck { step: t, component: i, analytic, fd: f64::NAN, rel_err: None });
            }
            let mut p = actions.to_vec();
            p[t][i] = v + opts.eps;
            let up = run(scene, &p, wx, wr)?;
            p[t][i] = v - opts.eps;
            let dn = run(scene, &p, wx, wr)?;
            let fd = (up.loss - dn.loss) / (2.0 * opts.eps);
            let same = up.structure == nominal.structure && dn.structure == nominal.structure;
            let den = analytic.abs().max(fd.abs()).max(1e-6 * scale).max(f64::MIN_POSITIVE);
            let rel_err = same.then(|| (analytic - fd).abs() / den);
            Ok(CoordCheck { step: t, component: i, analytic, fd, rel_err })
        })
        .collect::<Result<_>>()?;
    Ok(GradcheckReport { coords })
}
