//! Reverse-mode differentiation of a taped rollout: one adjoint solve per
//! step with the step's frozen contact set and yield decisions.

mod check;

use std::collections::BTreeMap;

use nalgebra::{Matrix3, SVector, Vector3};
use num_dual::Dual64;
use rayon::prelude::*;

use crate::contact::{friction_gradient, penalty_energy, ContactPair, MaterialClass};
use crate::dynamics::{
    fix_dofs, left_jacobian, solve_spd, solve_symmetric, EvalLevel, IncrementalPotential, ParamId, Scene, SceneEnergy,
    SparseSystem, StepRecord,
};
use crate::energy::{bend_hinge_gradient, neo_hookean_lame_derivs, tet_deformation_jacobian, BENDING_UNIT};
use crate::error::{Result, SimError};
use crate::geometry::prim::dihedral_gradient;

pub use check::{gradcheck, random_linear_loss, CoordCheck, GradcheckOptions, GradcheckReport};

fn vtx(x: &[f64], i: usize) -> Vector3<f64> {
    Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])
}

fn gather<const V: usize>(x: &[f64], v: &[usize; V]) -> [Vector3<f64>; V] {
    v.map(|i| vtx(x, i))
}

fn scatter<const N: usize>(out: &mut [f64], verts: &[usize], g: &SVector<f64, N>, w: f64) {
    for (a, &v) in verts.iter().enumerate() {
        for r in 0..3 {
            out[3 * v + r] += w * g[3 * a + r];
        }
    }
}

fn local<const N: usize>(z: &[f64], verts: &[usize]) -> SVector<f64, N> {
    SVector::from_fn(|i, _| z[3 * verts[i / 3] + i % 3])
}

/// Loss sensitivities fed to the backward pass.
#[derive(Debug, Clone, Default)]
pub struct LossGrads {
    /// `dL/dx^t` for `t = 0..=T`; an empty entry means zero.
    pub x: Vec<Vec<f64>>,
    /// `dL/dr^T` on the final rest angles; empty means zero.
    pub rest: Vec<f64>,
}

impl LossGrads {
    pub fn zeros(steps: usize) -> Self {
        LossGrads { x: vec![Vec::new(); steps + 1], rest: Vec::new() }
    }

    /// Only the final state is penalized.
    pub fn terminal(steps: usize, dx: Vec<f64>, drest: Vec<f64>) -> Self {
        let mut g = Self::zeros(steps);
        g.x[steps] = dx;
        g.rest = drest;
        g
    }
}

/// Output of [`backward_step`].
#[derive(Debug, Clone)]
pub struct StepAdjoint {
    /// Adjoint vector `z` (zero on fixed DOFs).
    pub z: Vec<f64>,
    /// Contribution to `dL/dx^t` (inertia target and lagged friction).
    pub dx_start: Vec<f64>,
    /// Contribution to `dL/dx^{t-1}`.
    pub dx_before: Vec<f64>,
    /// Total `dL/dx^{t+1}` on fixed DOFs (zero elsewhere).
    pub dx_fixed: Vec<f64>,
    /// `dL/dr^t` through the solve.
    pub drest: Vec<f64>,
    /// `dL/deta` for the requested parameters.
    pub dparams: Vec<f64>,
    /// The exact Hessian was not positive definite.
    pub indefinite: bool,
    /// Diagonal shifts applied before a solve succeeded.
    pub regularized: usize,
}

/// Rejects parameters the backward pass cannot differentiate.
pub fn check_params(params: &[ParamId]) -> Result<()> {
    for p in params {
        if *p == ParamId::YieldAngle {
            return Err(SimError::NonDifferentiable(
                p.to_string(),
                "the yield test is a discontinuous switch; rest angles jump when it flips".into(),
            ));
        }
    }
    Ok(())
}

fn same_classes(pair: &ContactPair, a: MaterialClass, b: MaterialClass) -> bool {
    (pair.classes.0 == a && pair.classes.1 == b) || (pair.classes.0 == b && pair.classes.1 == a)
}

/// `-z^T d(grad U)/d eta` for one parameter.
fn param_gradient(scene: &Scene, rec: &StepRecord, z: &[f64], id: ParamId) -> f64 {
    let x = &rec.x_end;
    let c = &scene.contact;
    let mut dgrad = vec![0.0; x.len()];
    match id {
        ParamId::BendingStiffness => {
            for k in 0..scene.num_hinges() {
                let b = scene.hinge_body(k);
                if scene.bodies[b].manipulator.is_some() {
                    continue;
                }
                let hv = scene.hinge_vertices(k);
                let h = &scene.hinges[k];
                let (_, g) = bend_hinge_gradient(&gather(x, &hv), rec.rest_angles[k], h.rest_len, h.rest_height, BENDING_UNIT);
                scatter(&mut dgrad, &hv, &g, 1.0);
            }
        }
        ParamId::Friction(a, b) => {
            for p in rec.pairs.iter().filter(|p| same_classes(p, a, b)) {
                let d = p.dofs();
                let (q, qp) = (gather(x, &d), gather(&rec.x_start, &d));
                let (_, g) = friction_gradient(&q, &qp, p.side, 1.0, c.k_r, c.eps_r, c.eps_v);
                scatter(&mut dgrad, &d, &g, 1.0);
            }
        }
        ParamId::PenaltyStiffness => {
            for p in &rec.pairs {
                let d = p.dofs();
                let (q, qp) = (gather(x, &d), gather(&rec.x_start, &d));
                let e = penalty_energy(&q, p.side, 1.0, c.eps_r);
                scatter(&mut dgrad, &d, &e.gradient, 1.0);
                if p.mu != 0.0 {
                    let (_, g) = friction_gradient(&q, &qp, p.side, p.mu, 1.0, c.eps_r, c.eps_v);
                    scatter(&mut dgrad, &d, &g, 1.0);
                }
            }
        }
        ParamId::LameMu | ParamId::LameLambda => {
            for t in &scene.tets {
                if scene.bodies[t.body].manipulator.is_some() {
                    continue;
                }
                let p = gather(x, &t.v);
                let ds = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
                let (dmu, dlam) = neo_hookean_lame_derivs(&(ds * t.dm_inv));
                let dp = if id == ParamId::LameMu { dmu } else { dlam };
                let g: SVector<f64, 12> = tet_deformation_jacobian(&t.dm_inv).transpose() * dp * t.volume;
                scatter(&mut dgrad, &t.v, &g, 1.0);
            }
        }
        ParamId::YieldAngle => unreachable!("rejected by check_params"),
    }
    -dgrad.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
}

/// `d(grad_x U_f)/d x_prev` for one pair, 12 x 12, by forward-mode duals.
fn friction_mixed_jacobian(pair: &ContactPair, x: &[f64], x_prev: &[f64], scene: &Scene) -> [[f64; 12]; 12] {
    let c = &scene.contact;
    let d = pair.dofs();
    let q: [Vector3<Dual64>; 4] = gather(x, &d).map(|v| v.map(Dual64::from));
    let qp = gather(x_prev, &d);
    let mut jac = [[0.0; 12]; 12];
    for col in 0..12 {
        let mut seeded = [Vector3::<Dual64>::zeros(); 4];
        for v in 0..4 {
            for r in 0..3 {
                let eps = if 3 * v + r == col { 1.0 } else { 0.0 };
                seeded[v][r] = Dual64::new(qp[v][r], eps);
            }
        }
        let (_, g) = friction_gradient(
            &q,
            &seeded,
            Dual64::from(pair.side),
            Dual64::from(pair.mu),
            Dual64::from(c.k_r),
            Dual64::from(c.eps_r),
            Dual64::from(c.eps_v),
        );
        for row in 0..12 {
            jac[row][col] = g[row].eps;
        }
    }
    jac
}

/// Implicit differentiation of one step with incoming `dL/dx^{t+1}`.
pub fn backward_step(scene: &Scene, rec: &StepRecord, incoming: &[f64], params: &[ParamId]) -> Result<StepAdjoint> {
    check_params(params)?;
    let n = scene.num_dofs();
    if incoming.len() != n || rec.x_end.len() != n {
        return Err(SimError::Dimension(format!("adjoint input has {} entries, scene has {n} DOFs", incoming.len())));
    }
    let fixed = &scene.dof_map.fixed;
    let h = scene.h;
    let mut out = StepAdjoint {
        z: vec![0.0; n],
        dx_start: vec![0.0; n],
        dx_before: vec![0.0; n],
        dx_fixed: vec![0.0; n],
        drest: vec![0.0; scene.num_hinges()],
        dparams: vec![0.0; params.len()],
        indefinite: false,
        regularized: 0,
    };
    if incoming.iter().all(|&g| g == 0.0) {
        return Ok(out);
    }

    let energy = SceneEnergy { scene, rest_angles: &rec.rest_angles, pairs: &rec.pairs, x_prev: &rec.x_start };
    let ip = IncrementalPotential { energy: &energy, mass: &scene.mass, y: &rec.x_end, h, fixed };
    let full = SparseSystem { n, triplets: ip.eval(&rec.x_end, EvalLevel::Hessian { projected: false }).hessian };
    let mut system = full.clone();
    let mut rhs = incoming.to_vec();
    fix_dofs(&mut system, &mut rhs, fixed);
    let z = match solve_spd(&system, &rhs) {
        Ok(z) => z,
        Err(_) => {
            out.indefinite = true;
            solve_regularized(&system, &rhs, scene, &mut out.regularized)?
        }
    };

    // fixed rows: direct sensitivity minus the coupling to the free solve
    let hz = full.mul(&z);
    for i in 0..n {
        if fixed[i] {
            out.dx_fixed[i] = incoming[i] - hz[i];
        } else {
            let w = scene.mass[i] / (h * h) * z[i];
            out.dx_start[i] += 2.0 * w;
            out.dx_before[i] -= w;
        }
    }

    let fric: Vec<([usize; 4], [[f64; 12]; 12])> = rec
        .pairs
        .par_iter()
        .filter(|p| p.mu != 0.0)
        .map(|p| (p.dofs(), friction_mixed_jacobian(p, &rec.x_end, &rec.x_start, scene)))
        .collect();
    for (d, jac) in fric {
        let zl: SVector<f64, 12> = local(&z, &d);
        for col in 0..12 {
            let s: f64 = (0..12).map(|row| jac[row][col] * zl[row]).sum();
            out.dx_start[3 * d[col / 3] + col % 3] -= s;
        }
    }

    // d(grad U_b)/d rest = -2 w grad(theta)
    for k in 0..scene.num_hinges() {
        let hv = scene.hinge_vertices(k);
        let hinge = &scene.hinges[k];
        let p = gather(&rec.x_end, &hv);
        let dt = dihedral_gradient(&p[0], &p[1], &p[2], &p[3]);
        if !dt.iter().all(|v| v.is_finite()) {
            continue;
        }
        let w = scene.bodies[hinge.body].material.bending_stiffness_si() * hinge.rest_len / hinge.rest_height;
        out.drest[k] = 2.0 * w * dt.dot(&local::<12>(&z, &hv));
    }

    for (j, &id) in params.iter().enumerate() {
        out.dparams[j] = param_gradient(scene, rec, &z, id);
    }
    out.z = z;
    Ok(out)
}

fn solve_regularized(system: &SparseSystem, rhs: &[f64], scene: &Scene, count: &mut usize) -> Result<Vec<f64>> {
    if let Ok(z) = solve_symmetric(system, rhs) {
        return Ok(z);
    }
    let diag_max = system.triplets.iter().filter(|t| t.0 == t.1).map(|t| t.2.abs()).fold(1.0, f64::max);
    let mut tau = scene.newton.regularization;
    for _ in 0..scene.newton.max_regularizations {
        let mut s = system.clone();
        for i in 0..s.n {
            s.push(i, i, tau * diag_max);
        }
        *count += 1;
        if let Ok(z) = solve_symmetric(&s, rhs) {
            log::warn!("adjoint system regularized with tau = {tau:e}");
            return Ok(z);
        }
        tau *= 10.0;
    }
    Err(SimError::LinearSolve)
}

/// Gradients of a loss over a whole rollout.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    /// `dL/d action` per step, same layout as the actions.
    pub actions: Vec<Vec<f64>>,
    pub params: BTreeMap<ParamId, f64>,
    /// `dL/dx^0` on free DOFs, initial velocity held fixed.
    pub initial: Vec<f64>,
    /// Steps whose exact Hessian was indefinite.
    pub indefinite_steps: usize,
    pub regularized: usize,
}

/// Runs the backward pass over `tape` for `loss`, returning action and
/// parameter gradients.
pub fn backward(scene: &Scene, tape: &[StepRecord], loss: &LossGrads, params: &[ParamId]) -> Result<Gradients> {
    check_params(params)?;
    let steps = tape.len();
    if loss.x.len() != steps + 1 {
        return Err(SimError::Dimension(format!("loss covers {} states, tape has {}", loss.x.len(), steps + 1)));
    }
    let n = scene.num_dofs();
    let nh = scene.num_hinges();
    let mut gx: Vec<Vec<f64>> =
        loss.x.iter().map(|g| if g.is_empty() { vec![0.0; n] } else { g.clone() }).collect();
    if gx.iter().any(|g| g.len() != n) {
        return Err(SimError::Dimension("loss gradient length differs from DOF count".into()));
    }
    let mut gr = if loss.rest.is_empty() { vec![0.0; nh] } else { loss.rest.clone() };
    if gr.len() != nh {
        return Err(SimError::Dimension("rest-angle gradient length differs from hinge count".into()));
    }
    let mut out = Gradients::default();
    let mut dparams = vec![0.0; params.len()];
    // per pose index s = 1..=T: (dc, world torque, dwidth) per manipulator
    let nm = scene.manipulators.len();
    let mut pose_grads = vec![vec![(Vector3::zeros(), Vector3::zeros(), 0.0); nm]; steps + 1];

    for t in (0..steps).rev() {
        let rec = &tape[t];
        let mut incoming = std::mem::take(&mut gx[t + 1]);
        let mut passed = vec![0.0; nh];
        for k in 0..nh {
            if rec.yielded[k] {
                if gr[k] != 0.0 {
                    let p = gather(&rec.x_end, &scene.hinge_vertices(k));
                    let dt = dihedral_gradient(&p[0], &p[1], &p[2], &p[3]);
                    scatter(&mut incoming, &scene.hinge_vertices(k), &dt, gr[k]);
                }
            } else {
                passed[k] = gr[k];
            }
        }
        let step = backward_step(scene, rec, &incoming, params)?;
        out.indefinite_steps += step.indefinite as usize;
        out.regularized += step.regularized;
        for (m, manip) in scene.manipulators.iter().enumerate() {
            let g: Vec<Vector3<f64>> = manip.attachments.iter().map(|a| vtx(&step.dx_fixed, a.vertex)).collect();
            pose_grads[t + 1][m] = manip.pose_gradient(&rec.poses[m], &g);
        }
        // x^{-1} = x^0 - h v^0 with v^0 held fixed
        let before = if t > 0 { t - 1 } else { 0 };
        for i in 0..n {
            gx[t][i] += step.dx_start[i];
            gx[before][i] += step.dx_before[i];
        }
        for k in 0..nh {
            gr[k] = passed[k] + step.drest[k];
        }
        for j in 0..params.len() {
            dparams[j] += step.dparams[j];
        }
    }

    // pose composition: c^s = c^0 + sum dc, R^s = exp(dw_{s-1}) ... exp(dw_0) R^0
    out.actions = tape.iter().map(|r| vec![0.0; r.action.len()]).collect();
    let mut off = 0;
    for (m, manip) in scene.manipulators.iter().enumerate() {
        let mut sum_c = Vector3::zeros();
        let mut sum_w = 0.0;
        let mut sum_body = Vector3::zeros();
        for t in (0..steps).rev() {
            let s = t + 1;
            let (gc, torque, gw) = pose_grads[s][m];
            let r_s = tape[t].poses[m].rotation;
            sum_c += gc;
            sum_w += gw;
            sum_body += r_s.inverse() * torque;
            let a = &tape[t].action[off..off + manip.dofs()];
            let dw = Vector3::new(a[3], a[4], a[5]);
            let grot = left_jacobian(&dw).transpose() * (r_s * sum_body);
            let dst = &mut out.actions[t][off..off + manip.dofs()];
            dst[..3].copy_from_slice(sum_c.as_slice());
            dst[3..6].copy_from_slice(grot.as_slice());
            if manip.dofs() == 7 {
                dst[6] = sum_w;
            }
        }
        off += manip.dofs();
    }
    out.params = params.iter().copied().zip(dparams).collect();
    out.initial = gx[0].iter().zip(&scene.dof_map.fixed).map(|(g, &f)| if f { 0.0 } else { *g }).collect();
    Ok(out)
}

/// Gradient of the loss with respect to each action entry.
pub fn trajectory_gradient(scene: &Scene, tape: &[StepRecord], loss: &LossGrads) -> Result<Vec<Vec<f64>>> {
    Ok(backward(scene, tape, loss, &[])?.actions)
}

/// Gradient of the loss with respect to material parameters, summed over steps.
pub fn parameter_gradient(
    scene: &Scene,
    tape: &[StepRecord],
    loss: &LossGrads,
    params: &[ParamId],
) -> Result<BTreeMap<ParamId, f64>> {
    Ok(backward(scene, tape, loss, params)?.params)
}
