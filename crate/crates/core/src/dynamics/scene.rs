use nalgebra::{Matrix3, SVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manipulator::{ActionLimits, Manipulator, ManipulatorKind, Pose};
use super::newton::{EvalLevel, Evaluation, NewtonParams, Potential};
use crate::contact::{
    friction_energy, friction_gradient, penalty_energy, ContactPair, ContactParams, ContactSurface, MaterialClass,
    SurfaceKind,
};
use crate::energy::{bend_hinge, bend_hinge_gradient, stretch_area, stretch_edge, tet_energy, EnergyEval, MaterialParams};
use crate::error::{Result, SimError};
use crate::geometry::prim::dihedral_angle;
use crate::geometry::{lumped_mass, DofMap, MassSource, ObjectRange, SceneState, TetMesh, TriShellMesh};

#[derive(Debug, Clone)]
pub enum BodyKind {
    Shell(TriShellMesh<f64>),
    Solid(TetMesh<f64>),
    /// Kinematic obstacle; all its vertices are fixed.
    Static { vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]> },
}

#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    pub kind: BodyKind,
    pub material: MaterialParams,
    pub class: MaterialClass,
    pub first_vertex: usize,
    /// Offset of this body's hinges in the global hinge list.
    pub first_hinge: usize,
    /// Manipulator whose pad this body is.
    pub manipulator: Option<usize>,
}

impl Body {
    pub fn num_vertices(&self) -> usize {
        match &self.kind {
            BodyKind::Shell(m) => m.num_vertices(),
            BodyKind::Solid(m) => m.num_vertices(),
            BodyKind::Static { vertices, .. } => vertices.len(),
        }
    }

    pub fn num_hinges(&self) -> usize {
        match &self.kind {
            BodyKind::Shell(m) => m.hinges.len(),
            _ => 0,
        }
    }

    /// Boundary triangles in local vertex indices.
    pub fn surface_triangles(&self) -> &[[usize; 3]] {
        match &self.kind {
            BodyKind::Shell(m) => &m.triangles,
            BodyKind::Solid(m) => &m.surface,
            BodyKind::Static { triangles, .. } => triangles,
        }
    }

    fn rest_vertices(&self) -> &[Vector3<f64>] {
        match &self.kind {
            BodyKind::Shell(m) => &m.vertices,
            BodyKind::Solid(m) => &m.vertices,
            BodyKind::Static { vertices, .. } => vertices,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct EdgeElem {
    pub v: [usize; 2],
    pub rest: f64,
    pub body: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct TriElem {
    pub v: [usize; 3],
    pub rest: f64,
    pub body: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct HingeElem {
    pub v: [usize; 4],
    pub rest_len: f64,
    pub rest_height: f64,
    pub body: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct TetElem {
    pub v: [usize; 4],
    pub dm_inv: Matrix3<f64>,
    pub volume: f64,
    pub body: usize,
}

/// Differentiable scalar parameters of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamId {
    /// `K_b` (task units) of every non-pad shell.
    BendingStiffness,
    /// Friction coefficient between two material classes.
    Friction(MaterialClass, MaterialClass),
    /// Penalty stiffness `k_r`.
    PenaltyStiffness,
    /// Lame `mu` of every non-pad solid.
    LameMu,
    /// Lame `lambda` of every non-pad solid.
    LameLambda,
    /// Plastic yield angle of every shell; not differentiable.
    YieldAngle,
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamId::Friction(a, b) => write!(f, "friction({a:?}/{b:?})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Immutable scene description: bodies, manipulators, DOF layout, masses
/// and global element lists.
#[derive(Debug, Clone)]
pub struct Scene {
    pub bodies: Vec<Body>,
    pub manipulators: Vec<Manipulator>,
    pub dof_map: DofMap,
    /// Lumped mass per scalar DOF.
    pub mass: Vec<f64>,
    pub surfaces: Vec<ContactSurface>,
    pub contact: ContactParams,
    pub h: f64,
    pub gravity: Vector3<f64>,
    pub newton: NewtonParams,
    pub limits: ActionLimits,
    pub initial: SceneState,
    pub(crate) edges: Vec<EdgeElem>,
    pub(crate) triangles: Vec<TriElem>,
    pub(crate) hinges: Vec<HingeElem>,
    pub(crate) tets: Vec<TetElem>,
}

pub(crate) fn vtx(x: &[f64], i: usize) -> Vector3<f64> {
    Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])
}

fn gather<const V: usize>(x: &[f64], v: &[usize; V]) -> [Vector3<f64>; V] {
    v.map(|i| vtx(x, i))
}

/// Evaluates `count` elements in parallel, then adds them to `out` in
/// element order.
fn assemble<const V: usize, const N: usize, F>(count: usize, level: EvalLevel, out: &mut Evaluation, f: F)
where
    F: Fn(usize) -> Option<([usize; V], EnergyEval<f64, N>)> + Sync,
{
    let projected = matches!(level, EvalLevel::Hessian { projected: true });
    let evals: Vec<_> = (0..count)
        .into_par_iter()
        .map(|e| {
            f(e).map(|(v, ev)| if projected && !ev.degenerate { (v, ev.project()) } else { (v, ev) })
        })
        .collect();
    for (v, ev) in evals.into_iter().flatten() {
        out.value += ev.value;
        if level == EvalLevel::Value {
            continue;
        }
        out.force_sum += ev.gradient.iter().map(|g| g.abs()).sum::<f64>();
        for (a, &va) in v.iter().enumerate() {
            for r in 0..3 {
                out.gradient[3 * va + r] += ev.gradient[3 * a + r];
            }
        }
        if let EvalLevel::Hessian { .. } = level {
            for (a, &va) in v.iter().enumerate() {
                for (b, &vb) in v.iter().enumerate() {
                    for r in 0..3 {
                        for c in 0..3 {
                            let h = ev.hessian[(3 * a + r, 3 * b + c)];
                            if h != 0.0 {
                                out.hessian.push((3 * va + r, 3 * vb + c, h));
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient-only evaluation of value/gradient kernels.
fn grad_only<const N: usize>(value: f64, gradient: SVector<f64, N>) -> EnergyEval<f64, N> {
    EnergyEval { value, gradient, ..EnergyEval::zero() }
}

/// Total internal and contact energy of a scene for fixed rest angles,
/// contact pairs and lagged friction state `x_prev`.
pub struct SceneEnergy<'a> {
    pub scene: &'a Scene,
    pub rest_angles: &'a [f64],
    pub pairs: &'a [ContactPair],
    pub x_prev: &'a [f64],
}

impl Potential for SceneEnergy<'_> {
    fn eval(&self, x: &[f64], level: EvalLevel) -> Evaluation {
        let s = self.scene;
        let mut out = Evaluation {
            gradient: if level == EvalLevel::Value { Vec::new() } else { vec![0.0; x.len()] },
            ..Default::default()
        };
        let want_hess = matches!(level, EvalLevel::Hessian { .. });
        assemble(s.edges.len(), level, &mut out, |e| {
            let el = &s.edges[e];
            let k = s.bodies[el.body].material.k_e;
            let p = gather(x, &el.v);
            Some((el.v, stretch_edge(&p[0], &p[1], el.rest, k)))
        });
        assemble(s.triangles.len(), level, &mut out, |e| {
            let el = &s.triangles[e];
            let k = s.bodies[el.body].material.k_a;
            let p = gather(x, &el.v);
            Some((el.v, stretch_area(&p[0], &p[1], &p[2], el.rest, k)))
        });
        assemble(s.hinges.len(), level, &mut out, |e| {
            let el = &s.hinges[e];
            let k = s.bodies[el.body].material.bending_stiffness_si();
            if k == 0.0 {
                return None;
            }
            let p = gather(x, &el.v);
            let r = self.rest_angles[e];
            let ev = if want_hess {
                bend_hinge(&p, r, el.rest_len, el.rest_height, k)
            } else {
                let (v, g) = bend_hinge_gradient(&p, r, el.rest_len, el.rest_height, k);
                grad_only(v, g)
            };
            Some((el.v, ev))
        });
        assemble(s.tets.len(), level, &mut out, |e| {
            let el = &s.tets[e];
            let m = &s.bodies[el.body].material;
            let p = gather(x, &el.v);
            Some((el.v, tet_energy(&p, &el.dm_inv, el.volume, m.lame_mu, m.lame_lambda)))
        });
        let c = &s.contact;
        assemble(self.pairs.len(), level, &mut out, |k| {
            let pair = &self.pairs[k];
            let d = pair.dofs();
            Some((d, penalty_energy(&gather(x, &d), pair.side, c.k_r, c.eps_r)))
        });
        assemble(self.pairs.len(), level, &mut out, |k| {
            let pair = &self.pairs[k];
            if pair.mu == 0.0 {
                return None;
            }
            let d = pair.dofs();
            let (q, qp) = (gather(x, &d), gather(self.x_prev, &d));
            let ev = if want_hess {
                friction_energy(&q, &qp, pair.side, pair.mu, c.k_r, c.eps_r, c.eps_v)
            } else {
                let (v, g) = friction_gradient(&q, &qp, pair.side, pair.mu, c.k_r, c.eps_r, c.eps_v);
                grad_only(v, g)
            };
            Some((d, ev))
        });
        out
    }
}

impl Scene {
    pub fn num_vertices(&self) -> usize {
        self.dof_map.num_vertices()
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_map.num_dofs()
    }

    pub fn num_hinges(&self) -> usize {
        self.hinges.len()
    }

    /// Pose DOFs per manipulator.
    pub fn action_dofs(&self) -> Vec<usize> {
        self.manipulators.iter().map(|m| m.dofs()).collect()
    }

    pub fn action_len(&self) -> usize {
        self.action_dofs().iter().sum()
    }

    /// Global vertex indices of hinge `k` as `[e0, e1, a, b]`.
    pub fn hinge_vertices(&self, k: usize) -> [usize; 4] {
        self.hinges[k].v
    }

    /// Body owning hinge `k`.
    pub fn hinge_body(&self, k: usize) -> usize {
        self.hinges[k].body
    }

    pub fn hinge_angles(&self, x: &[f64]) -> Vec<f64> {
        self.hinges
            .iter()
            .map(|h| {
                let p = gather(x, &h.v);
                dihedral_angle(&p[0], &p[1], &p[2], &p[3])
            })
            .collect()
    }

    /// Yield angle per hinge.
    pub fn yield_angles(&self) -> Vec<f64> {
        self.hinges.iter().map(|h| self.bodies[h.body].material.yield_angle).collect()
    }

    pub fn poses_to_vec(&self, poses: &[Pose]) -> Vec<f64> {
        let mut out = Vec::new();
        for (m, p) in self.manipulators.iter().zip(poses) {
            p.to_vec(&m.kind, &mut out);
        }
        out
    }

    /// Sets the attached vertices of `x` to their positions under `poses`.
    pub fn place_attachments(&self, poses: &[Pose], x: &mut [f64]) {
        for (m, pose) in self.manipulators.iter().zip(poses) {
            for a in &m.attachments {
                let p = m.position(a, pose);
                x[3 * a.vertex..3 * a.vertex + 3].copy_from_slice(p.as_slice());
            }
        }
    }

    fn is_pad(&self, b: usize) -> bool {
        self.bodies[b].manipulator.is_some()
    }

    pub fn param(&self, id: ParamId) -> f64 {
        let first = |pred: &dyn Fn(&Body) -> bool, get: &dyn Fn(&MaterialParams) -> f64| {
            self.bodies.iter().find(|b| pred(b)).map(|b| get(&b.material)).unwrap_or(0.0)
        };
        match id {
            ParamId::BendingStiffness => {
                first(&|b| matches!(b.kind, BodyKind::Shell(_)) && b.manipulator.is_none(), &|m| m.k_b)
            }
            ParamId::YieldAngle => first(&|b| matches!(b.kind, BodyKind::Shell(_)), &|m| m.yield_angle),
            ParamId::LameMu => first(&|b| matches!(b.kind, BodyKind::Solid(_)) && b.manipulator.is_none(), &|m| m.lame_mu),
            ParamId::LameLambda => {
                first(&|b| matches!(b.kind, BodyKind::Solid(_)) && b.manipulator.is_none(), &|m| m.lame_lambda)
            }
            ParamId::Friction(a, b) => self.contact.friction.get(a, b),
            ParamId::PenaltyStiffness => self.contact.k_r,
        }
    }

    pub fn set_param(&mut self, id: ParamId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(SimError::Material(format!("{id} = {value}")));
        }
        for b in 0..self.bodies.len() {
            let pad = self.is_pad(b);
            let body = &mut self.bodies[b];
            let shell = matches!(body.kind, BodyKind::Shell(_));
            let solid = matches!(body.kind, BodyKind::Solid(_));
            match id {
                ParamId::BendingStiffness if shell && !pad => body.material.k_b = value,
                ParamId::YieldAngle if shell => body.material.yield_angle = value,
                ParamId::LameMu if solid && !pad => body.material.lame_mu = value,
                ParamId::LameLambda if solid && !pad => body.material.lame_lambda = value,
                _ => {}
            }
            body.material.validate()?;
        }
        match id {
            ParamId::Friction(a, b) => self.contact.friction.set(a, b, value),
            ParamId::PenaltyStiffness => self.contact.k_r = value,
            _ => {}
        }
        self.contact.validate()
    }
}

/// Incremental scene construction. Vertex indices passed to the builder are
/// local to their body.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    bodies: Vec<Body>,
    manipulators: Vec<(String, ManipulatorKind, Pose, Vec<(usize, Vec<usize>, f64)>)>,
    fixed: Vec<(usize, usize)>,
    next_vertex: usize,
    next_hinge: usize,
    pub contact: ContactParams,
    pub h: f64,
    pub gravity: Vector3<f64>,
    pub newton: NewtonParams,
    pub limits: ActionLimits,
}

impl Default for SceneBuilder {
    fn default() -> Self {
        SceneBuilder {
            bodies: Vec::new(),
            manipulators: Vec::new(),
            fixed: Vec::new(),
            next_vertex: 0,
            next_hinge: 0,
            contact: ContactParams::default(),
            h: 5e-3,
            gravity: Vector3::new(0.0, 0.0, -9.8),
            newton: NewtonParams::default(),
            limits: ActionLimits::uniform(1e-3),
        }
    }
}

impl SceneBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, kind: BodyKind, material: MaterialParams, class: MaterialClass) -> Result<usize> {
        material.validate()?;
        let mut body = Body {
            name: name.to_string(),
            kind,
            material,
            class,
            first_vertex: self.next_vertex,
            first_hinge: self.next_hinge,
            manipulator: None,
        };
        if let BodyKind::Shell(m) = &mut body.kind {
            m.thickness = material.thickness;
        }
        self.next_vertex += body.num_vertices();
        self.next_hinge += body.num_hinges();
        self.bodies.push(body);
        Ok(self.bodies.len() - 1)
    }

    pub fn add_shell(&mut self, name: &str, mesh: TriShellMesh<f64>, material: MaterialParams, class: MaterialClass) -> Result<usize> {
        self.push(name, BodyKind::Shell(mesh), material, class)
    }

    pub fn add_solid(&mut self, name: &str, mesh: TetMesh<f64>, material: MaterialParams, class: MaterialClass) -> Result<usize> {
        self.push(name, BodyKind::Solid(mesh), material, class)
    }

    pub fn add_static(
        &mut self,
        name: &str,
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
        class: MaterialClass,
    ) -> Result<usize> {
        if triangles.iter().flatten().any(|&v| v >= vertices.len()) {
            return Err(SimError::Connectivity(format!("static body {name} indexes past its vertices")));
        }
        self.push(name, BodyKind::Static { vertices, triangles }, MaterialParams::default(), class)
    }

    /// Pins vertex `local` of `body` at its rest position.
    pub fn fix(&mut self, body: usize, local: usize) {
        self.fixed.push((body, local));
    }

    /// Adds a manipulator driving `pads`: `(body, attached local vertices, sign)`.
    /// The pad bodies become manipulator surfaces.
    pub fn add_manipulator(
        &mut self,
        name: &str,
        kind: ManipulatorKind,
        initial: Pose,
        pads: Vec<(usize, Vec<usize>, f64)>,
    ) -> usize {
        let m = self.manipulators.len();
        for (b, _, _) in &pads {
            self.bodies[*b].manipulator = Some(m);
            self.bodies[*b].class = MaterialClass::Manipulator;
        }
        self.manipulators.push((name.to_string(), kind, initial, pads));
        m
    }

    pub fn num_bodies(&self) -> usize {
        self.bodies.len()
    }

    pub fn body(&self, b: usize) -> &Body {
        &self.bodies[b]
    }

    pub fn build(self) -> Result<Scene> {
        self.contact.validate()?;
        if !(self.h > 0.0) {
            return Err(SimError::Material(format!("time step {} must be positive", self.h)));
        }
        let objects: Vec<ObjectRange> = self
            .bodies
            .iter()
            .map(|b| ObjectRange { first_vertex: b.first_vertex, num_vertices: b.num_vertices() })
            .collect();
        let mut dof_map = DofMap::new(objects)?;
        let sources: Vec<MassSource> = self
            .bodies
            .iter()
            .map(|b| match &b.kind {
                BodyKind::Shell(mesh) => MassSource::Shell { mesh, density: b.material.density },
                BodyKind::Solid(mesh) => MassSource::Solid { mesh, density: b.material.density },
                BodyKind::Static { vertices, .. } => MassSource::Kinematic { vertices: vertices.len() },
            })
            .collect();
        let mass = lumped_mass(&sources)?;

        let nv = self.next_vertex;
        let mut x = vec![0.0; 3 * nv];
        for b in &self.bodies {
            for (i, p) in b.rest_vertices().iter().enumerate() {
                x[3 * (b.first_vertex + i)..3 * (b.first_vertex + i) + 3].copy_from_slice(p.as_slice());
            }
            if let BodyKind::Static { .. } = b.kind {
                for v in 0..b.num_vertices() {
                    dof_map.fix_vertex(b.first_vertex + v);
                }
            }
        }
        for &(b, v) in &self.fixed {
            if v >= self.bodies[b].num_vertices() {
                return Err(SimError::Connectivity(format!("fixed vertex {v} outside body {b}")));
            }
            dof_map.fix_vertex(self.bodies[b].first_vertex + v);
        }

        let mut manipulators = Vec::new();
        for (m, (name, kind, pose, pads)) in self.manipulators.into_iter().enumerate() {
            let mut verts = Vec::new();
            for (b, locals, sign) in pads {
                let body = &self.bodies[b];
                for v in locals {
                    if v >= body.num_vertices() {
                        return Err(SimError::Connectivity(format!("attachment {v} outside body {b}")));
                    }
                    let g = body.first_vertex + v;
                    dof_map.attach(g, m)?;
                    verts.push((g, vtx(&x, g), sign));
                }
            }
            manipulators.push(Manipulator::new(&name, kind, pose, &verts)?);
        }
        dof_map.validate()?;

        let mut edges = Vec::new();
        let mut triangles = Vec::new();
        let mut hinges = Vec::new();
        let mut tets = Vec::new();
        let mut rest_angles = Vec::new();
        let mut surfaces = Vec::new();
        for (bi, b) in self.bodies.iter().enumerate() {
            let o = b.first_vertex;
            let shift = |t: &[usize]| t.iter().map(|v| v + o).collect::<Vec<_>>();
            let pad = b.manipulator.is_some();
            match &b.kind {
                BodyKind::Shell(m) => {
                    for (e, &l) in m.edges.iter().zip(&m.rest_edge_lengths) {
                        edges.push(EdgeElem { v: [e[0] + o, e[1] + o], rest: l, body: bi });
                    }
                    for (t, &a) in m.triangles.iter().zip(&m.rest_areas) {
                        triangles.push(TriElem { v: [t[0] + o, t[1] + o, t[2] + o], rest: a, body: bi });
                    }
                    for (k, hv) in m.hinges.iter().enumerate() {
                        hinges.push(HingeElem {
                            v: [hv[0] + o, hv[1] + o, hv[2] + o, hv[3] + o],
                            rest_len: m.hinge_rest_lengths[k],
                            rest_height: m.rest_heights[k],
                            body: bi,
                        });
                    }
                    rest_angles.extend_from_slice(&m.rest_angles);
                    let tris = m.triangles.iter().map(|t| shift(t).try_into().unwrap()).collect();
                    surfaces.push(ContactSurface::new(SurfaceKind::Shell, b.class, pad, tris));
                }
                BodyKind::Solid(m) => {
                    for (k, t) in m.tets.iter().enumerate() {
                        tets.push(TetElem {
                            v: [t[0] + o, t[1] + o, t[2] + o, t[3] + o],
                            dm_inv: m.rest_shape_inverses[k],
                            volume: m.rest_volumes[k],
                            body: bi,
                        });
                    }
                    let tris = m.surface.iter().map(|t| shift(t).try_into().unwrap()).collect();
                    surfaces.push(ContactSurface::new(SurfaceKind::Solid, b.class, pad, tris));
                }
                BodyKind::Static { triangles: tris, .. } => {
                    let tris = tris.iter().map(|t| shift(t).try_into().unwrap()).collect();
                    surfaces.push(ContactSurface::new(SurfaceKind::Static, b.class, false, tris));
                }
            }
        }

        let poses: Vec<Pose> = manipulators.iter().map(|m| m.initial.clone()).collect();
        let mut scene = Scene {
            bodies: self.bodies,
            manipulators,
            dof_map,
            mass,
            surfaces,
            contact: self.contact,
            h: self.h,
            gravity: self.gravity,
            newton: self.newton,
            limits: self.limits,
            initial: SceneState::default(),
            edges,
            triangles,
            hinges,
            tets,
        };
        scene.place_attachments(&poses, &mut x);
        let n = x.len();
        scene.initial = SceneState {
            x: x.into(),
            v: nalgebra::DVector::zeros(n),
            rest_angles,
            manipulator_poses: scene.poses_to_vec(&poses),
            time_index: 0,
        };
        Ok(scene)
    }
}
