use nalgebra::DVector;

use super::manipulator::{clamp_action, ClampMode, Pose};
use super::newton::{newton_solve, IncrementalPotential, NewtonReport};
use super::scene::{Scene, SceneEnergy};
use crate::contact::{detect_collisions, release_separated, update_lambda, ContactPair};
use crate::energy::plastic_return;
use crate::error::{Result, SimError};
use crate::geometry::SceneState;

/// Everything the backward pass needs about one step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// `x^{t-1}`.
    pub x_before: Vec<f64>,
    /// `x^t`.
    pub x_start: Vec<f64>,
    /// Converged `x^{t+1}`.
    pub x_end: Vec<f64>,
    /// Rest angles the solve used.
    pub rest_angles: Vec<f64>,
    /// Hinges that yielded after the solve.
    pub yielded: Vec<bool>,
    /// Contact pairs the solve used.
    pub pairs: Vec<ContactPair>,
    /// Poses after the action.
    pub poses: Vec<Pose>,
    /// Clamped action.
    pub action: Vec<f64>,
    pub newton: NewtonReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub newton: NewtonReport,
    pub clamped: bool,
    /// Number of pairs with a manipulator side after the step.
    pub manipulator_pairs: usize,
    /// Sum of normal strengths over those pairs (N).
    pub manipulator_force: f64,
}

/// Single-owner simulation instance over a shared scene.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub scene: &'a Scene,
    pub state: SceneState,
    /// `x^{t-1}`.
    pub x_before: Vec<f64>,
    pub pairs: Vec<ContactPair>,
    pub poses: Vec<Pose>,
    pub tape: Vec<StepRecord>,
    pub record: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(scene: &'a Scene) -> Self {
        let mut sim = Self::from_state(scene, scene.initial.clone());
        sim.poses = scene.manipulators.iter().map(|m| m.initial.clone()).collect();
        sim
    }

    /// Starts from `state`; poses are read back from its pose vector.
    pub fn from_state(scene: &'a Scene, state: SceneState) -> Self {
        let poses = poses_from_vec(scene, &state.manipulator_poses);
        let x_before = state.x.iter().zip(state.v.iter()).map(|(x, v)| x - scene.h * v).collect();
        Simulation { scene, state, x_before, pairs: Vec::new(), poses, tape: Vec::new(), record: true }
    }

    /// Advances one step under `action` (one pose delta block per manipulator).
    pub fn step(&mut self, action: &[f64], mode: ClampMode) -> Result<StepResult> {
        let s = self.scene;
        if action.len() != s.action_len() {
            return Err(SimError::Dimension(format!("action has {} entries, scene needs {}", action.len(), s.action_len())));
        }
        let mut a = action.to_vec();
        let clamped = clamp_action(&mut a, &s.action_dofs(), &s.limits, mode)?;
        if clamped {
            log::debug!("action clamped at step {}", self.state.time_index);
        }
        let mut off = 0;
        for (m, pose) in s.manipulators.iter().zip(self.poses.iter_mut()) {
            *pose = pose.advance(&a[off..off + m.dofs()]);
            off += m.dofs();
        }

        let x_t: Vec<f64> = self.state.x.as_slice().to_vec();
        let fixed = &s.dof_map.fixed;
        let h = s.h;
        let mut y = vec![0.0; x_t.len()];
        let mut x0 = x_t.clone();
        for i in 0..x_t.len() {
            if fixed[i] {
                continue;
            }
            y[i] = x_t[i] + h * self.state.v[i] + h * h * s.gravity[i % 3];
            x0[i] = x_t[i] + h * self.state.v[i];
        }
        s.place_attachments(&self.poses, &mut x0);

        let mut detect_x = x_t.clone();
        s.place_attachments(&self.poses, &mut detect_x);
        let pairs = detect_collisions(&s.surfaces, &detect_x, &x_t, &self.pairs, &s.contact)?;

        let energy = SceneEnergy { scene: s, rest_angles: &self.state.rest_angles, pairs: &pairs, x_prev: &x_t };
        let ip = IncrementalPotential { energy: &energy, mass: &s.mass, y: &y, h, fixed };
        let (x_new, newton) = newton_solve(&ip, x0, &s.newton);
        if !newton.converged {
            log::warn!(
                "newton did not converge at step {} (residual {:e}, scale {:e})",
                self.state.time_index,
                newton.residual,
                newton.scale
            );
        }

        let rest_used = self.state.rest_angles.clone();
        let angles = s.hinge_angles(&x_new);
        let kappa = s.yield_angles();
        let mut yielded = vec![false; angles.len()];
        for k in 0..angles.len() {
            let (r, y) = plastic_return(angles[k], self.state.rest_angles[k], kappa[k]);
            self.state.rest_angles[k] = r;
            yielded[k] = y;
        }

        let mut next_pairs = pairs.clone();
        release_separated(&mut next_pairs, &x_new, &s.contact);
        update_lambda(&mut next_pairs, &x_new, &s.contact);
        let manip: Vec<&ContactPair> = next_pairs.iter().filter(|p| p.manipulator).collect();
        let manipulator_force = manip.iter().map(|p| p.lambda).sum();

        let v: Vec<f64> = x_new.iter().zip(&x_t).map(|(a, b)| (a - b) / h).collect();
        if self.record {
            self.tape.push(StepRecord {
                x_before: std::mem::replace(&mut self.x_before, x_t.clone()),
                x_start: x_t,
                x_end: x_new.clone(),
                rest_angles: rest_used,
                yielded,
                pairs,
                poses: self.poses.clone(),
                action: a,
                newton: newton.clone(),
            });
        } else {
            self.x_before = x_t;
        }
        self.state.x = DVector::from_vec(x_new);
        self.state.v = DVector::from_vec(v);
        self.state.manipulator_poses = s.poses_to_vec(&self.poses);
        self.state.time_index += 1;
        let result = StepResult { newton, clamped, manipulator_pairs: manip.len(), manipulator_force };
        self.pairs = next_pairs;
        Ok(result)
    }
}

fn poses_from_vec(scene: &Scene, v: &[f64]) -> Vec<Pose> {
    let mut off = 0;
    scene
        .manipulators
        .iter()
        .map(|m| {
            let c = nalgebra::Vector3::new(v[off], v[off + 1], v[off + 2]);
            let r = nalgebra::Rotation3::new(nalgebra::Vector3::new(v[off + 3], v[off + 4], v[off + 5]));
            let w = if m.dofs() == 7 { v[off + 6] } else { 0.0 };
            off += m.dofs();
            Pose { center: c, rotation: r, width: w }
        })
        .collect()
}
