use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::prim::skew;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipulatorKind {
    /// Rigid base with 6 pose DoFs.
    Single,
    /// Two pads opening symmetrically along `axis` (base frame), 7 DoFs.
    Gripper { axis: [f64; 3] },
}

impl ManipulatorKind {
    pub fn dofs(&self) -> usize {
        match self {
            ManipulatorKind::Single => 6,
            ManipulatorKind::Gripper { .. } => 7,
        }
    }

    fn axis(&self) -> Vector3<f64> {
        match self {
            ManipulatorKind::Single => Vector3::zeros(),
            ManipulatorKind::Gripper { axis } => Vector3::from(*axis).normalize(),
        }
    }
}

/// Rigid base pose plus gripper opening width.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub center: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    pub width: f64,
}

impl Pose {
    pub fn at(center: Vector3<f64>) -> Self {
        Pose { center, rotation: Rotation3::identity(), width: 0.0 }
    }

    /// `[c, rotation vector, width?]`.
    pub fn to_vec(&self, kind: &ManipulatorKind, out: &mut Vec<f64>) {
        out.extend_from_slice(self.center.as_slice());
        out.extend_from_slice(self.rotation.scaled_axis().as_slice());
        if kind.dofs() == 7 {
            out.push(self.width);
        }
    }

    /// Applies one action block `[dc, dw, dwidth?]`: `R <- exp(dw) R`.
    pub fn advance(&self, action: &[f64]) -> Pose {
        let dc = Vector3::new(action[0], action[1], action[2]);
        let dw = Vector3::new(action[3], action[4], action[5]);
        Pose {
            center: self.center + dc,
            rotation: Rotation3::new(dw) * self.rotation,
            width: self.width + action.get(6).copied().unwrap_or(0.0),
        }
    }
}

/// A base-attached vertex: `p = c + R (local + sign * width/2 * axis)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub vertex: usize,
    pub local: Vector3<f64>,
    pub sign: f64,
}

#[derive(Debug, Clone)]
pub struct Manipulator {
    pub name: String,
    pub kind: ManipulatorKind,
    pub attachments: Vec<Attachment>,
    pub initial: Pose,
}

impl Manipulator {
    /// Attaches `vertices` (with the pad sign of each) at their positions
    /// `rest` under the initial pose.
    pub fn new(
        name: &str,
        kind: ManipulatorKind,
        initial: Pose,
        vertices: &[(usize, Vector3<f64>, f64)],
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(SimError::Connectivity(format!("manipulator {name} has no attachment vertices")));
        }
        let axis = kind.axis();
        let rt = initial.rotation.inverse();
        let attachments = vertices
            .iter()
            .map(|&(vertex, p, sign)| Attachment {
                vertex,
                local: rt * (p - initial.center) - axis * (sign * 0.5 * initial.width),
                sign,
            })
            .collect();
        Ok(Manipulator { name: name.to_string(), kind, attachments, initial })
    }

    pub fn dofs(&self) -> usize {
        self.kind.dofs()
    }

    /// Offset of an attachment from the base center, in the base frame.
    pub fn lever_local(&self, a: &Attachment, width: f64) -> Vector3<f64> {
        a.local + self.kind.axis() * (a.sign * 0.5 * width)
    }

    pub fn position(&self, a: &Attachment, pose: &Pose) -> Vector3<f64> {
        pose.center + pose.rotation * self.lever_local(a, pose.width)
    }

    /// Gradient of a loss with respect to `[c, world rotation, width]`
    /// given `grads[k]` for attachment `k`.
    pub fn pose_gradient(&self, pose: &Pose, grads: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>, f64) {
        let axis = self.kind.axis();
        let mut gc = Vector3::zeros();
        let mut gr = Vector3::zeros();
        let mut gw = 0.0;
        for (a, g) in self.attachments.iter().zip(grads) {
            let lever = pose.rotation * self.lever_local(a, pose.width);
            gc += g;
            gr += lever.cross(g);
            gw += g.dot(&(pose.rotation * axis)) * 0.5 * a.sign;
        }
        (gc, gr, gw)
    }
}

/// Left Jacobian of SO(3): `exp(w + d) = exp(J_l(w) d) exp(w)` to first order.
pub fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let t = w.norm();
    let k = skew(w);
    let (a, b) = if t < 1e-5 {
        (0.5 - t * t / 24.0, 1.0 / 6.0 - t * t / 120.0)
    } else {
        ((1.0 - t.cos()) / (t * t), (t - t.sin()) / (t * t * t))
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Per-step action bounds. Components beyond a bound are clamped in
/// rollout mode and rejected in strict mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionLimits {
    /// m per step.
    pub translation: f64,
    /// rad per step.
    pub rotation: f64,
    /// m per step.
    pub width: f64,
}

impl ActionLimits {
    pub fn uniform(range: f64) -> Self {
        ActionLimits { translation: range, rotation: 10.0 * range, width: range }
    }

    pub fn bound(&self, component: usize) -> f64 {
        match component {
            0..=2 => self.translation,
            3..=5 => self.rotation,
            _ => self.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampMode {
    Clamp,
    Strict,
}

/// Clamps `action` block-wise (`dofs` per manipulator) in place; returns
/// whether anything changed. In strict mode an out-of-range entry is an error.
pub fn clamp_action(action: &mut [f64], dofs: &[usize], limits: &ActionLimits, mode: ClampMode) -> Result<bool> {
    let mut changed = false;
    let mut off = 0;
    for &d in dofs {
        for c in 0..d {
            let i = off + c;
            let b = limits.bound(c);
            let v = action[i];
            if !v.is_finite() || v.abs() > b {
                if mode == ClampMode::Strict {
                    return Err(SimError::ActionOutOfRange { index: i, value: v, clamp: b });
                }
                action[i] = if v.is_finite() { v.clamp(-b, b) } else { 0.0 };
                changed = true;
            }
        }
        off += d;
    }
    Ok(changed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gripper_opens_symmetrically() {
        let kind = ManipulatorKind::Gripper { axis: [1.0, 0.0, 0.0] };
        let pose = Pose { width: 0.02, ..Pose::at(Vector3::zeros()) };
        let m = Manipulator::new(
            "g",
            kind,
            pose.clone(),
            &[(0, Vector3::new(0.01, 0.0, 0.0), 1.0), (1, Vector3::new(-0.01, 0.0, 0.0), -1.0)],
        )
        .unwrap();
        let wider = pose.advance(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01]);
        assert!((m.position(&m.attachments[0], &wider).x - 0.015).abs() < 1e-15);
        assert!((m.position(&m.attachments[1], &wider).x + 0.015).abs() < 1e-15);
    }

    #[test]
    fn left_jacobian_matches_fd() {
        let w = Vector3::new(0.3, -0.2, 0.5);
        let j = left_jacobian(&w);
        let r0 = Rotation3::new(w);
        for k in 0..3 {
            let mut d = Vector3::zeros();
            d[k] = 1e-6;
            // small-angle log from the skew part; scaled_axis loses digits here
            let vee = |r: Rotation3<f64>| {
                let m = r.matrix();
                Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
            };
            let plus = vee(Rotation3::new(w + d) * r0.inverse());
            let minus = vee(Rotation3::new(w - d) * r0.inverse());
            let col = (plus - minus) / 2e-6;
            assert!((col - j.column(k)).norm() < 1e-8, "{}", (col - j.column(k)).norm());
        }
    }

    #[test]
    fn clamp_is_idempotent() {
        let l = ActionLimits::uniform(1e-3);
        let mut a = vec![2e-3, -5e-4, 0.0, 0.5, 0.0, 0.0];
        assert!(clamp_action(&mut a, &[6], &l, ClampMode::Clamp).unwrap());
        let once = a.clone();
        assert!(!clamp_action(&mut a, &[6], &l, ClampMode::Clamp).unwrap());
        assert_eq!(a, once);
        assert_eq!(a[0], 1e-3);
        let mut b = vec![2e-3, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(clamp_action(&mut b, &[6], &l, ClampMode::Strict).is_err());
    }
}
