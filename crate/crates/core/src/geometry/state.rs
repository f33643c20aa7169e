use nalgebra::{DVector, Vector3};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

/// Full dynamic state of a scene: positions, velocities, bending rest angles
/// of every hinge (all shells concatenated), manipulator pose scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneState {
    /// Flattened `N_v x 3` positions.
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub rest_angles: Vec<f64>,
    pub manipulator_poses: Vec<f64>,
    pub time_index: usize,
}

impl SceneState {
    pub fn num_vertices(&self) -> usize {
        self.x.len() / 3
    }

    pub fn vertex(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.x[3 * i], self.x[3 * i + 1], self.x[3 * i + 2])
    }

    pub fn set_vertex(&mut self, i: usize, p: &Vector3<f64>) {
        self.x.fixed_rows_mut::<3>(3 * i).copy_from(p);
    }

    pub fn check(&self, num_vertices: usize, num_hinges: usize, num_pose: usize) -> Result<()> {
        if self.x.len() != 3 * num_vertices || self.v.len() != 3 * num_vertices {
            return Err(SimError::Dimension(format!(
                "state has {} / {} position / velocity scalars, scene has {} vertices",
                self.x.len(),
                self.v.len(),
                num_vertices
            )));
        }
        if self.rest_angles.len() != num_hinges || self.manipulator_poses.len() != num_pose {
            return Err(SimError::Dimension(format!(
                "state has {} rest angles and {} pose scalars, expected {num_hinges} and {num_pose}",
                self.rest_angles.len(),
                self.manipulator_poses.len()
            )));
        }
        let finite = self.x.iter().chain(self.v.iter()).chain(&self.rest_angles).chain(&self.manipulator_poses);
        if finite.into_iter().any(|s| !s.is_finite()) {
            return Err(SimError::Dimension("state contains non-finite values".into()));
        }
        Ok(())
    }

    /// SHA-256 over the bit patterns of every stored scalar, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.time_index as u64).to_le_bytes());
        for part in [self.x.as_slice(), self.v.as_slice(), &self.rest_angles, &self.manipulator_poses] {
            h.update((part.len() as u64).to_le_bytes());
            for s in part {
                h.update(s.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Vertex range occupied by one object in the global arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectRange {
    pub first_vertex: usize,
    pub num_vertices: usize,
}

impl ObjectRange {
    pub fn vertices(&self) -> std::ops::Range<usize> {
        self.first_vertex..self.first_vertex + self.num_vertices
    }

    pub fn dofs(&self) -> std::ops::Range<usize> {
        3 * self.first_vertex..3 * (self.first_vertex + self.num_vertices)
    }
}

/// Global DOF layout: object ranges, fixed mask and manipulator attachment.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub objects: Vec<ObjectRange>,
    /// One flag per scalar DOF.
    pub fixed: Vec<bool>,
    /// Driving manipulator per vertex.
    pub attachment: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(objects: Vec<ObjectRange>) -> Result<Self> {
        let mut next = 0;
        for (k, o) in objects.iter().enumerate() {
            if o.first_vertex != next {
                return Err(SimError::Dimension(format!("object {k} starts at vertex {} instead of {next}", o.first_vertex)));
            }
            next += o.num_vertices;
        }
        Ok(DofMap { objects, fixed: vec![false; 3 * next], attachment: vec![None; next] })
    }

    pub fn num_vertices(&self) -> usize {
        self.attachment.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.fixed.len()
    }

    pub fn fix_vertex(&mut self, v: usize) {
        self.fixed[3 * v..3 * v + 3].fill(true);
    }

    pub fn is_vertex_fixed(&self, v: usize) -> bool {
        self.fixed[3 * v..3 * v + 3].iter().all(|&f| f)
    }

    /// Attaches `v` to manipulator `m` and fixes its DOFs.
    pub fn attach(&mut self, v: usize, m: usize) -> Result<()> {
        match self.attachment[v] {
            Some(other) if other != m => Err(SimError::Connectivity(format!(
                "vertex {v} already driven by manipulator {other}"
            ))),
            _ => {
                self.attachment[v] = Some(m);
                self.fix_vertex(v);
                Ok(())
            }
        }
    }

    /// Object owning vertex `v`.
    pub fn object_of(&self, v: usize) -> Option<usize> {
        self.objects.iter().position(|o| o.vertices().contains(&v))
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.objects.iter().map(|o| o.num_vertices).sum();
        if total != self.attachment.len() || 3 * total != self.fixed.len() {
            return Err(SimError::Dimension("object ranges do not partition the DOFs".into()));
        }
        for (v, a) in self.attachment.iter().enumerate() {
            if a.is_some() && !self.is_vertex_fixed(v) {
                return Err(SimError::Connectivity(format!("driven vertex {v} is not fixed")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_attachment() {
        let mut d = DofMap::new(vec![
            ObjectRange { first_vertex: 0, num_vertices: 4 },
            ObjectRange { first_vertex: 4, num_vertices: 2 },
        ])
        .unwrap();
        assert_eq!(d.num_dofs(), 18);
        d.attach(5, 0).unwrap();
        assert!(d.attach(5, 1).is_err());
        assert!(d.is_vertex_fixed(5));
        assert_eq!(d.object_of(5), Some(1));
        d.validate().unwrap();
        assert!(DofMap::new(vec![ObjectRange { first_vertex: 1, num_vertices: 2 }]).is_err());
    }

    #[test]
    fn state_hash_tracks_bits() {
        let s = SceneState {
            x: DVector::from_vec(vec![0.0, 1.0, 2.0]),
            v: DVector::zeros(3),
            rest_angles: vec![],
            manipulator_poses: vec![],
            time_index: 0,
        };
        let mut t = s.clone();
        assert_eq!(s.hash(), t.hash());
        t.v[0] = -0.0;
        assert_ne!(s.hash(), t.hash());
        assert!(s.check(1, 0, 0).is_ok());
        assert!(s.check(2, 0, 0).is_err());
    }
}
