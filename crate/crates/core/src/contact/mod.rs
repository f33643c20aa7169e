//! Vertex–triangle contact: broad phase, pair bookkeeping with locked
//! normals, penalty and smooth friction potentials.

mod detect;
mod hash;
mod potential;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub use detect::{brute_force_pairs, detect_collisions, release_separated, ContactSurface, SurfaceKind};
pub use hash::SpatialHash;
pub use potential::{f0, f1_over_y, friction_energy, friction_gradient, penalty_energy, pair_distance, update_lambda};

/// Material class of a contact surface, used to look up friction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialClass {
    Cloth,
    Object,
    Table,
    Manipulator,
}

/// Symmetric friction coefficient table; missing entries are frictionless.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrictionTable {
    entries: BTreeMap<(MaterialClass, MaterialClass), f64>,
}

impl FrictionTable {
    fn key(a: MaterialClass, b: MaterialClass) -> (MaterialClass, MaterialClass) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn set(&mut self, a: MaterialClass, b: MaterialClass, mu: f64) {
        self.entries.insert(Self::key(a, b), mu);
    }

    pub fn get(&self, a: MaterialClass, b: MaterialClass) -> f64 {
        self.entries.get(&Self::key(a, b)).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = ((MaterialClass, MaterialClass), f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

/// Penalty and friction coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactParams {
    /// Penalty stiffness (N/m).
    pub k_r: f64,
    /// Contact thickness (m).
    pub eps_r: f64,
    /// Friction smoothing distance (m per step).
    pub eps_v: f64,
    pub friction: FrictionTable,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams { k_r: 1e4, eps_r: 1e-3, eps_v: 1e-5, friction: FrictionTable::default() }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_r > 0.0 && self.eps_r > 0.0 && self.eps_v > 0.0) {
            return Err(SimError::Material(format!(
                "contact needs k_r, eps_r, eps_v > 0, got {} {} {}",
                self.k_r, self.eps_r, self.eps_v
            )));
        }
        if let Some((k, mu)) = self.friction.entries().find(|(_, mu)| !(*mu >= 0.0)) {
            return Err(SimError::Material(format!("friction {k:?} = {mu} is negative")));
        }
        Ok(())
    }

    /// Distance beyond which an active pair is released.
    pub fn release_distance(&self) -> f64 {
        1.5 * self.eps_r
    }
}

/// Active vertex–triangle pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPair {
    pub vertex: usize,
    /// Surface the triangle belongs to.
    pub surface: usize,
    /// Index of the triangle within its surface.
    pub triangle_index: usize,
    /// Global vertex indices of the triangle.
    pub triangle: [usize; 3],
    /// `+1` or `-1`: the side of the triangle the vertex is registered on.
    pub side: f64,
    /// Unit normal pointing to the registered side, frozen at creation.
    pub locked_normal: Vector3<f64>,
    /// Normal force strength of the last converged step (N).
    pub lambda: f64,
    /// Barycentric projection of the vertex at the last converged step.
    pub anchor: [f64; 3],
    pub mu: f64,
    /// Classes of the vertex's surface and of the triangle's surface.
    pub classes: (MaterialClass, MaterialClass),
    /// True when either side belongs to a manipulator.
    pub manipulator: bool,
}

impl ContactPair {
    /// Global vertex indices in kernel order `[p1, p2, p3, p]`.
    pub fn dofs(&self) -> [usize; 4] {
        [self.triangle[0], self.triangle[1], self.triangle[2], self.vertex]
    }
}

