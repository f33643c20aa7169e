//! Internal potentials with analytic gradients and Hessians, per-element SPD
//! projection and the bending plasticity return map.

mod neo_hookean;
mod plasticity;
mod shell;
mod spd;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scalar::Real;

pub use neo_hookean::{neo_hookean, neo_hookean_lame_derivs, tet_deformation_jacobian, tet_energy};
pub use plasticity::{apply_bending_plasticity, plastic_return};
pub use shell::{bend_hinge, bend_hinge_gradient, stretch_area, stretch_edge};
pub use spd::{project_spd, project_spd_dyn, SPD_EPS};

/// One unit of bending stiffness in joules. Stiffness values are given in
/// task units, i.e. multiples of this constant.
pub const BENDING_UNIT: f64 = 1e-6;

/// Value, gradient and Hessian of one element energy over its `N` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEval<T: Real, const N: usize> {
    pub value: T,
    pub gradient: SVector<T, N>,
    pub hessian: SMatrix<T, N, N>,
    pub projected: bool,
    /// Set when the element could not be evaluated and contributes nothing.
    pub degenerate: bool,
}

impl<T: Real, const N: usize> EnergyEval<T, N> {
    pub fn zero() -> Self {
        EnergyEval {
            value: T::zero(),
            gradient: SVector::zeros(),
            hessian: SMatrix::zeros(),
            projected: false,
            degenerate: false,
        }
    }

    pub fn degenerate() -> Self {
        EnergyEval { degenerate: true, ..Self::zero() }
    }

    /// Energy `phi(s)` of a scalar measure `s(x)`:
    /// gradient `phi' ds`, Hessian `phi'' ds ds^T + phi' d2s`.
    pub(crate) fn compose(phi: T, dphi: T, d2phi: T, ds: &SVector<T, N>, d2s: &SMatrix<T, N, N>) -> Self {
        EnergyEval {
            value: phi,
            gradient: ds * dphi,
            hessian: ds * ds.transpose() * d2phi + d2s * dphi,
            projected: false,
            degenerate: false,
        }
    }
}

impl<const N: usize> EnergyEval<f64, N> {
    /// Replaces the Hessian by its SPD projection.
    pub fn project(mut self) -> Self {
        if !self.projected {
            self.hessian = project_spd(&self.hessian).expect("element Hessians are symmetric by construction");
            self.projected = true;
        }
        self
    }
}

/// Physical coefficients of one material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Lame parameters (Pa), used by volumetric bodies.
    pub lame_mu: f64,
    pub lame_lambda: f64,
    /// Stretch stiffness of shell edges and triangles (N).
    pub k_e: f64,
    pub k_a: f64,
    /// Bending stiffness in task units (see [`BENDING_UNIT`]).
    pub k_b: f64,
    /// Plastic yield angle (rad).
    pub yield_angle: f64,
    /// kg/m^3
    pub density: f64,
    /// Shell thickness (m), enters the mass only.
    pub thickness: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            lame_mu: 3.0e4,
            lame_lambda: 1.2e5,
            k_e: 1000.0,
            k_a: 1000.0,
            k_b: 100.0,
            yield_angle: 0.1,
            density: 800.0,
            thickness: 2.0e-4,
        }
    }
}

impl MaterialParams {
    pub fn bending_stiffness_si(&self) -> f64 {
        self.k_b * BENDING_UNIT
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("lame_mu", self.lame_mu >= 0.0),
            ("lame_lambda", self.lame_lambda >= 0.0),
            ("k_e", self.k_e >= 0.0),
            ("k_a", self.k_a >= 0.0),
            ("k_b", self.k_b >= 0.0),
            ("yield_angle", self.yield_angle > 0.0),
            ("density", self.density > 0.0),
            ("thickness", self.thickness > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(SimError::Material(format!("{name} out of range in {self:?}")));
            }
        }
        Ok(())
    }
}
