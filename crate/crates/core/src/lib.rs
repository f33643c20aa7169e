//! Differentiable implicit-Euler simulation of thin shells and soft solids
//! with penalty contact, smooth friction and bending plasticity, together
//! with manipulation / inverse-design tasks and trajectory optimizers.
//!
//! Per-element kernels are generic over [`scalar::Real`]; the assembled
//! simulation runs in `f64`.

pub mod adjoint;
pub mod contact;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod optimize;
pub mod scalar;
pub mod tasks;

pub use error::{Result, SimError};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
pub type ShellMesh = geometry::TriShellMesh<f64>;
pub type ShellMeshF32 = geometry::TriShellMesh<f32>;
pub type SolidMesh = geometry::TetMesh<f64>;
pub type SolidMeshF32 = geometry::TetMesh<f32>;
