//! Scalar abstraction shared by the per-element kernels.
//!
//! Geometry and energy kernels are written once over [`Real`] so they can be
//! evaluated in `f32`, `f64`, or forward-mode dual numbers (used by the
//! adjoint to obtain exact mixed Jacobians).

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Floating point scalar usable by every kernel in the crate.
pub trait Real: RealField + Copy + FromPrimitive {}

impl<T: RealField + Copy + FromPrimitive> Real for T {}

/// Converts an `f64` literal into the kernel scalar.
#[inline(always)]
pub fn lit<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("scalar conversion")
}
