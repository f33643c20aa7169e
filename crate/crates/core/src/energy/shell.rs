use nalgebra::{SMatrix, SVector, Vector3};

use super::EnergyEval;
use crate::geometry::prim::{cross_norm, dihedral_angle, dihedral_gradient, dihedral_hessian, edge_length};
use crate::scalar::{lit, Real};

/// `K_e (1 - |e|/|e_rest|)^2 |e_rest|` over the 6 edge coordinates.
pub fn stretch_edge<T: Real>(x0: &Vector3<T>, x1: &Vector3<T>, rest_len: T, k_e: T) -> EnergyEval<T, 6> {
    let (l, dl, d2l) = edge_length(x0, x1);
    let two = lit::<T>(2.0);
    let r = T::one() - l / rest_len;
    let mut e = EnergyEval::compose(k_e * r * r * rest_len, -two * k_e * r, two * k_e / rest_len, &dl, &d2l);
    e.degenerate = l <= T::zero();
    e
}

/// `K_a (1 - |A|/|A_rest|)^2 |A_rest|` over the 9 triangle coordinates.
pub fn stretch_area<T: Real>(
    x0: &Vector3<T>,
    x1: &Vector3<T>,
    x2: &Vector3<T>,
    rest_area: T,
    k_a: T,
) -> EnergyEval<T, 9> {
    let (c, dc, d2c) = cross_norm(x0, x1, x2);
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let a = c * half;
    let r = T::one() - a / rest_area;
    // s = A = c / 2
    let mut e = EnergyEval::compose(
        k_a * r * r * rest_area,
        -two * k_a * r,
        two * k_a / rest_area,
        &(dc * half),
        &(d2c * half),
    );
    e.degenerate = c <= T::zero();
    e
}

fn wings_ok<T: Real>(x: &[Vector3<T>; 4]) -> bool {
    let e = x[1] - x[0];
    let l2 = e.norm_squared();
    let na = e.cross(&(x[2] - x[0])).norm_squared();
    let nb = (x[3] - x[0]).cross(&e).norm_squared();
    // altitude^2 = |n|^2 / l^2 must not vanish relative to the edge length
    let tol = lit::<T>(1e-20) * l2 * l2;
    l2 > T::zero() && na > tol && nb > tol
}

/// Gradient of the hinge energy `K_b (theta - theta_rest)^2 |e_rest| / h_rest`.
pub fn bend_hinge_gradient<T: Real>(
    x: &[Vector3<T>; 4],
    rest_angle: T,
    rest_len: T,
    rest_height: T,
    k_b: T,
) -> (T, SVector<T, 12>) {
    if !wings_ok(x) {
        return (T::zero(), SVector::zeros());
    }
    let theta = dihedral_angle(&x[0], &x[1], &x[2], &x[3]);
    let w = k_b * rest_len / rest_height;
    let d = theta - rest_angle;
    (w * d * d, dihedral_gradient(&x[0], &x[1], &x[2], &x[3]) * (lit::<T>(2.0) * w * d))
}

/// Discrete-shells hinge energy over `[x0, x1, x2, x3]` (hinge layout of
/// [`crate::geometry::TriShellMesh`]). Hinges with a vanishing wing are
/// skipped and flagged degenerate.
pub fn bend_hinge(
    x: &[Vector3<f64>; 4],
    rest_angle: f64,
    rest_len: f64,
    rest_height: f64,
    k_b: f64,
) -> EnergyEval<f64, 12> {
    if !wings_ok(x) {
        log::warn!("skipping hinge with degenerate wing");
        return EnergyEval::degenerate();
    }
    let theta = dihedral_angle(&x[0], &x[1], &x[2], &x[3]);
    let w = k_b * rest_len / rest_height;
    let d = theta - rest_angle;
    let dt = dihedral_gradient(&x[0], &x[1], &x[2], &x[3]);
    let d2t: SMatrix<f64, 12, 12> = dihedral_hessian(x);
    EnergyEval::compose(w * d * d, 2.0 * w * d, 2.0 * w, &dt, &d2t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn stretch_values() {
        let o = Vector3::<f64>::zeros();
        let e = stretch_edge(&o, &Vector3::new(2.0, 0.0, 0.0), 1.0, 1.0);
        assert!((e.value - 1.0).abs() < 1e-15);
        let r = stretch_edge(&o, &Vector3::new(0.0, 1.0, 0.0), 1.0, 1.0);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.gradient.amax(), 0.0);
        // right triangle with legs 2: area 2 = 2 * rest
        let a = stretch_area(&o, &Vector3::new(2.0, 0.0, 0.0), &Vector3::new(0.0, 2.0, 0.0), 1.0, 1.0);
        assert!((a.value - 1.0).abs() < 1e-14);
        let coincident = stretch_edge(&o, &o, 1.0, 1.0);
        assert!(coincident.degenerate && coincident.gradient.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn right_angle_hinge_energy() {
        let x = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        let e = bend_hinge(&x, 0.0, 1.0, 1.0, 1.0);
        assert!((e.value - (PI / 2.0).powi(2)).abs() < 1e-13);
        let z = bend_hinge(&x, PI / 2.0, 1.0, 1.0, 1.0);
        assert!(z.value.abs() < 1e-25 && z.gradient.amax() < 1e-12);
    }

    #[test]
    fn collapsed_wing_skipped() {
        let x = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.5, 0.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
        ];
        assert!(bend_hinge(&x, 0.0, 1.0, 1.0, 1.0).degenerate);
    }
}
