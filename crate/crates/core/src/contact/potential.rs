use nalgebra::{SMatrix, SVector, Vector3};

use super::{ContactPair, ContactParams};
use crate::energy::EnergyEval;
use crate::geometry::prim::{projection_barycentric, signed_distance, signed_distance_derivs};
use crate::scalar::{lit, Real};

/// Signed distance of `x[3]` to triangle `x[0..3]`, positive on the registered side.
pub fn pair_distance<T: Real>(x: &[Vector3<T>; 4], side: T) -> T {
    signed_distance(&x[0], &x[1], &x[2], &x[3]) * side
}

/// `k_r/2 min(d - eps_r, 0)^2` over `[p1, p2, p3, p]`.
pub fn penalty_energy<T: Real>(x: &[Vector3<T>; 4], side: T, k_r: T, eps_r: T) -> EnergyEval<T, 12> {
    let Some((d, dd, d2d)) = signed_distance_derivs(&x[0], &x[1], &x[2], &x[3]) else {
        log::warn!("skipping contact pair on a degenerate triangle");
        return EnergyEval::degenerate();
    };
    let gap = d * side - eps_r;
    if gap >= T::zero() {
        return EnergyEval::zero();
    }
    let half = lit::<T>(0.5);
    EnergyEval::compose(k_r * half * gap * gap, k_r * gap, k_r, &(dd * side), &(d2d * side))
}

/// Smoothed friction profile: `-y^3/(3 eps^2) + y^2/eps + eps/3` below `eps`, `y` above.
pub fn f0<T: Real>(y: T, eps: T) -> T {
    if y <= eps {
        -y * y * y / (lit::<T>(3.0) * eps * eps) + y * y / eps + eps / lit(3.0)
    } else {
        y
    }
}

/// `f0'(y) / y` and its derivative in `y`.
pub fn f1_over_y<T: Real>(y: T, eps: T) -> (T, T) {
    if y <= eps {
        (-y / (eps * eps) + lit::<T>(2.0) / eps, -T::one() / (eps * eps))
    } else {
        (T::one() / y, -T::one() / (y * y))
    }
}

struct Slip<T: Real> {
    /// Rows of `d(P rel)/dx` over `[p1, p2, p3, p]`.
    jac: [SVector<T, 12>; 3],
    /// Tangential relative displacement `P rel`.
    u: Vector3<T>,
    y: T,
    /// `mu * lambda`.
    scale: T,
}

/// Tangential slip against the triangle; the normal strength, anchor and
/// tangent plane `P = I - n n^T` all come from `x_prev`.
fn slip<T: Real>(x: &[Vector3<T>; 4], x_prev: &[Vector3<T>; 4], side: T, mu: T, k_r: T, eps_r: T) -> Slip<T> {
    let d_prev = pair_distance(x_prev, side);
    let lambda = k_r * (eps_r - d_prev).max(T::zero());
    let b = projection_barycentric(&x_prev[0], &x_prev[1], &x_prev[2], &x_prev[3]);
    let cross = (x_prev[1] - x_prev[0]).cross(&(x_prev[2] - x_prev[0]));
    let area2 = cross.norm();
    let n = if area2 > T::zero() { cross / area2 } else { Vector3::zeros() };
    let proj = nalgebra::Matrix3::<T>::identity() - n * n.transpose();
    let mut rel = x[3] - x_prev[3];
    for i in 0..3 {
        rel -= (x[i] - x_prev[i]) * b[i];
    }
    let u = proj * rel;
    let mut jac = [SVector::<T, 12>::zeros(); 3];
    for k in 0..3 {
        for r in 0..3 {
            for i in 0..3 {
                jac[k][3 * i + r] = -b[i] * proj[(k, r)];
            }
            jac[k][9 + r] = proj[(k, r)];
        }
    }
    Slip { jac, u, y: u.norm(), scale: mu * lambda }
}

/// Friction energy and gradient in `x`. The normal strength and the anchor
/// are lagged: both are evaluated at `x_prev`, so this function is also the
/// one to differentiate for the dependence on the previous step.
pub fn friction_gradient<T: Real>(
    x: &[Vector3<T>; 4],
    x_prev: &[Vector3<T>; 4],
    side: T,
    mu: T,
    k_r: T,
    eps_r: T,
    eps_v: T,
) -> (T, SVector<T, 12>) {
    let s = slip(x, x_prev, side, mu, k_r, eps_r);
    let (phi, _) = f1_over_y(s.y, eps_v);
    let g = (s.jac[0] * s.u[0] + s.jac[1] * s.u[1] + s.jac[2] * s.u[2]) * (s.scale * phi);
    (s.scale * f0(s.y, eps_v), g)
}

/// `mu lambda f0(|u|)` with its Hessian in `x` (already positive semidefinite).
pub fn friction_energy<T: Real>(
    x: &[Vector3<T>; 4],
    x_prev: &[Vector3<T>; 4],
    side: T,
    mu: T,
    k_r: T,
    eps_r: T,
    eps_v: T,
) -> EnergyEval<T, 12> {
    let s = slip(x, x_prev, side, mu, k_r, eps_r);
    if s.scale <= T::zero() {
        return EnergyEval::zero();
    }
    let (phi, dphi) = f1_over_y(s.y, eps_v);
    let gradient = (s.jac[0] * s.u[0] + s.jac[1] * s.u[1] + s.jac[2] * s.u[2]) * (s.scale * phi);
    let mut hessian = SMatrix::<T, 12, 12>::zeros();
    for k in 0..3 {
        for l in 0..3 {
            let mut w = if k == l { phi } else { T::zero() };
            if s.y > T::zero() {
                w += dphi * s.u[k] * s.u[l] / s.y;
            }
            hessian += s.jac[k] * s.jac[l].transpose() * (w * s.scale);
        }
    }
    EnergyEval { value: s.scale * f0(s.y, eps_v), gradient, hessian, projected: false, degenerate: false }
}

fn gather(x: &[f64], dofs: &[usize; 4]) -> [Vector3<f64>; 4] {
    dofs.map(|v| Vector3::new(x[3 * v], x[3 * v + 1], x[3 * v + 2]))
}

/// Refreshes each pair's normal strength and anchor from converged positions.
pub fn update_lambda(pairs: &mut [ContactPair], x: &[f64], params: &ContactParams) {
    for p in pairs {
        let q = gather(x, &p.dofs());
        let d = pair_distance(&q, p.side);
        p.lambda = params.k_r * (params.eps_r - d).max(0.0);
        p.anchor = projection_barycentric(&q[0], &q[1], &q[2], &q[3]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor(p: Vector3<f64>) -> [Vector3<f64>; 4] {
        [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0), p]
    }

    #[test]
    fn penalty_values() {
        let at = penalty_energy(&floor(Vector3::new(0.2, 0.2, 1e-3)), 1.0, 1e4, 1e-3);
        assert_eq!(at.value, 0.0);
        assert_eq!(at.gradient.amax(), 0.0);
        let e = penalty_energy(&floor(Vector3::new(0.2, 0.2, 1e-3 - 1e-4)), 1.0, 1e4, 1e-3);
        assert!((e.value - 5e-5).abs() < 1e-15);
        assert!((e.gradient.fixed_rows::<3>(9).norm() - 1.0).abs() < 1e-10);
        // force on the vertex points to +z
        assert!(e.gradient[11] < 0.0);
    }

    #[test]
    fn f0_is_c1_at_knot() {
        let eps: f64 = 1e-5;
        assert!((f0(eps, eps) - eps).abs() < 1e-20);
        let (phi, _) = f1_over_y(eps, eps);
        assert!((phi * eps - 1.0).abs() < 1e-12);
        assert!((f0(0.0, eps) - eps / 3.0).abs() < 1e-20);
    }

    #[test]
    fn sliding_force_saturates() {
        let prev = floor(Vector3::new(0.2, 0.2, 0.5e-3));
        let eps_v = 1e-5;
        let lambda = 1e4 * 0.5e-3;
        for k in 0..=50 {
            let s = 5.0 * eps_v * k as f64 / 50.0;
            let mut cur = prev;
            cur[3].x += s;
            let (_, g) = friction_gradient(&cur, &prev, 1.0, 0.5, 1e4, 1e-3, eps_v);
            let f = -g.fixed_rows::<3>(9).into_owned();
            if s >= eps_v {
                assert!((f.norm() - 0.5 * lambda).abs() < 1e-9 * lambda);
                assert!(f.x < 0.0);
            }
            if k == 0 {
                assert_eq!(f.norm(), 0.0);
            }
        }
    }
}
