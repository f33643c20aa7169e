//! Differentiable geometric primitives: lengths, areas, dihedral angles and
//! point–plane signed distances, with first and second derivatives where the
//! energies need them.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::scalar::{lit, Real};

/// Skew-symmetric cross-product matrix, `skew(a) * b == a.cross(&b)`.
#[inline]
pub fn skew<T: Real>(a: &Vector3<T>) -> Matrix3<T> {
    Matrix3::new(
        T::zero(),
        -a.z,
        a.y,
        a.z,
        T::zero(),
        -a.x,
        -a.y,
        a.x,
        T::zero(),
    )
}

#[inline]
pub(crate) fn put_block<T: Real, const N: usize>(
    m: &mut SMatrix<T, N, N>,
    bi: usize,
    bj: usize,
    blk: &Matrix3<T>,
) {
    for r in 0..3 {
        for c in 0..3 {
            m[(3 * bi + r, 3 * bj + c)] += blk[(r, c)];
        }
    }
}

#[inline]
pub(crate) fn put_vec<T: Real, const N: usize>(v: &mut SVector<T, N>, bi: usize, x: &Vector3<T>) {
    for r in 0..3 {
        v[3 * bi + r] += x[r];
    }
}

/// Length of `x1 - x0` with gradient and Hessian over the 6 coordinates.
pub fn edge_length<T: Real>(
    x0: &Vector3<T>,
    x1: &Vector3<T>,
) -> (T, SVector<T, 6>, SMatrix<T, 6, 6>) {
    let e = x1 - x0;
    let l = e.norm();
    let mut g = SVector::<T, 6>::zeros();
    let mut h = SMatrix::<T, 6, 6>::zeros();
    if l <= T::zero() {
        return (l, g, h);
    }
    let u = e / l;
    put_vec(&mut g, 0, &(-u));
    put_vec(&mut g, 1, &u);
    let blk = (Matrix3::identity() - u * u.transpose()) / l;
    put_block(&mut h, 0, 0, &blk);
    put_block(&mut h, 1, 1, &blk);
    put_block(&mut h, 0, 1, &(-blk));
    put_block(&mut h, 1, 0, &(-blk));
    (l, g, h)
}

/// Norm of `(x1 - x0) x (x2 - x0)` (twice the triangle area) with its
/// gradient and Hessian over the 9 coordinates.
pub fn cross_norm<T: Real>(
    x0: &Vector3<T>,
    x1: &Vector3<T>,
    x2: &Vector3<T>,
) -> (T, SVector<T, 9>, SMatrix<T, 9, 9>) {
    let e1 = x1 - x0;
    let e2 = x2 - x0;
    let c = e1.cross(&e2);
    let n = c.norm();
    let mut g = SVector::<T, 9>::zeros();
    let mut h = SMatrix::<T, 9, 9>::zeros();
    if n <= T::zero() {
        return (n, g, h);
    }
    let ch = c / n;
    // dc = -[e2]x de1 + [e1]x de2 with de1 = dx1 - dx0, de2 = dx2 - dx0
    let j1 = -skew(&e2);
    let j2 = skew(&e1);
    let jc = [-(j1 + j2), j1, j2];
    for (b, jb) in jc.iter().enumerate() {
        put_vec(&mut g, b, &(jb.transpose() * ch));
    }
    let proj = (Matrix3::identity() - ch * ch.transpose()) / n;
    for (a, ja) in jc.iter().enumerate() {
        for (b, jb) in jc.iter().enumerate() {
            put_block(&mut h, a, b, &(ja.transpose() * proj * jb));
        }
    }
    // ch . (de1 x de2' + de1' x de2): the bilinear part in (e1, e2).
    let k = skew(&ch);
    let b12 = -k;
    let b21 = k;
    // map (e1, e2) blocks to (x0, x1, x2): e1 = x1 - x0, e2 = x2 - x0
    let s1 = [-1.0, 1.0, 0.0];
    let s2 = [-1.0, 0.0, 1.0];
    for a in 0..3 {
        for b in 0..3 {
            let w12 = lit::<T>(s1[a] * s2[b]);
            let w21 = lit::<T>(s2[a] * s1[b]);
            if w12 != T::zero() || w21 != T::zero() {
                put_block(&mut h, a, b, &(b12 * w12 + b21 * w21));
            }
        }
    }
    (n, g, h)
}

/// Triangle area.
#[inline]
pub fn triangle_area<T: Real>(x0: &Vector3<T>, x1: &Vector3<T>, x2: &Vector3<T>) -> T {
    (x1 - x0).cross(&(x2 - x0)).norm() * lit(0.5)
}

/// Signed dihedral angle of the hinge `(x0, x1 | x2, x3)`.
///
/// The hinge is made of triangle `(x0, x1, x2)` and triangle `(x1, x0, x3)`.
/// The angle is zero for a flat hinge and positive when the wings fold toward
/// the side the first triangle's normal points to.
pub fn dihedral_angle<T: Real>(
    x0: &Vector3<T>,
    x1: &Vector3<T>,
    x2: &Vector3<T>,
    x3: &Vector3<T>,
) -> T {
    let e = x1 - x0;
    let na = e.cross(&(x2 - x0));
    let nb = (x3 - x0).cross(&e);
    let l = e.norm();
    let sin_part = nb.cross(&na).dot(&e) / l;
    let cos_part = na.dot(&nb);
    sin_part.atan2(cos_part)
}

/// Gradient of [`dihedral_angle`] over the 12 hinge coordinates.
pub fn dihedral_gradient<T: Real>(
    x0: &Vector3<T>,
    x1: &Vector3<T>,
    x2: &Vector3<T>,
    x3: &Vector3<T>,
) -> SVector<T, 12> {
    let e = x1 - x0;
    let l2 = e.norm_squared();
    let l = l2.sqrt();
    let na = e.cross(&(x2 - x0));
    let nb = (x3 - x0).cross(&e);
    let g2 = na * (l / na.norm_squared());
    let g3 = nb * (l / nb.norm_squared());
    let ta = (x2 - x0).dot(&e) / l2;
    let tb = (x3 - x0).dot(&e) / l2;
    let one = T::one();
    let g0 = -(g2 * (one - ta) + g3 * (one - tb));
    let g1 = -(g2 * ta + g3 * tb);
    let mut g = SVector::<T, 12>::zeros();
    put_vec(&mut g, 0, &g0);
    put_vec(&mut g, 1, &g1);
    put_vec(&mut g, 2, &g2);
    put_vec(&mut g, 3, &g3);
    g
}

/// Hessian of [`dihedral_angle`], obtained by forward-mode differentiation of
/// the closed-form gradient.
pub fn dihedral_hessian(x: &[Vector3<f64>; 4]) -> SMatrix<f64, 12, 12> {
    use num_dual::Dual64;
    let mut h = SMatrix::<f64, 12, 12>::zeros();
    for col in 0..12 {
        let xd: Vec<Vector3<Dual64>> = (0..4)
            .map(|v| {
                Vector3::from_fn(|r, _| {
                    let eps = if 3 * v + r == col { 1.0 } else { 0.0 };
                    Dual64::new(x[v][r], eps)
                })
            })
            .collect();
        let g = dihedral_gradient(&xd[0], &xd[1], &xd[2], &xd[3]);
        for row in 0..12 {
            h[(row, col)] = g[row].eps;
        }
    }
    // symmetrize away rounding differences between columns
    (h + h.transpose()) * 0.5
}

/// Signed distance from `p` to the plane of triangle `(p1, p2, p3)` as the
/// ratio `D(x) / C(x)` with `D = det[p2-p1, p3-p1, p-p1]` and
/// `C = |(p2-p1) x (p3-p1)|`. Coordinates are ordered `[p1, p2, p3, p]`.
pub fn signed_distance<T: Real>(
    p1: &Vector3<T>,
    p2: &Vector3<T>,
    p3: &Vector3<T>,
    p: &Vector3<T>,
) -> T {
    let n = (p2 - p1).cross(&(p3 - p1));
    (p - p1).dot(&n) / n.norm()
}

/// Signed distance with gradient and Hessian over `[p1, p2, p3, p]`.
///
/// Returns `None` when the triangle is degenerate (`C(x) = 0`).
pub fn signed_distance_derivs<T: Real>(
    p1: &Vector3<T>,
    p2: &Vector3<T>,
    p3: &Vector3<T>,
    p: &Vector3<T>,
) -> Option<(T, SVector<T, 12>, SMatrix<T, 12, 12>)> {
    let e1 = p2 - p1;
    let e2 = p3 - p1;
    let r = p - p1;
    let nrm = e1.cross(&e2);

    // D and its derivatives, ordered (p1, p2, p3, p).
    let d_val = r.dot(&nrm);
    let de1 = e2.cross(&r);
    let de2 = r.cross(&e1);
    let dr = nrm;
    let mut gd = SVector::<T, 12>::zeros();
    put_vec(&mut gd, 0, &(-(de1 + de2 + dr)));
    put_vec(&mut gd, 1, &de1);
    put_vec(&mut gd, 2, &de2);
    put_vec(&mut gd, 3, &dr);
    // second derivatives in (e1, e2, r) then mapped through the selector
    let h_e1e2 = -skew(&r);
    let h_e1r = skew(&e2);
    let h_e2r = -skew(&e1);
    let zero = Matrix3::<T>::zeros();
    let hr = [
        [zero, h_e1e2, h_e1r],
        [h_e1e2.transpose(), zero, h_e2r],
        [h_e1r.transpose(), h_e2r.transpose(), zero],
    ];
    // selector S: (e1, e2, r) = S (p1, p2, p3, p)
    let sel: [[f64; 4]; 3] = [[-1.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 1.0, 0.0], [-1.0, 0.0, 0.0, 1.0]];
    let mut hd = SMatrix::<T, 12, 12>::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let mut blk = Matrix3::<T>::zeros();
            for (i, hri) in hr.iter().enumerate() {
                for (j, hrij) in hri.iter().enumerate() {
                    let w = sel[i][a] * sel[j][b];
                    if w != 0.0 {
                        blk += hrij * lit::<T>(w);
                    }
                }
            }
            put_block(&mut hd, a, b, &blk);
        }
    }

    let (c_val, gc9, hc9) = cross_norm(p1, p2, p3);
    if c_val <= T::zero() {
        return None;
    }
    let mut gc = SVector::<T, 12>::zeros();
    let mut hc = SMatrix::<T, 12, 12>::zeros();
    gc.fixed_rows_mut::<9>(0).copy_from(&gc9);
    hc.fixed_view_mut::<9, 9>(0, 0).copy_from(&hc9);

    let c2 = c_val * c_val;
    let c3 = c2 * c_val;
    let dist = d_val / c_val;
    let grad = gd / c_val - gc * (d_val / c2);
    let hess = hd / c_val
        - (gd * gc.transpose() + gc * gd.transpose()) / c2
        - hc * (d_val / c2)
        + gc * gc.transpose() * (lit::<T>(2.0) * d_val / c3);
    Some((dist, grad, hess))
}

/// Barycentric coordinates of the orthogonal projection of `p` onto the plane
/// of triangle `(p1, p2, p3)`.
pub fn projection_barycentric<T: Real>(
    p1: &Vector3<T>,
    p2: &Vector3<T>,
    p3: &Vector3<T>,
    p: &Vector3<T>,
) -> [T; 3] {
    let e1 = p2 - p1;
    let e2 = p3 - p1;
    let r = p - p1;
    let a11 = e1.dot(&e1);
    let a12 = e1.dot(&e2);
    let a22 = e2.dot(&e2);
    let b1 = e1.dot(&r);
    let b2 = e2.dot(&r);
    let det = a11 * a22 - a12 * a12;
    let beta1 = (a22 * b1 - a12 * b2) / det;
    let beta2 = (a11 * b2 - a12 * b1) / det;
    [T::one() - beta1 - beta2, beta1, beta2]
}

/// Circumcenter and circumradius of a triangle.
pub fn circumcircle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> (Vector3<f64>, f64) {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let n2 = n.norm_squared();
    if n2 <= 0.0 {
        let center = (a + b + c) / 3.0;
        let r = [a, b, c].iter().map(|p| (*p - center).norm()).fold(0.0, f64::max);
        return (center, r);
    }
    let offset = (n.cross(&ab) * ac.norm_squared() + ac.cross(&n) * ab.norm_squared()) / (2.0 * n2);
    (a + offset, offset.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn dihedral_positive_toward_first_normal() {
        let x0 = v(0.0, 0.0, 0.0);
        let x1 = v(1.0, 0.0, 0.0);
        let x2 = v(0.0, 1.0, 0.0);
        // first triangle normal is +z; lift the second wing toward +z
        let phi: f64 = 0.4;
        let x3 = v(0.0, -phi.cos(), phi.sin());
        let t = dihedral_angle(&x0, &x1, &x2, &x3);
        assert!((t - phi).abs() < 1e-14, "{t}");
        let flat = dihedral_angle(&x0, &x1, &x2, &v(0.3, -1.0, 0.0));
        assert!(flat.abs() < 1e-15);
    }

    #[test]
    fn dihedral_mirror_negates() {
        let x = [v(0.0, 0.0, 0.0), v(1.0, 0.1, 0.0), v(0.2, 1.0, 0.3), v(0.1, -0.8, 0.5)];
        let t = dihedral_angle(&x[0], &x[1], &x[2], &x[3]);
        let m = x.map(|p| v(p.x, p.y, -p.z));
        let tm = dihedral_angle(&m[0], &m[1], &m[2], &m[3]);
        assert!((t + tm).abs() < 1e-14);
    }

    #[test]
    fn dihedral_right_angle_fold() {
        let x0 = v(0.0, 0.0, 0.0);
        let x1 = v(1.0, 0.0, 0.0);
        let x2 = v(0.0, 1.0, 0.0);
        let x3 = v(0.0, 0.0, 1.0);
        let t = dihedral_angle(&x0, &x1, &x2, &x3);
        assert!((t - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn circumcircle_right_triangle() {
        let (c, r) = circumcircle(&v(0.0, 0.0, 0.0), &v(2.0, 0.0, 0.0), &v(0.0, 2.0, 0.0));
        assert!((c - v(1.0, 1.0, 0.0)).norm() < 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn barycentric_reconstructs_projection() {
        let p1 = v(0.0, 0.0, 0.0);
        let p2 = v(1.0, 0.0, 0.0);
        let p3 = v(0.0, 1.0, 0.0);
        let b = projection_barycentric(&p1, &p2, &p3, &v(0.25, 0.5, 0.7));
        assert!((b[0] - 0.25).abs() < 1e-15 && (b[1] - 0.25).abs() < 1e-15 && (b[2] - 0.5).abs() < 1e-15);
    }
}
