use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::EnergyEval;
use crate::geometry::prim::skew;
use crate::scalar::{lit, Real};

fn cofactor<T: Real>(f: &Matrix3<T>) -> Matrix3<T> {
    let (f0, f1, f2) = (f.column(0).into_owned(), f.column(1).into_owned(), f.column(2).into_owned());
    Matrix3::from_columns(&[f1.cross(&f2), f2.cross(&f0), f0.cross(&f1)])
}

fn vec9<T: Real>(m: &Matrix3<T>) -> SVector<T, 9> {
    SVector::<T, 9>::from_column_slice(m.as_slice())
}

/// Stable Neo-Hookean energy density over the column-major entries of `F`:
/// `mu/2 (I_C - 3) - mu (J - 1) + lambda/2 (J - 1)^2`.
///
/// Total for any finite `F`, including inverted and flat elements.
pub fn neo_hookean<T: Real>(f: &Matrix3<T>, mu: T, lambda: T) -> EnergyEval<T, 9> {
    let half = lit::<T>(0.5);
    let j = f.determinant();
    let jm1 = j - T::one();
    let ic = f.norm_squared();
    let value = mu * half * (ic - lit(3.0)) - mu * jm1 + lambda * half * jm1 * jm1;

    let cof = cofactor(f);
    let g = vec9(&cof);
    let coef = lambda * jm1 - mu;
    let gradient = vec9(f) * mu + g * coef;

    let mut hessian = SMatrix::<T, 9, 9>::identity() * mu + g * g.transpose() * lambda;
    let cols = [f.column(0).into_owned(), f.column(1).into_owned(), f.column(2).into_owned()];
    let blocks = [(0, 1, -skew(&cols[2])), (0, 2, skew(&cols[1])), (1, 2, -skew(&cols[0]))];
    for (a, b, blk) in blocks {
        let s = blk * coef;
        for r in 0..3 {
            for c in 0..3 {
                hessian[(3 * a + r, 3 * b + c)] += s[(r, c)];
                hessian[(3 * b + c, 3 * a + r)] += s[(r, c)];
            }
        }
    }
    EnergyEval { value, gradient, hessian, projected: false, degenerate: false }
}

/// Derivatives of the first Piola stress with respect to `mu` and `lambda`,
/// each flattened column-major.
pub fn neo_hookean_lame_derivs<T: Real>(f: &Matrix3<T>) -> (SVector<T, 9>, SVector<T, 9>) {
    let cof = cofactor(f);
    let jm1 = f.determinant() - T::one();
    (vec9(&(f - cof)), vec9(&(cof * jm1)))
}

/// `dvec(F)/dx` for `F = Ds Dm^-1`, a 9 x 12 matrix over `[x0, x1, x2, x3]`.
pub fn tet_deformation_jacobian<T: Real>(dm_inv: &Matrix3<T>) -> SMatrix<T, 9, 12> {
    let mut d = SMatrix::<T, 9, 12>::zeros();
    for j in 0..3 {
        let s = dm_inv[(0, j)] + dm_inv[(1, j)] + dm_inv[(2, j)];
        for i in 0..3 {
            let row = i + 3 * j;
            d[(row, i)] = -s;
            for k in 0..3 {
                d[(row, 3 * (k + 1) + i)] = dm_inv[(k, j)];
            }
        }
    }
    d
}

/// Energy `V * psi(F)` of one tetrahedron over its 12 coordinates.
pub fn tet_energy<T: Real>(
    x: &[Vector3<T>; 4],
    dm_inv: &Matrix3<T>,
    volume: T,
    mu: T,
    lambda: T,
) -> EnergyEval<T, 12> {
    let ds = Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]]);
    let f = ds * dm_inv;
    let e = neo_hookean(&f, mu, lambda);
    let d = tet_deformation_jacobian(dm_inv);
    EnergyEval {
        value: e.value * volume,
        gradient: d.transpose() * e.gradient * volume,
        hessian: d.transpose() * e.hessian * d * volume,
        projected: false,
        degenerate: false,
    }
}
