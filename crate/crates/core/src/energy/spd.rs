use nalgebra::{DMatrix, SMatrix};

use crate::error::{Result, SimError};
use crate::scalar::{lit, Real};

/// Smallest eigenvalue kept by [`project_spd`].
pub const SPD_EPS: f64 = 1e-10;

const SYM_TOL: f64 = 1e-9;

fn asymmetry<T: Real>(h: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    let scale = T::one().max(h.amax());
    for i in 0..h.nrows() {
        for j in 0..i {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs() / scale);
        }
    }
    worst
}

/// Eigenvalue-clamped projection of a symmetric matrix onto
/// `{A : A >= SPD_EPS * I}`. Matrices already in that set are returned
/// untouched.
pub fn project_spd_dyn<T: Real>(h: &DMatrix<T>) -> Result<DMatrix<T>> {
    let asym = asymmetry(h);
    if asym > lit(SYM_TOL) {
        return Err(SimError::NotSymmetric(nalgebra::try_convert(asym).unwrap_or(f64::NAN)));
    }
    let sym = (h + h.transpose()) * lit::<T>(0.5);
    let eps = lit::<T>(SPD_EPS);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= eps) {
        return Ok(h.clone());
    }
    let clamped = eig.eigenvalues.map(|l| l.max(eps));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    Ok((&out + out.transpose()) * lit::<T>(0.5))
}

/// Fixed-size version of [`project_spd_dyn`].
pub fn project_spd<T: Real, const N: usize>(h: &SMatrix<T, N, N>) -> Result<SMatrix<T, N, N>> {
    let d = DMatrix::from_column_slice(N, N, h.as_slice());
    let p = project_spd_dyn(&d)?;
    Ok(SMatrix::from_column_slice(p.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Matrix3};

    #[test]
    fn identity_fixed_point() {
        let i = Matrix3::<f64>::identity();
        assert_eq!(project_spd(&i).unwrap(), i);
    }

    #[test]
    fn diagonal_clamp() {
        let p = project_spd(&Matrix2::new(1.0, 0.0, 0.0, -2.0)).unwrap();
        assert!((p - Matrix2::new(1.0, 0.0, 0.0, 1e-10)).amax() < 1e-15);
    }

    #[test]
    fn asymmetric_rejected() {
        assert!(matches!(project_spd(&Matrix2::new(1.0, 1.0, 0.0, 1.0)), Err(SimError::NotSymmetric(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let p = project_spd(&Matrix2::<f32>::new(0.0, 1.0, 1.0, 0.0)).unwrap();
        assert!(p.symmetric_eigen().eigenvalues.min() >= 0.0);
    }
}
