use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};

use crate::error::{Result, SimError};

/// Symmetric sparse matrix in triplet form; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct SparseSystem {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        SparseSystem { n, triplets: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.triplets.push((i, j, v));
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, &v) in d.iter().enumerate() {
            if v != 0.0 {
                self.triplets.push((i, i, v));
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        y
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self.triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t).map_err(|_| SimError::LinearSolve)
    }
}

/// Zeroes the rows and columns of fixed DOFs, puts 1 on their diagonal and
/// zeroes their right-hand side.
pub fn fix_dofs(system: &mut SparseSystem, rhs: &mut [f64], fixed: &[bool]) {
    system.triplets.retain(|&(i, j, _)| !fixed[i] && !fixed[j]);
    for (i, &f) in fixed.iter().enumerate() {
        if f {
            system.triplets.push((i, i, 1.0));
            rhs[i] = 0.0;
        }
    }
}

fn residual_ok(system: &SparseSystem, u: &[f64], b: &[f64]) -> bool {
    let au = system.mul(u);
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = au.iter().zip(b).fold(0.0f64, |m, (a, bb)| m.max((a - bb).abs()));
    r.is_finite() && r <= 1e-10 * (1.0 + bmax) * 1e3_f64.max(1.0)
}

/// Sparse Cholesky solve of an SPD system (lower triangle is read).
pub fn solve_spd(system: &SparseSystem, b: &[f64]) -> Result<Vec<f64>> {
    let a = system.to_faer()?;
    let llt = a.sp_cholesky(Side::Lower).map_err(|_| SimError::LinearSolve)?;
    let rhs = Col::from_fn(b.len(), |i| b[i]);
    let x = llt.solve(&rhs);
    let u: Vec<f64> = (0..b.len()).map(|i| x[i]).collect();
    if u.iter().all(|v| v.is_finite()) {
        Ok(u)
    } else {
        Err(SimError::LinearSolve)
    }
}

/// Solve of a symmetric, possibly indefinite system: Cholesky first, sparse
/// LU with partial pivoting otherwise.
pub fn solve_symmetric(system: &SparseSystem, b: &[f64]) -> Result<Vec<f64>> {
    if let Ok(u) = solve_spd(system, b) {
        return Ok(u);
    }
    let a = system.to_faer()?;
    let lu = a.sp_lu().map_err(|_| SimError::LinearSolve)?;
    let rhs = Col::from_fn(b.len(), |i| b[i]);
    let x = lu.solve(&rhs);
    let u: Vec<f64> = (0..b.len()).map(|i| x[i]).collect();
    if residual_ok(system, &u, b) {
        Ok(u)
    } else {
        Err(SimError::LinearSolve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let mut s = SparseSystem::new(3);
        s.add_diagonal(&[1.0, 1.0, 1.0]);
        assert_eq!(solve_spd(&s, &[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn all_fixed_gives_zero_update() {
        let mut s = SparseSystem::new(2);
        s.push(0, 0, 2.0);
        s.push(0, 1, 1.0);
        s.push(1, 0, 1.0);
        s.push(1, 1, 2.0);
        let mut b = vec![1.0, 1.0];
        fix_dofs(&mut s, &mut b, &[true, true]);
        assert_eq!(solve_spd(&s, &b).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn indefinite_falls_back_to_lu() {
        let mut s = SparseSystem::new(2);
        s.push(0, 0, 1.0);
        s.push(1, 1, -4.0);
        assert!(solve_spd(&s, &[1.0, 1.0]).is_err());
        let u = solve_symmetric(&s, &[1.0, 1.0]).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-15 && (u[1] + 0.25).abs() < 1e-15);
    }
}
