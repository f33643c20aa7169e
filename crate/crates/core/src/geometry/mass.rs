//! Diagonal (lumped) mass.

use super::{TetMesh, TriShellMesh};
use crate::error::{Result, SimError};
use crate::scalar::{lit, Real};

/// Per-vertex mass of a shell: each triangle gives a third of
/// `density * thickness * area` to each of its corners.
pub fn shell_vertex_masses<T: Real>(mesh: &TriShellMesh<T>, density: T) -> Vec<T> {
    let mut m = vec![T::zero(); mesh.num_vertices()];
    let third = lit::<T>(1.0 / 3.0);
    for (tri, &area) in mesh.triangles.iter().zip(&mesh.rest_areas) {
        let share = density * mesh.thickness * area * third;
        for &v in tri {
            m[v] += share;
        }
    }
    m
}

/// Per-vertex mass of a tet mesh: a quarter of `density * volume` per corner.
pub fn tet_vertex_masses<T: Real>(mesh: &TetMesh<T>, density: T) -> Vec<T> {
    let mut m = vec![T::zero(); mesh.num_vertices()];
    let quarter = lit::<T>(0.25);
    for (tet, &vol) in mesh.tets.iter().zip(&mesh.rest_volumes) {
        let share = density * vol * quarter;
        for &v in tet {
            m[v] += share;
        }
    }
    m
}

/// A meshed body contributing mass.
pub enum MassSource<'a> {
    Shell { mesh: &'a TriShellMesh<f64>, density: f64 },
    Solid { mesh: &'a TetMesh<f64>, density: f64 },
    /// Kinematic geometry: carries a nominal unit mass per vertex; its DOFs
    /// are always fixed so the value never enters the dynamics.
    Kinematic { vertices: usize },
}

/// Diagonal mass matrix over all scalar DOFs, bodies concatenated in order.
pub fn lumped_mass(sources: &[MassSource<'_>]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for src in sources {
        let per_vertex = match src {
            MassSource::Shell { mesh, density } => {
                check_density(*density)?;
                shell_vertex_masses(mesh, *density)
            }
            MassSource::Solid { mesh, density } => {
                check_density(*density)?;
                tet_vertex_masses(mesh, *density)
            }
            MassSource::Kinematic { vertices } => vec![1.0; *vertices],
        };
        for m in per_vertex {
            if !(m > 0.0) {
                return Err(SimError::ZeroMass(out.len() / 3));
            }
            out.extend_from_slice(&[m, m, m]);
        }
    }
    Ok(out)
}

fn check_density(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(SimError::Material(format!("density must be positive, got {rho}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_shell, GridSpec};
    use nalgebra::Vector3;

    #[test]
    fn single_tet_equal_split() {
        // right tet with volume 1e-6 m^3
        let a = (6.0e-6f64).cbrt();
        let mesh = TetMesh::new(
            vec![
                Vector3::zeros(),
                Vector3::new(a, 0.0, 0.0),
                Vector3::new(0.0, a, 0.0),
                Vector3::new(0.0, 0.0, a),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        let m = tet_vertex_masses(&mesh, 1000.0);
        for mi in m {
            assert!((mi - 2.5e-4).abs() < 1e-15);
        }
    }

    #[test]
    fn shell_corner_pattern() {
        // 2x2 grid of area 1 m^2, rho * t chosen so the sheet weighs 4 g
        let mesh = build_shell(GridSpec { rows: 2, cols: 2, spacing: 1.0 }, 1e-3).unwrap();
        let m = shell_vertex_masses(&mesh, 4.0);
        let total: f64 = m.iter().sum();
        assert!((total - 4e-3).abs() < 1e-15);
        // vertices on the split diagonal touch two triangles
        let incidence: Vec<usize> = (0..4).map(|v| mesh.triangles.iter().filter(|t| t.contains(&v)).count()).collect();
        for v in 0..4 {
            assert!((m[v] - 4e-3 / 6.0 * incidence[v] as f64).abs() < 1e-16);
        }
        // going around the square the masses alternate 1:2
        let ring = [m[0], m[1], m[3], m[2]];
        for k in 0..4 {
            let r = ring[k] / ring[(k + 1) % 4];
            assert!((r - 2.0).abs() < 1e-12 || (r - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn lumping_conserves_mass() {
        let mesh = build_shell(GridSpec { rows: 6, cols: 9, spacing: 0.01 }, 2e-4).unwrap();
        let m = lumped_mass(&[MassSource::Shell { mesh: &mesh, density: 800.0 }]).unwrap();
        let total: f64 = m.iter().step_by(3).sum();
        let expected = 800.0 * 2e-4 * 0.05 * 0.08;
        assert!((total - expected).abs() < 1e-15);
        assert!(lumped_mass(&[MassSource::Shell { mesh: &mesh, density: 0.0 }]).is_err());
    }

    #[test]
    fn isolated_vertex_rejected() {
        let mut mesh = build_shell(GridSpec { rows: 2, cols: 2, spacing: 1.0 }, 1e-3).unwrap();
        mesh.vertices.push(Vector3::new(5.0, 5.0, 5.0));
        let err = lumped_mass(&[MassSource::Shell { mesh: &mesh, density: 1.0 }]).unwrap_err();
        assert!(matches!(err, SimError::ZeroMass(4)));
    }
}
