use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Result, SimError};
use crate::scalar::{lit, Real};

/// Tetrahedral solid with per-element rest frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh<T: Real> {
    pub vertices: Vec<Vector3<T>>,
    pub tets: Vec<[usize; 4]>,
    /// Inverse of the rest edge matrix `[x1-x0, x2-x0, x3-x0]`.
    pub rest_shape_inverses: Vec<Matrix3<T>>,
    pub rest_volumes: Vec<T>,
    /// Boundary faces, oriented with outward normals.
    pub surface: Vec<[usize; 3]>,
}

impl<T: Real> TetMesh<T> {
    pub fn new(vertices: Vec<Vector3<T>>, tets: Vec<[usize; 4]>) -> Result<Self> {
        let nv = vertices.len();
        if let Some(t) = tets.iter().position(|t| t.iter().any(|&i| i >= nv)) {
            return Err(SimError::Connectivity(format!("tet {t} indexes past vertex count")));
        }
        let surface = boundary_faces(&vertices, &tets);
        let mut mesh = TetMesh {
            vertices,
            tets,
            rest_shape_inverses: Vec::new(),
            rest_volumes: Vec::new(),
            surface,
        };
        mesh.compute_rest_config()?;
        Ok(mesh)
    }

    pub fn compute_rest_config(&mut self) -> Result<()> {
        let mut inv = Vec::with_capacity(self.tets.len());
        let mut vol = Vec::with_capacity(self.tets.len());
        for (k, t) in self.tets.iter().enumerate() {
            let dm = edge_matrix(&self.vertices, t);
            let v = dm.determinant() / lit(6.0);
            if !(v > T::zero()) {
                return Err(SimError::DegenerateTet(k));
            }
            inv.push(dm.try_inverse().ok_or(SimError::DegenerateTet(k))?);
            vol.push(v);
        }
        self.rest_shape_inverses = inv;
        self.rest_volumes = vol;
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices that lie on the boundary surface, sorted.
    pub fn surface_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.surface.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub(crate) fn edge_matrix<T: Real>(x: &[Vector3<T>], t: &[usize; 4]) -> Matrix3<T> {
    Matrix3::from_columns(&[x[t[1]] - x[t[0]], x[t[2]] - x[t[0]], x[t[3]] - x[t[0]]])
}

fn boundary_faces<T: Real>(x: &[Vector3<T>], tets: &[[usize; 4]]) -> Vec<[usize; 3]> {
    let mut faces: BTreeMap<[usize; 3], (usize, [usize; 3], usize)> = BTreeMap::new();
    for t in tets {
        for skip in 0..4 {
            let f: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| t[k]).collect();
            let face = [f[0], f[1], f[2]];
            let mut key = face;
            key.sort_unstable();
            faces.entry(key).and_modify(|e| e.0 += 1).or_insert((1, face, t[skip]));
        }
    }
    faces
        .values()
        .filter(|(count, _, _)| *count == 1)
        .map(|&(_, f, opposite)| {
            let n = (x[f[1]] - x[f[0]]).cross(&(x[f[2]] - x[f[0]]));
            if n.dot(&(x[opposite] - x[f[0]])) > T::zero() {
                [f[0], f[2], f[1]]
            } else {
                f
            }
        })
        .collect()
}

/// Axis-aligned box of `n[0] x n[1] x n[2]` vertices spanning `size`, with
/// its minimum corner at `origin`. Each cube is split into six tetrahedra
/// around its main diagonal.
pub fn build_block(n: [usize; 3], size: Vector3<f64>, origin: Vector3<f64>) -> Result<TetMesh<f64>> {
    if n.iter().any(|&k| k < 2) || size.iter().any(|&s| !(s > 0.0)) {
        return Err(SimError::InvalidGrid(format!("block needs >= 2 vertices per axis and positive size, got {n:?} {size:?}")));
    }
    let idx = |i: usize, j: usize, k: usize| (k * n[1] + j) * n[0] + i;
    let mut vertices = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                vertices.push(
                    origin
                        + Vector3::new(
                            size.x * i as f64 / (n[0] - 1) as f64,
                            size.y * j as f64 / (n[1] - 1) as f64,
                            size.z * k as f64 / (n[2] - 1) as f64,
                        ),
                );
            }
        }
    }
    const PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::new();
    for k in 0..n[2] - 1 {
        for j in 0..n[1] - 1 {
            for i in 0..n[0] - 1 {
                for path in PATHS {
                    let mut c = [i, j, k];
                    let mut t = [idx(c[0], c[1], c[2]); 4];
                    for (step, &axis) in path.iter().enumerate() {
                        c[axis] += 1;
                        t[step + 1] = idx(c[0], c[1], c[2]);
                    }
                    if edge_matrix(&vertices, &t).determinant() < 0.0 {
                        t.swap(2, 3);
                    }
                    tets.push(t);
                }
            }
        }
    }
    TetMesh::new(vertices, tets)
}
