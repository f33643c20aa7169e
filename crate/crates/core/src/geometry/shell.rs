use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::prim::{dihedral_angle, triangle_area};
use crate::error::{Result, SimError};
use crate::scalar::{lit, Real};

/// Regular grid description: `rows x cols` vertices with square cells of
/// edge length `spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
}

/// Triangulated thin shell with its rest configuration.
///
/// Hinges are stored as `[e0, e1, a, b]`: the shared edge `e0 -> e1`, the
/// vertex `a` opposite the edge in triangle `(e0, e1, a)` and the vertex `b`
/// opposite the edge in triangle `(e1, e0, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriShellMesh<T: Real> {
    pub vertices: Vec<Vector3<T>>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub hinges: Vec<[usize; 4]>,
    pub rest_edge_lengths: Vec<T>,
    pub rest_areas: Vec<T>,
    pub hinge_rest_lengths: Vec<T>,
    /// One third of the mean altitude of the two triangles over the hinge edge.
    pub rest_heights: Vec<T>,
    pub rest_angles: Vec<T>,
    /// Used for mass only.
    pub thickness: T,
}

impl<T: Real> TriShellMesh<T> {
    /// Builds edge and hinge topology and the rest configuration from the
    /// given vertex positions.
    pub fn from_triangles(
        vertices: Vec<Vector3<T>>,
        triangles: Vec<[usize; 3]>,
        thickness: T,
    ) -> Result<Self> {
        let nv = vertices.len();
        // directed edge -> (triangle, opposite vertex)
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(SimError::Connectivity(format!("triangle {t} indexes past vertex count")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(SimError::Connectivity(format!("triangle {t} repeats a vertex")));
            }
            for k in 0..3 {
                let key = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(key, tri[(k + 2) % 3]).is_some() {
                    return Err(SimError::Connectivity(format!(
                        "directed edge {key:?} used twice (non-manifold or inconsistent orientation)"
                    )));
                }
            }
        }
        let mut edges = Vec::new();
        let mut hinges = Vec::new();
        for (&(i, j), &a) in &directed {
            if i < j {
                edges.push([i, j]);
                if let Some(&b) = directed.get(&(j, i)) {
                    hinges.push([i, j, a, b]);
                }
            } else if !directed.contains_key(&(j, i)) {
                edges.push([j, i]);
            }
        }
        edges.sort_unstable();
        let mut mesh = TriShellMesh {
            vertices,
            triangles,
            edges,
            hinges,
            rest_edge_lengths: Vec::new(),
            rest_areas: Vec::new(),
            hinge_rest_lengths: Vec::new(),
            rest_heights: Vec::new(),
            rest_angles: Vec::new(),
            thickness,
        };
        mesh.compute_rest_config()?;
        Ok(mesh)
    }

    /// Recomputes every rest quantity from the current vertex positions.
    pub fn compute_rest_config(&mut self) -> Result<()> {
        let x = &self.vertices;
        let mut areas = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = triangle_area(&x[tri[0]], &x[tri[1]], &x[tri[2]]);
            if !(a > T::zero()) {
                return Err(SimError::DegenerateTriangle(t));
            }
            areas.push(a);
        }
        let mut lengths = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let l = (x[e[1]] - x[e[0]]).norm();
            if !(l > T::zero()) {
                return Err(SimError::Connectivity(format!("zero-length edge {e:?}")));
            }
            lengths.push(l);
        }
        let mut hl = Vec::with_capacity(self.hinges.len());
        let mut hh = Vec::with_capacity(self.hinges.len());
        let mut ha = Vec::with_capacity(self.hinges.len());
        for h in &self.hinges {
            let (x0, x1, x2, x3) = (&x[h[0]], &x[h[1]], &x[h[2]], &x[h[3]]);
            let l = (x1 - x0).norm();
            let area_a = triangle_area(x0, x1, x2);
            let area_b = triangle_area(x1, x0, x3);
            // altitude = 2 area / |e|; one third of their mean
            let height = (area_a + area_b) / (l * lit(3.0));
            hl.push(l);
            hh.push(height);
            ha.push(dihedral_angle(x0, x1, x2, x3));
        }
        self.rest_areas = areas;
        self.rest_edge_lengths = lengths;
        self.hinge_rest_lengths = hl;
        self.rest_heights = hh;
        self.rest_angles = ha;
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Current dihedral angle of every hinge for the given positions.
    pub fn hinge_angles(&self, x: &[Vector3<T>]) -> Vec<T> {
        self.hinges
            .iter()
            .map(|h| dihedral_angle(&x[h[0]], &x[h[1]], &x[h[2]], &x[h[3]]))
            .collect()
    }
}

/// Builds a regular grid with a per-vertex placement function `(row, col) -> position`.
///
/// Cells are split along alternating diagonals so that bending response is
/// not biased toward one diagonal direction.
pub fn build_shell_mapped<F>(rows: usize, cols: usize, thickness: f64, place: F) -> Result<TriShellMesh<f64>>
where
    F: Fn(usize, usize) -> Vector3<f64>,
{
    if rows < 2 || cols < 2 {
        return Err(SimError::InvalidGrid(format!("need at least 2x2 vertices, got {rows}x{cols}")));
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut vertices = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            vertices.push(place(r, c));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (rows - 1) * (cols - 1));
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            let a = idx(r, c);
            let b = idx(r, c + 1);
            let cc = idx(r + 1, c);
            let d = idx(r + 1, c + 1);
            if (r + c) % 2 == 0 {
                triangles.push([a, b, d]);
                triangles.push([a, d, cc]);
            } else {
                triangles.push([a, b, cc]);
                triangles.push([b, d, cc]);
            }
        }
    }
    TriShellMesh::from_triangles(vertices, triangles, thickness)
}

/// Flat regular sheet in the `z = 0` plane with `cols` vertices along `x`
/// and `rows` along `y`.
pub fn build_shell(grid: GridSpec, thickness: f64) -> Result<TriShellMesh<f64>> {
    if !(grid.spacing > 0.0) || !grid.spacing.is_finite() {
        return Err(SimError::InvalidGrid(format!("spacing must be positive, got {}", grid.spacing)));
    }
    let s = grid.spacing;
    build_shell_mapped(grid.rows, grid.cols, thickness, |r, c| {
        Vector3::new(c as f64 * s, r as f64 * s, 0.0)
    })
}
