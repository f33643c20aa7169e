use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Result, SimError};

/// Uniform grid over triangle circumcenters.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell_size: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl SpatialHash {
    /// Hashes item `k` at `centers[k]`. The cell must be wider than the
    /// largest circumradius so that a 3x3x3 query around any point of a
    /// triangle reaches its center.
    pub fn new(cell_size: f64, centers: &[Vector3<f64>], radii: &[f64]) -> Result<Self> {
        let required = radii.iter().copied().fold(0.0, f64::max);
        if !(cell_size > required) || !cell_size.is_finite() {
            return Err(SimError::HashCellTooSmall { cell: cell_size, required });
        }
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (k, c) in centers.iter().enumerate() {
            cells.entry(Self::cell_of(cell_size, c)).or_default().push(k);
        }
        Ok(SpatialHash { cell_size, cells })
    }

    fn cell_of(size: f64, p: &Vector3<f64>) -> [i64; 3] {
        [(p.x / size).floor() as i64, (p.y / size).floor() as i64, (p.z / size).floor() as i64]
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Items hashed in the 27 cells around `p`, in a fixed order.
    pub fn query(&self, p: &Vector3<f64>, out: &mut Vec<usize>) {
        out.clear();
        let c = Self::cell_of(self.cell_size, p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(items) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        out.extend_from_slice(items);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_cells() {
        let c = [Vector3::zeros()];
        assert!(SpatialHash::new(0.5, &c, &[1.0]).is_err());
        assert!(SpatialHash::new(1.5, &c, &[1.0]).is_ok());
    }

    #[test]
    fn neighbours_found() {
        let c = [Vector3::new(0.1, 0.1, 0.1), Vector3::new(5.0, 5.0, 5.0)];
        let h = SpatialHash::new(1.0, &c, &[0.5, 0.5]).unwrap();
        let mut out = Vec::new();
        h.query(&Vector3::new(-0.5, 0.9, 1.2), &mut out);
        assert_eq!(out, vec![0]);
    }
}
