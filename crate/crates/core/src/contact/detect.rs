use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{ContactPair, ContactParams, MaterialClass, SpatialHash};
use crate::error::Result;
use crate::geometry::prim::{circumcircle, projection_barycentric, signed_distance};

const BARY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    /// Thin shell: two-sided, self-contact away from the 2-ring.
    Shell,
    /// Boundary of a volumetric body: one-sided, outward normals.
    Solid,
    /// Kinematic obstacle: one-sided, its vertices are never queried.
    Static,
}

/// Triangles and query vertices of one object, in global vertex indices.
#[derive(Debug, Clone)]
pub struct ContactSurface {
    pub kind: SurfaceKind,
    pub class: MaterialClass,
    pub manipulator: bool,
    pub triangles: Vec<[usize; 3]>,
    pub vertices: Vec<usize>,
    /// Shell only: per vertex, itself and its edge neighbours.
    ring: BTreeMap<usize, Vec<usize>>,
}

impl ContactSurface {
    pub fn new(kind: SurfaceKind, class: MaterialClass, manipulator: bool, triangles: Vec<[usize; 3]>) -> Self {
        let mut verts = BTreeSet::new();
        let mut ring: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for t in &triangles {
            for k in 0..3 {
                verts.insert(t[k]);
                if kind == SurfaceKind::Shell {
                    let r = ring.entry(t[k]).or_default();
                    r.insert(t[k]);
                    r.insert(t[(k + 1) % 3]);
                    r.insert(t[(k + 2) % 3]);
                }
            }
        }
        let vertices = if kind == SurfaceKind::Static { Vec::new() } else { verts.into_iter().collect() };
        let ring = ring.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
        ContactSurface { kind, class, manipulator, triangles, vertices, ring }
    }

    fn excludes(&self, v: usize, tri: &[usize; 3]) -> bool {
        match self.ring.get(&v) {
            Some(r) => tri.iter().any(|i| r.binary_search(i).is_ok()),
            None => false,
        }
    }

    fn two_sided(&self) -> bool {
        self.kind == SurfaceKind::Shell
    }
}

fn vtx(x: &[f64], i: usize) -> Vector3<f64> {
    Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])
}

struct Candidate {
    surface: usize,
    tri: usize,
    d: f64,
}

/// Whether `(vertex, surface, triangle)` may interact at all.
fn admissible(surfaces: &[ContactSurface], own: usize, v: usize, s: usize, tri: &[usize; 3]) -> bool {
    if tri.contains(&v) {
        return false;
    }
    if s == own {
        return surfaces[s].kind == SurfaceKind::Shell && !surfaces[s].excludes(v, tri);
    }
    true
}

fn inside(b: &[f64; 3]) -> bool {
    b.iter().all(|&c| c >= -BARY_TOL)
}

fn in_window(surface: &ContactSurface, d: f64, threshold: f64, eps_r: f64) -> bool {
    if surface.two_sided() {
        d.abs() < threshold
    } else {
        d > -eps_r && d < threshold
    }
}

fn owner_map(surfaces: &[ContactSurface]) -> BTreeMap<usize, usize> {
    let mut own = BTreeMap::new();
    for (s, surf) in surfaces.iter().enumerate() {
        for &v in &surf.vertices {
            own.insert(v, s);
        }
    }
    own
}

/// Closest admissible triangle per surface whose projection contains `v`.
fn closest_per_surface(
    surfaces: &[ContactSurface],
    own: usize,
    v: usize,
    x: &[f64],
    candidates: impl Iterator<Item = (usize, usize)>,
) -> BTreeMap<usize, Candidate> {
    let p = vtx(x, v);
    let mut best: BTreeMap<usize, Candidate> = BTreeMap::new();
    for (s, t) in candidates {
        let tri = &surfaces[s].triangles[t];
        if !admissible(surfaces, own, v, s, tri) {
            continue;
        }
        let (a, b, c) = (vtx(x, tri[0]), vtx(x, tri[1]), vtx(x, tri[2]));
        if (b - a).cross(&(c - a)).norm_squared() <= 0.0 {
            continue;
        }
        let bary = projection_barycentric(&a, &b, &c, &p);
        if !inside(&bary) {
            continue;
        }
        let d = signed_distance(&a, &b, &c, &p);
        let better = match best.get(&s) {
            Some(cur) => d.abs() < cur.d.abs() || (d.abs() == cur.d.abs() && t < cur.tri),
            None => true,
        };
        if better {
            best.insert(s, Candidate { surface: s, tri: t, d });
        }
    }
    best
}

fn make_pair(
    surfaces: &[ContactSurface],
    own: usize,
    v: usize,
    cand: &Candidate,
    side: f64,
    x: &[f64],
    x_prev: &[f64],
    params: &ContactParams,
) -> ContactPair {
    let surf = &surfaces[cand.surface];
    let tri = surf.triangles[cand.tri];
    let (a, b, c) = (vtx(x, tri[0]), vtx(x, tri[1]), vtx(x, tri[2]));
    let n = (b - a).cross(&(c - a)).normalize() * side;
    let q = [vtx(x_prev, tri[0]), vtx(x_prev, tri[1]), vtx(x_prev, tri[2]), vtx(x_prev, v)];
    let d_prev = signed_distance(&q[0], &q[1], &q[2], &q[3]) * side;
    ContactPair {
        vertex: v,
        surface: cand.surface,
        triangle_index: cand.tri,
        triangle: tri,
        side,
        locked_normal: n,
        lambda: params.k_r * (params.eps_r - d_prev).max(0.0),
        anchor: projection_barycentric(&q[0], &q[1], &q[2], &q[3]),
        mu: params.friction.get(surfaces[own].class, surf.class),
        classes: (surfaces[own].class, surf.class),
        manipulator: surfaces[own].manipulator || surf.manipulator,
    }
}

/// Updates the pair set for positions `x` (manipulators already moved),
/// with `x_prev` the last converged state.
///
/// Existing pairs keep their triangle and locked normal while the vertex
/// still projects inside it; a pair whose projection left its triangle moves
/// to the closest neighbouring triangle of the same surface on the same side,
/// or is released. New pairs are created within `1.5 eps_r`; for two-sided
/// shells the side is taken from `x_prev`.
pub fn detect_collisions(
    surfaces: &[ContactSurface],
    x: &[f64],
    x_prev: &[f64],
    existing: &[ContactPair],
    params: &ContactParams,
) -> Result<Vec<ContactPair>> {
    let threshold = params.release_distance();
    let mut refs = Vec::new();
    let mut centers = Vec::new();
    let mut radii = Vec::new();
    for (s, surf) in surfaces.iter().enumerate() {
        for (t, tri) in surf.triangles.iter().enumerate() {
            let (c, r) = circumcircle(&vtx(x, tri[0]), &vtx(x, tri[1]), &vtx(x, tri[2]));
            refs.push((s, t));
            centers.push(c);
            radii.push(r);
        }
    }
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let hash = SpatialHash::new(r_max + threshold, &centers, &radii)?;

    let mut by_vertex: BTreeMap<usize, Vec<&ContactPair>> = BTreeMap::new();
    for p in existing {
        by_vertex.entry(p.vertex).or_default().push(p);
    }
    let owners: Vec<(usize, usize)> = owner_map(surfaces).into_iter().collect();

    let per_vertex: Vec<Vec<ContactPair>> = owners
        .par_iter()
        .map_init(Vec::new, |buf, &(v, own)| {
            hash.query(&vtx(x, v), buf);
            let old = by_vertex.get(&v).map(|o| o.as_slice()).unwrap_or(&[]);
            let cands = buf.iter().map(|&k| refs[k]).chain(old.iter().map(|p| (p.surface, p.triangle_index)));
            let best = closest_per_surface(surfaces, own, v, x, cands);
            let mut out = Vec::new();
            let mut handled = BTreeSet::new();
            for p in old {
                handled.insert(p.surface);
                let tri = &surfaces[p.surface].triangles[p.triangle_index];
                let q = [vtx(x, tri[0]), vtx(x, tri[1]), vtx(x, tri[2])];
                if inside(&projection_barycentric(&q[0], &q[1], &q[2], &vtx(x, v))) {
                    out.push((*p).clone());
                } else if let Some(c) = best.get(&p.surface) {
                    if in_window(&surfaces[p.surface], c.d * p.side, threshold, params.eps_r) {
                        out.push(make_pair(surfaces, own, v, c, p.side, x, x_prev, params));
                    }
                }
            }
            for (s, c) in &best {
                if handled.contains(s) {
                    continue;
                }
                let surf = &surfaces[*s];
                let side = if surf.two_sided() {
                    let tri = surf.triangles[c.tri];
                    let dp = signed_distance(&vtx(x_prev, tri[0]), &vtx(x_prev, tri[1]), &vtx(x_prev, tri[2]), &vtx(x_prev, v));
                    if dp != 0.0 {
                        dp.signum()
                    } else if c.d != 0.0 {
                        c.d.signum()
                    } else {
                        1.0
                    }
                } else {
                    1.0
                };
                if in_window(surf, c.d * side, threshold, params.eps_r) {
                    out.push(make_pair(surfaces, own, v, c, side, x, x_prev, params));
                }
            }
            out.sort_by_key(|p| p.surface);
            out
        })
        .collect();
    Ok(per_vertex.into_iter().flatten().collect())
}

/// Drops pairs separated by more than the release distance at `x`.
pub fn release_separated(pairs: &mut Vec<ContactPair>, x: &[f64], params: &ContactParams) {
    let limit = params.release_distance();
    pairs.retain(|p| {
        let q = p.dofs().map(|i| vtx(x, i));
        signed_distance(&q[0], &q[1], &q[2], &q[3]) * p.side <= limit
    });
}

/// All-pairs reference detection: `(vertex, surface, triangle)` for the
/// closest admissible triangle per surface within `threshold`.
pub fn brute_force_pairs(
    surfaces: &[ContactSurface],
    x: &[f64],
    threshold: f64,
    eps_r: f64,
) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (v, own) in owner_map(surfaces) {
        let all = surfaces.iter().enumerate().flat_map(|(s, surf)| (0..surf.triangles.len()).map(move |t| (s, t)));
        for (s, c) in closest_per_surface(surfaces, own, v, x, all) {
            if in_window(&surfaces[s], c.d, threshold, eps_r) {
                out.push((v, s, c.tri));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor_surface() -> ContactSurface {
        ContactSurface::new(SurfaceKind::Static, MaterialClass::Table, false, vec![[0, 1, 2], [0, 2, 3]])
    }

    fn floor_x() -> Vec<f64> {
        vec![-1.0, -1.0, 0.0, 1.0, -1.0, 0.0, 1.0, 1.0, 0.0, -1.0, 1.0, 0.0]
    }

    fn particle_surface(v: usize) -> ContactSurface {
        // a degenerate-free single triangle far away carrying the query vertex
        ContactSurface::new(SurfaceKind::Shell, MaterialClass::Cloth, false, vec![[v, v + 1, v + 2]])
    }

    #[test]
    fn vertex_above_floor() {
        let p = ContactParams::default();
        let mut x = floor_x();
        x.extend_from_slice(&[0.1, 0.2, 0.5e-3, 5.0, 5.0, 5.0, 5.0, 6.0, 5.0]);
        let surfaces = vec![floor_surface(), particle_surface(4)];
        let pairs = detect_collisions(&surfaces, &x, &x, &[], &p).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].vertex, 4);
        assert!((pairs[0].locked_normal - Vector3::z()).norm() < 1e-15);

        x[14] = 0.5;
        assert!(detect_collisions(&surfaces, &x, &x, &[], &p).unwrap().is_empty());
    }

    #[test]
    fn locked_pair_survives_and_releases() {
        let p = ContactParams::default();
        let mut x = floor_x();
        x.extend_from_slice(&[0.1, 0.2, 0.5e-3, 5.0, 5.0, 5.0, 5.0, 6.0, 5.0]);
        let surfaces = vec![floor_surface(), particle_surface(4)];
        let pairs = detect_collisions(&surfaces, &x, &x, &[], &p).unwrap();
        let mut moved = x.clone();
        moved[14] = -5e-3;
        let again = detect_collisions(&surfaces, &moved, &x, &pairs, &p).unwrap();
        assert_eq!(again, pairs);
        let mut kept = again.clone();
        moved[14] = 2e-3;
        release_separated(&mut kept, &moved, &p);
        assert!(kept.is_empty());
    }
}
