//! Closed triangulated boundary surfaces.

mod cone;
mod generate;
mod off;

pub use cone::{nt_cone_samples, ConePoint, ConePointSet};
pub use generate::{make_cube_mesh, make_sphere_mesh};
pub use off::{load_mesh, save_mesh};

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use nalgebra::Vector3;

use crate::error::MeshError;

pub type Vec3 = Vector3<f64>;

/// A closed, connected, outward-oriented triangle surface with per-panel data
/// precomputed for centroid collocation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    vertices: Vec<Vec3>,
    panels: Vec<[usize; 3]>,
    centroids: Vec<Vec3>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
    /// Panel across each edge `(p[k], p[k+1])`.
    neighbors: Vec<[usize; 3]>,
    mean_curvatures: Vec<f64>,
    h_max: f64,
    volume: f64,
    tag: u64,
}

impl BoundaryMesh {
    /// Validates connectivity and orientation. A globally inward-oriented surface is
    /// flipped; anything else that is not a closed connected 2-manifold is rejected.
    pub fn new(vertices: Vec<Vec3>, mut panels: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (f, p) in panels.iter().enumerate() {
            for &v in p {
                if v >= vertices.len() {
                    return Err(MeshError::VertexIndex { face: f, vertex: v, count: vertices.len() });
                }
            }
        }
        check_closed(&panels)?;
        check_connected(&panels)?;

        let mut mesh = Self::with_panels(vertices, panels.clone())?;
        if mesh.volume < 0.0 {
            for p in panels.iter_mut() {
                p.swap(1, 2);
            }
            mesh = Self::with_panels(mesh.vertices, panels)?;
        }
        Ok(mesh)
    }

    fn with_panels(vertices: Vec<Vec3>, panels: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = panels.len();
        let mut centroids = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut areas = Vec::with_capacity(n);
        let mut diameters = Vec::with_capacity(n);
        for (i, p) in panels.iter().enumerate() {
            let [a, b, c] = p.map(|v| vertices[v]);
            let cross = (b - a).cross(&(c - a));
            let twice_area = cross.norm();
            let diam = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            if !(twice_area > 1e-14 * diam * diam) {
                return Err(MeshError::DegeneratePanel(i));
            }
            centroids.push((a + b + c) / 3.0);
            normals.push(cross / twice_area);
            areas.push(0.5 * twice_area);
            diameters.push(diam);
        }
        let h_max = diameters.iter().cloned().fold(0.0, f64::max);
        let neighbors = panel_neighbors(&panels);
        let mean_curvatures = estimate_mean_curvatures(&centroids, &normals, &neighbors);
        let volume = (0..n).map(|i| areas[i] * centroids[i].dot(&normals[i])).sum::<f64>() / 3.0;

        let mut hasher = DefaultHasher::new();
        for v in &vertices {
            for x in v.iter() {
                x.to_bits().hash(&mut hasher);
            }
        }
        panels.hash(&mut hasher);
        let tag = hasher.finish();

        Ok(Self { vertices, panels, centroids, normals, areas, diameters, neighbors, mean_curvatures, h_max, volume, tag })
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn panels(&self) -> &[[usize; 3]] {
        &self.panels
    }

    pub fn centroids(&self) -> &[Vec3] {
        &self.centroids
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    pub fn neighbors(&self) -> &[[usize; 3]] {
        &self.neighbors
    }

    /// Mean curvature of the smooth surface the mesh approximates, per panel (positive
    /// for convex). Feature edges, where adjacent normals turn by more than
    /// [`FEATURE_ANGLE`], are treated as genuine creases and excluded; a panel bounded
    /// only by feature edges gets 0.
    pub fn mean_curvatures(&self) -> &[f64] {
        &self.mean_curvatures
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Enclosed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Content hash identifying this mesh; densities carry it.
    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn panel_vertices(&self, i: usize) -> [Vec3; 3] {
        self.panels[i].map(|v| self.vertices[v])
    }

    /// Exact distance from `x` to the surface.
    pub fn distance(&self, x: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.panels {
            let [a, b, c] = p.map(|v| self.vertices[v]);
            let d2 = point_triangle_distance_sq(x, &a, &b, &c);
            if d2 < best {
                best = d2;
            }
        }
        best.sqrt()
    }

    /// Generalised winding number: 1 inside, 0 outside.
    pub fn winding_number(&self, x: &Vec3) -> f64 {
        let mut total = 0.0;
        for p in &self.panels {
            let [a, b, c] = p.map(|v| self.vertices[v] - x);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * PI)
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        self.winding_number(x) > 0.5
    }

    /// Volume-weighted centroid of the enclosed solid.
    pub fn solid_centroid(&self) -> Vec3 {
        let mut acc = Vec3::zeros();
        let mut vol = 0.0;
        for p in &self.panels {
            let [a, b, c] = p.map(|v| self.vertices[v]);
            let v = a.dot(&b.cross(&c)) / 6.0;
            acc += v * (a + b + c) / 4.0;
            vol += v;
        }
        acc / vol
    }

    /// Distance from the solid centroid to the surface, used as an inradius scale.
    pub fn inradius(&self) -> f64 {
        self.distance(&self.solid_centroid())
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }
}

/// Dihedral turn (radians) beyond which an edge is a crease rather than sampled curvature.
pub const FEATURE_ANGLE: f64 = PI / 3.0;

fn panel_neighbors(panels: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * panels.len());
    for (f, p) in panels.iter().enumerate() {
        for k in 0..3 {
            owner.insert((p[k], p[(k + 1) % 3]), f);
        }
    }
    panels
        .iter()
        .map(|p| [0, 1, 2].map(|k| owner[&(p[(k + 1) % 3], p[k])]))
        .collect()
}

/// Average over the three neighbours of the normal curvature along the centroid link,
/// `(n_j - n_i) . (c_j - c_i) / |c_j - c_i|^2`.
fn estimate_mean_curvatures(centroids: &[Vec3], normals: &[Vec3], neighbors: &[[usize; 3]]) -> Vec<f64> {
    let cos_feature = FEATURE_ANGLE.cos();
    neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let (mut sum, mut count) = (0.0, 0);
            for &j in nb {
                if normals[i].dot(&normals[j]) < cos_feature {
                    continue;
                }
                let d = centroids[j] - centroids[i];
                sum += (normals[j] - normals[i]).dot(&d) / d.norm_squared();
                count += 1;
            }
            if count > 0 {
                sum / count as f64
            } else {
                0.0
            }
        })
        .collect()
}

fn check_closed(panels: &[[usize; 3]]) -> Result<(), MeshError> {
    // undirected edge -> (count, net orientation)
    let mut edges: HashMap<(usize, usize), (u32, i32)> = HashMap::new();
    for p in panels {
        for k in 0..3 {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let e = edges.entry(key).or_insert((0, 0));
            e.0 += 1;
            e.1 += if a < b { 1 } else { -1 };
        }
    }
    let mut keys: Vec<_> = edges.iter().collect();
    keys.sort_by_key(|(k, _)| **k);
    for (&(a, b), &(count, net)) in keys.iter().copied() {
        if count != 2 {
            return Err(MeshError::OpenSurface(a, b));
        }
        if net != 0 {
            return Err(MeshError::InconsistentOrientation(a, b));
        }
    }
    Ok(())
}

fn check_connected(panels: &[[usize; 3]]) -> Result<(), MeshError> {
    let mut parent: Vec<usize> = (0..panels.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (f, p) in panels.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            if let Some(&g) = owner.get(&(a.min(b), a.max(b))) {
                let (ra, rb) = (find(&mut parent, f), find(&mut parent, g));
                parent[ra] = rb;
            } else {
                owner.insert((a.min(b), a.max(b)), f);
            }
        }
    }
    let components = (0..panels.len()).filter(|&i| find(&mut parent, i) == i).count();
    if components > 1 {
        Err(MeshError::NotConnected(components))
    } else {
        Ok(())
    }
}

/// Squared distance from `p` to triangle `abc` (closest-point-by-region).
pub fn point_triangle_distance_sq(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm_squared();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tetra() -> (Vec<Vec3>, Vec<[usize; 3]>) {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let f = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        (v, f)
    }

    #[test]
    fn tetrahedron_volume_and_flip() {
        let (v, f) = tetra();
        let m = BoundaryMesh::new(v.clone(), f.clone()).unwrap();
        assert_relative_eq!(m.volume(), 1.0 / 6.0, max_relative = 1e-14);
        let flipped: Vec<_> = f.iter().map(|p| [p[0], p[2], p[1]]).collect();
        let m2 = BoundaryMesh::new(v, flipped).unwrap();
        assert_relative_eq!(m2.volume(), 1.0 / 6.0, max_relative = 1e-14);
        for n in m2.normals() {
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_open_and_misoriented() {
        let (v, mut f) = tetra();
        let open = f[..3].to_vec();
        assert!(matches!(BoundaryMesh::new(v.clone(), open), Err(MeshError::OpenSurface(..))));
        f[0] = [0, 1, 2];
        assert!(matches!(BoundaryMesh::new(v, f), Err(MeshError::InconsistentOrientation(..))));
    }

    #[test]
    fn rejects_disjoint_shells() {
        let (mut v, mut f) = tetra();
        let shift = Vec3::new(5.0, 0.0, 0.0);
        let extra: Vec<_> = v.iter().map(|p| p + shift).collect();
        v.extend(extra);
        let more: Vec<_> = f.iter().map(|p| p.map(|i| i + 4)).collect();
        f.extend(more);
        assert!(matches!(BoundaryMesh::new(v, f), Err(MeshError::NotConnected(2))));
    }

    #[test]
    fn rejects_degenerate() {
        let (mut v, f) = tetra();
        v[3] = Vec3::new(0.5, 0.5, 0.0);
        assert!(matches!(BoundaryMesh::new(v, f), Err(MeshError::DegeneratePanel(_))));
    }

    #[test]
    fn distance_and_inside() {
        let (v, f) = tetra();
        let m = BoundaryMesh::new(v, f).unwrap();
        let x = Vec3::new(0.1, 0.1, 0.1);
        assert_relative_eq!(m.distance(&x), 0.1, max_relative = 1e-12);
        assert!(m.contains(&x));
        assert!(!m.contains(&Vec3::new(1.0, 1.0, 1.0)));
        assert_relative_eq!(m.distance(&Vec3::new(-1.0, 0.0, 0.0)), 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.winding_number(&x), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn point_triangle_regions() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let c = Vec3::new(0.0, 1.0, 0.0);
        let d = |p: Vec3| point_triangle_distance_sq(&p, &a, &b, &c).sqrt();
        assert_relative_eq!(d(Vec3::new(0.2, 0.2, 0.5)), 0.5, max_relative = 1e-14);
        assert_relative_eq!(d(Vec3::new(-1.0, -1.0, 0.0)), 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(d(Vec3::new(2.0, 0.0, 0.0)), 1.0, max_relative = 1e-14);
        assert_relative_eq!(d(Vec3::new(0.5, -1.0, 0.0)), 1.0, max_relative = 1e-14);
        assert_relative_eq!(d(Vec3::new(1.0, 1.0, 0.0)), 0.5f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(d(Vec3::new(-0.5, 0.5, 0.0)), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn neighbours_are_mutual() {
        let m = super::make_sphere_mesh(1.0, 2).unwrap();
        for (i, nb) in m.neighbors().iter().enumerate() {
            for &j in nb {
                assert_ne!(i, j);
                assert!(m.neighbors()[j].contains(&i));
            }
        }
    }

    #[test]
    fn curvature_of_sphere_and_cube() {
        for (r, tol) in [(2, 0.08), (3, 0.06)] {
            let m = super::make_sphere_mesh(2.0, r).unwrap();
            for &h in m.mean_curvatures() {
                assert!((h - 0.5).abs() < tol * 0.5, "refinement {r}: {h}");
            }
        }
        // cube edges are creases, faces are flat
        let c = super::make_cube_mesh(2.0, 2).unwrap();
        assert!(c.mean_curvatures().iter().all(|&h| h.abs() < 1e-12));
        // every tetrahedron edge is a crease
        let (v, f) = tetra();
        let t = BoundaryMesh::new(v, f).unwrap();
        assert!(t.mean_curvatures().iter().all(|&h| h == 0.0));
    }
}
