use std::collections::HashMap;

use super::{BoundaryMesh, Vec3};
use crate::error::MeshError;

/// Icosahedron inscribed in the sphere of `radius`, subdivided `refinement` times with
/// new vertices projected onto the sphere. `20 * 4^refinement` panels.
pub fn make_sphere_mesh(radius: f64, refinement: u32) -> Result<BoundaryMesh, MeshError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MeshError::Parameter(format!("sphere radius {radius}")));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize() * radius)
    .collect();
    let mut panels = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..refinement {
        panels = subdivide(&mut vertices, &panels, |p| p.normalize() * radius);
    }
    BoundaryMesh::new(vertices, panels)
}

/// Axis-aligned cube of edge `side` centred at the origin; each face starts as two
/// triangles and is subdivided `refinement` times. `12 * 4^refinement` panels.
pub fn make_cube_mesh(side: f64, refinement: u32) -> Result<BoundaryMesh, MeshError> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(MeshError::Parameter(format!("cube side {side}")));
    }
    let h = side / 2.0;
    let mut vertices: Vec<Vec3> = (0..8)
        .map(|i| {
            let s = |bit: usize| if i & bit != 0 { h } else { -h };
            Vec3::new(s(1), s(2), s(4))
        })
        .collect();
    // vertex index = x + 2y + 4z
    let quads = [
        [0, 2, 3, 1], // z = -h
        [4, 5, 7, 6], // z = +h
        [0, 1, 5, 4], // y = -h
        [2, 6, 7, 3], // y = +h
        [0, 4, 6, 2], // x = -h
        [1, 3, 7, 5], // x = +h
    ];
    let mut panels: Vec<[usize; 3]> = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    for _ in 0..refinement {
        panels = subdivide(&mut vertices, &panels, |p| p);
    }
    BoundaryMesh::new(vertices, panels)
}

/// Splits each triangle into four through edge midpoints, sharing midpoints between
/// neighbours so the surface stays closed.
fn subdivide(
    vertices: &mut Vec<Vec3>,
    panels: &[[usize; 3]],
    place: impl Fn(Vec3) -> Vec3,
) -> Vec<[usize; 3]> {
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
        *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
            vertices.push(place((vertices[a] + vertices[b]) / 2.0));
            vertices.len() - 1
        })
    };
    let mut out = Vec::with_capacity(4 * panels.len());
    for &[a, b, c] in panels {
        let ab = midpoint(a, b, vertices);
        let bc = midpoint(b, c, vertices);
        let ca = midpoint(c, a, vertices);
        out.push([a, ab, ca]);
        out.push([b, bc, ab]);
        out.push([c, ca, bc]);
        out.push([ab, bc, ca]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sphere_counts_and_area() {
        let m0 = make_sphere_mesh(1.0, 0).unwrap();
        assert_eq!(m0.len(), 20);
        // inscribed icosahedron: edge 4 / sqrt(10 + 2 sqrt 5), area 5 sqrt(3) edge^2
        let edge = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        assert_relative_eq!(m0.total_area(), 5.0 * 3f64.sqrt() * edge * edge, max_relative = 1e-13);
        assert!(m0.total_area() < 4.0 * PI);
        let m3 = make_sphere_mesh(1.0, 3).unwrap();
        assert_eq!(m3.len(), 1280);
        assert!((m3.volume() - 4.0 * PI / 3.0).abs() < 0.01 * 4.0 * PI / 3.0);
    }

    #[test]
    fn sphere_scaling() {
        let a = make_sphere_mesh(1.0, 2).unwrap();
        let b = make_sphere_mesh(2.0, 2).unwrap();
        for (x, y) in a.areas().iter().zip(b.areas()) {
            assert_relative_eq!(4.0 * x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn sphere_converges_second_order() {
        let err = |r| {
            let m = make_sphere_mesh(1.0, r).unwrap();
            ((m.total_area() - 4.0 * PI).abs(), (m.volume() - 4.0 * PI / 3.0).abs())
        };
        for r in 1..4 {
            let (a0, v0) = err(r);
            let (a1, v1) = err(r + 1);
            assert!((a0 / a1 - 4.0).abs() < 0.5, "area ratio {}", a0 / a1);
            assert!((v0 / v1 - 4.0).abs() < 0.5, "volume ratio {}", v0 / v1);
        }
    }

    #[test]
    fn cube_exact() {
        let m = make_cube_mesh(2.0, 0).unwrap();
        assert_eq!(m.len(), 12);
        assert_eq!(m.total_area(), 24.0);
        assert_eq!(make_cube_mesh(1.0, 1).unwrap().len(), 48);
        for k in 0..4 {
            let m = make_cube_mesh(2.0, k).unwrap();
            assert_relative_eq!(m.volume(), 8.0, max_relative = 1e-13);
            assert_relative_eq!(m.total_area(), 24.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn generators_validate_up_to_four() {
        for k in 0..=4 {
            let s = make_sphere_mesh(1.5, k).unwrap();
            assert!(s.volume() > 0.0);
            assert!(s.areas().iter().all(|&a| a > 0.0));
            let c = make_cube_mesh(1.0, k).unwrap();
            assert!(c.volume() > 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_sphere_mesh(0.0, 1).is_err());
        assert!(make_cube_mesh(-1.0, 1).is_err());
    }
}
