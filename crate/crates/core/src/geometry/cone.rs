use super::{BoundaryMesh, Vec3};
use crate::error::MeshError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint {
    pub point: Vec3,
    /// Depth along the inward normal.
    pub depth: f64,
    /// Distance to the surface (minimum over all panels).
    pub dist: f64,
}

/// Interior points on the inward normal through a panel centroid that lie in the
/// non-tangential cone `|X - Q| < aperture * dist(X, boundary)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePointSet {
    pub panel: usize,
    pub aperture: f64,
    pub points: Vec<ConePoint>,
}

pub fn nt_cone_samples(
    mesh: &BoundaryMesh,
    panel: usize,
    aperture: f64,
    depths: &[f64],
) -> Result<ConePointSet, MeshError> {
    if !(aperture > 1.0) {
        return Err(MeshError::Parameter(format!("cone aperture {aperture} must exceed 1")));
    }
    if panel >= mesh.len() {
        return Err(MeshError::Parameter(format!("panel {panel} out of range")));
    }
    let q = mesh.centroids()[panel];
    let normal = mesh.normals()[panel];
    let mut points = Vec::new();
    for &t in depths {
        if !(t > 0.0) {
            return Err(MeshError::Parameter(format!("cone depth {t} must be positive")));
        }
        let x = q - normal * t;
        let dist = mesh.distance(&x);
        if (x - q).norm() < aperture * dist {
            points.push(ConePoint { point: x, depth: t, dist });
        }
    }
    if points.is_empty() {
        return Err(MeshError::EmptyCone(format!(
            "no depth of {depths:?} lies inside the cone of aperture {aperture} at panel {panel}"
        )));
    }
    Ok(ConePointSet { panel, aperture, points })
}
