//! Nyström discretisation of the boundary operators on a flat-panel mesh.
//!
//! Densities are piecewise constant and collocated at panel centroids. Off-diagonal
//! entries use the one-point centroid rule, `kernel(c_i, c_k) * area_k`. Diagonals:
//!
//! * `S`: exact integral of `K_1` over the flat panel from its centroid.
//! * `K*`, `K*_j`: the flat-panel principal value is zero, so the diagonal carries only
//!   the curvature of the underlying surface. With `<c - Q, N> ~ H r^2 / 2` on a surface
//!   of mean curvature `H`, the self term is `H/2 * int_panel K_j'(r) r dσ`: exact through
//!   `int 1/r` for `j = 1` and `int r` for `j = 2`, mean-distance rule beyond. Creases
//!   contribute nothing (see `BoundaryMesh::mean_curvatures`).
//! * `M_j`, `j >= 2`: `K_j` at the mean in-panel distance from the centroid, times area.

pub mod quadrature;

use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::OperatorError;
use crate::geometry::{BoundaryMesh, Vec3};
use crate::kernels::KernelFamily;

/// Boundary function sampled at panel centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    values: Vec<f64>,
    mesh_tag: u64,
}

impl DensityVector {
    pub fn new(mesh: &BoundaryMesh, values: Vec<f64>) -> Result<Self, OperatorError> {
        if values.len() != mesh.len() {
            return Err(OperatorError::Length { expected: mesh.len(), got: values.len() });
        }
        Ok(Self { values, mesh_tag: mesh.tag() })
    }

    pub fn constant(mesh: &BoundaryMesh, value: f64) -> Self {
        Self { values: vec![value; mesh.len()], mesh_tag: mesh.tag() }
    }

    pub fn zeros(mesh: &BoundaryMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// Samples `f(centroid, normal)` on every panel.
    pub fn from_fn(mesh: &BoundaryMesh, f: impl Fn(&Vec3, &Vec3) -> f64) -> Self {
        let values = mesh.centroids().iter().zip(mesh.normals()).map(|(c, n)| f(c, n)).collect();
        Self { values, mesh_tag: mesh.tag() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mesh_tag(&self) -> u64 {
        self.mesh_tag
    }

    pub fn check_mesh(&self, mesh: &BoundaryMesh) -> Result<(), OperatorError> {
        if self.mesh_tag != mesh.tag() {
            return Err(OperatorError::MeshMismatch);
        }
        if self.values.len() != mesh.len() {
            return Err(OperatorError::Length { expected: mesh.len(), got: self.values.len() });
        }
        Ok(())
    }

    /// Area-weighted discrete `L^p` norm on the boundary.
    pub fn lp_norm(&self, mesh: &BoundaryMesh, p: f64) -> f64 {
        let s: f64 = self.values.iter().zip(mesh.areas()).map(|(v, a)| a * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    SingleLayer,
    Kstar,
    /// Boundary trace of the `j`-th layer potential `M_j`.
    Layer(usize),
    /// Normal-derivative trace `K*_j`.
    KstarLayer(usize),
    /// `-I/2 + K* + diag(b) S`.
    Robin,
    /// `K*_j + diag(b) M_j`.
    RobinCoupling(usize),
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::SingleLayer => write!(f, "S"),
            OperatorKind::Kstar => write!(f, "Kstar"),
            OperatorKind::Layer(j) => write!(f, "M{j}"),
            OperatorKind::KstarLayer(j) => write!(f, "Kstar{j}"),
            OperatorKind::Robin => write!(f, "T"),
            OperatorKind::RobinCoupling(j) => write!(f, "Tc{j}"),
        }
    }
}

/// Square matrix over the panel basis, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    kind: OperatorKind,
    n: usize,
    data: Vec<f64>,
    mesh_tag: u64,
}

impl DenseOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.n + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn apply(&self, x: &DensityVector) -> Result<DensityVector, OperatorError> {
        if x.mesh_tag != self.mesh_tag {
            return Err(OperatorError::MeshMismatch);
        }
        if x.len() != self.n {
            return Err(OperatorError::Length { expected: self.n, got: x.len() });
        }
        Ok(DensityVector { values: self.apply_slice(&x.values), mesh_tag: self.mesh_tag })
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .par_chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest singular value by power iteration on `A^T A`.
    pub fn spectral_norm_estimate(&self, iterations: usize) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut sigma = 0.0;
        for _ in 0..iterations {
            let y = self.apply_slice(&x);
            let mut z = vec![0.0; n];
            for (row, yi) in self.data.chunks_exact(n).zip(&y) {
                for (zk, a) in z.iter_mut().zip(row) {
                    *zk += a * yi;
                }
            }
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            sigma = norm.sqrt();
            x = z.into_iter().map(|v| v / norm).collect();
        }
        sigma
    }

    /// Writes `N` as a little-endian `u64`, then the `N*N` entries row-major as
    /// little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the `write_binary` layout back as a raw `(N, entries)` pair.
    pub fn read_binary<R: Read>(mut input: R) -> std::io::Result<(usize, Vec<f64>)> {
        let mut buf = [0u8; 8];
        input.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf) as usize;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Ok((n, data))
    }
}

/// Per-mesh data shared by all entry formulas.
pub(crate) struct Discretization<'a> {
    pub mesh: &'a BoundaryMesh,
    pub family: &'a KernelFamily,
    /// `int_panel 1/|c - Q| dσ(Q)` from each centroid.
    self_inverse_distance: Vec<f64>,
    /// Mean distance from the centroid over the panel.
    mean_distance: Vec<f64>,
}

impl<'a> Discretization<'a> {
    pub fn new(mesh: &'a BoundaryMesh, family: &'a KernelFamily) -> Result<Self, OperatorError> {
        if family.dim() != 3 {
            return Err(OperatorError::Dimension(family.dim()));
        }
        let (self_inverse_distance, mean_distance) = (0..mesh.len())
            .map(|i| {
                let tri = mesh.panel_vertices(i);
                let c = mesh.centroids()[i];
                (
                    quadrature::inverse_distance_integral(&c, &tri),
                    quadrature::distance_integral(&c, &tri) / mesh.areas()[i],
                )
            })
            .unzip();
        Ok(Self { mesh, family, self_inverse_distance, mean_distance })
    }

    fn check_order(&self, j: usize) -> Result<(), OperatorError> {
        if j < 1 || j > self.family.m_max() {
            return Err(OperatorError::Order(j));
        }
        Ok(())
    }

    /// Entry `(i, k)` of the boundary trace of `M_j` (`j = 1` is `S`).
    #[inline]
    pub fn layer(&self, j: usize, i: usize, k: usize) -> f64 {
        let area = self.mesh.areas()[k];
        if i == k {
            if j == 1 {
                self.family.terms(1).expect("order checked")[0].coeff * self.self_inverse_distance[i]
            } else {
                self.family.eval_unchecked(j, self.mean_distance[i]) * area
            }
        } else {
            let r = (self.mesh.centroids()[i] - self.mesh.centroids()[k]).norm();
            self.family.eval_unchecked(j, r) * area
        }
    }

    /// Entry `(i, k)` of `K*_j` (`j = 1` is `K*`).
    #[inline]
    pub fn normal_derivative(&self, j: usize, i: usize, k: usize) -> f64 {
        if i == k {
            let h = self.mesh.mean_curvatures()[i];
            if h == 0.0 {
                return 0.0;
            }
            let per_area = if j == 1 {
                // K_1'(r) r = -coeff / r
                -self.family.terms(1).expect("order checked")[0].coeff * self.self_inverse_distance[i]
                    / self.mesh.areas()[i]
            } else {
                let r = self.mean_distance[i];
                self.family.radial_derivative_unchecked(j, r) * r
            };
            return 0.5 * h * per_area * self.mesh.areas()[i];
        }
        let d = self.mesh.centroids()[i] - self.mesh.centroids()[k];
        let r = d.norm();
        let dk = self.family.radial_derivative_unchecked(j, r);
        dk / r * d.dot(&self.mesh.normals()[i]) * self.mesh.areas()[k]
    }

    /// Row `i` of the operator `kind` (with Robin coefficients `b` where needed).
    pub fn fill_row(&self, kind: OperatorKind, b: Option<&[f64]>, i: usize, row: &mut [f64]) {
        match kind {
            OperatorKind::SingleLayer => row.iter_mut().enumerate().for_each(|(k, v)| *v = self.layer(1, i, k)),
            OperatorKind::Kstar => {
                row.iter_mut().enumerate().for_each(|(k, v)| *v = self.normal_derivative(1, i, k))
            }
            OperatorKind::Layer(j) => row.iter_mut().enumerate().for_each(|(k, v)| *v = self.layer(j, i, k)),
            OperatorKind::KstarLayer(j) => {
                row.iter_mut().enumerate().for_each(|(k, v)| *v = self.normal_derivative(j, i, k))
            }
            OperatorKind::Robin => {
                let bi = b.expect("Robin operator needs coefficients")[i];
                for (k, v) in row.iter_mut().enumerate() {
                    let mut e = self.normal_derivative(1, i, k) + bi * self.layer(1, i, k);
                    if k == i {
                        e -= 0.5;
                    }
                    *v = e;
                }
            }
            OperatorKind::RobinCoupling(j) => {
                let bi = b.expect("Robin operator needs coefficients")[i];
                for (k, v) in row.iter_mut().enumerate() {
                    *v = self.normal_derivative(j, i, k) + bi * self.layer(j, i, k);
                }
            }
        }
    }

    pub fn assemble(&self, kind: OperatorKind, b: Option<&[f64]>) -> Result<DenseOperator, OperatorError> {
        self.check_kind(kind, b)?;
        let n = self.mesh.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_exact_mut(n).enumerate().for_each(|(i, row)| self.fill_row(kind, b, i, row));
        Ok(DenseOperator { kind, n, data, mesh_tag: self.mesh.tag() })
    }

    /// Matrix-free product with the operator `kind`; same entries and summation order as
    /// `assemble(kind).apply`.
    pub fn apply(&self, kind: OperatorKind, b: Option<&[f64]>, x: &[f64]) -> Result<Vec<f64>, OperatorError> {
        self.check_kind(kind, b)?;
        let n = self.mesh.len();
        if x.len() != n {
            return Err(OperatorError::Length { expected: n, got: x.len() });
        }
        Ok((0..n)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |row, i| {
                    self.fill_row(kind, b, i, row);
                    row.iter().zip(x).map(|(a, v)| a * v).sum()
                },
            )
            .collect())
    }

    fn check_kind(&self, kind: OperatorKind, b: Option<&[f64]>) -> Result<(), OperatorError> {
        match kind {
            OperatorKind::SingleLayer | OperatorKind::Kstar => {}
            OperatorKind::Layer(j) | OperatorKind::KstarLayer(j) => {
                if j < 2 {
                    return Err(OperatorError::Order(j));
                }
                self.check_order(j)?;
            }
            OperatorKind::Robin => {}
            OperatorKind::RobinCoupling(j) => {
                if j < 2 {
                    return Err(OperatorError::Order(j));
                }
                self.check_order(j)?;
            }
        }
        if matches!(kind, OperatorKind::Robin | OperatorKind::RobinCoupling(_)) {
            match b {
                Some(b) if b.len() == self.mesh.len() => {}
                Some(b) => return Err(OperatorError::Length { expected: self.mesh.len(), got: b.len() }),
                None => return Err(OperatorError::Length { expected: self.mesh.len(), got: 0 }),
            }
        }
        Ok(())
    }
}

pub fn assemble_single_layer(mesh: &BoundaryMesh, family: &KernelFamily) -> Result<DenseOperator, OperatorError> {
    Discretization::new(mesh, family)?.assemble(OperatorKind::SingleLayer, None)
}

/// `K*` does not depend on higher kernels; the harmonic family is built internally.
pub fn assemble_kstar(mesh: &BoundaryMesh) -> Result<DenseOperator, OperatorError> {
    let family = KernelFamily::new(3, 1)?;
    Discretization::new(mesh, &family)?.assemble(OperatorKind::Kstar, None)
}

pub fn assemble_mj_boundary(mesh: &BoundaryMesh, family: &KernelFamily, j: usize) -> Result<DenseOperator, OperatorError> {
    Discretization::new(mesh, family)?.assemble(OperatorKind::Layer(j), None)
}

pub fn assemble_kstar_j(mesh: &BoundaryMesh, family: &KernelFamily, j: usize) -> Result<DenseOperator, OperatorError> {
    Discretization::new(mesh, family)?.assemble(OperatorKind::KstarLayer(j), None)
}

/// How layer potentials are integrated at interior points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// One point per panel; refused within `h_max / 2` of the boundary.
    #[default]
    Centroid,
    /// Panels close to the target are subdivided adaptively; no near-boundary guard.
    Adaptive,
}

/// Centroid-rule evaluation is refused closer than `GUARD_FACTOR * h_max` to the boundary.
pub const GUARD_FACTOR: f64 = 0.5;

/// Checks that `x` is inside and, for the centroid rule, clear of the guard band.
/// Returns the distance to the boundary.
pub fn check_interior(mesh: &BoundaryMesh, x: &Vec3, quad: Quadrature) -> Result<f64, OperatorError> {
    if !mesh.contains(x) {
        return Err(OperatorError::Exterior(x.x, x.y, x.z));
    }
    let dist = mesh.distance(x);
    if dist == 0.0 {
        return Err(OperatorError::Exterior(x.x, x.y, x.z));
    }
    let guard = GUARD_FACTOR * mesh.h_max();
    if quad == Quadrature::Centroid && dist < guard {
        return Err(OperatorError::NearBoundary { dist, guard });
    }
    Ok(dist)
}

/// `(M_j f(x), grad M_j f(x))` without the interior check.
pub(crate) fn layer_at(
    mesh: &BoundaryMesh,
    family: &KernelFamily,
    j: usize,
    density: &[f64],
    x: &Vec3,
    quad: Quadrature,
) -> (f64, Vec3) {
    let mut value = 0.0;
    let mut grad = Vec3::zeros();
    let centroids = mesh.centroids();
    let areas = mesh.areas();
    let diameters = mesh.diameters();
    for k in 0..mesh.len() {
        let f = density[k];
        if f == 0.0 {
            continue;
        }
        let d = x - centroids[k];
        let r = d.norm();
        if quad == Quadrature::Adaptive && r < 3.0 * diameters[k] {
            let tri = mesh.panel_vertices(k);
            let (v, g) = quadrature::adaptive_integral(&tri, x, &mut |q| {
                let d = x - q;
                let r = d.norm();
                (family.eval_unchecked(j, r), d * (family.radial_derivative_unchecked(j, r) / r))
            });
            value += f * v;
            grad += g * f;
        } else {
            let w = f * areas[k];
            value += w * family.eval_unchecked(j, r);
            grad += d * (w * family.radial_derivative_unchecked(j, r) / r);
        }
    }
    (value, grad)
}

fn check_potential_args(
    mesh: &BoundaryMesh,
    family: &KernelFamily,
    j: usize,
    density: &DensityVector,
) -> Result<(), OperatorError> {
    if family.dim() != 3 {
        return Err(OperatorError::Dimension(family.dim()));
    }
    if j < 1 || j > family.m_max() {
        return Err(OperatorError::Order(j));
    }
    density.check_mesh(mesh)
}

/// `M_j f(x) = sum_k K_j(|x - c_k|) f_k area_k` at an interior point.
pub fn eval_potential(
    mesh: &BoundaryMesh,
    family: &KernelFamily,
    j: usize,
    density: &DensityVector,
    x: &Vec3,
) -> Result<f64, OperatorError> {
    eval_potential_with(mesh, family, j, density, x, Quadrature::Centroid)
}

pub fn eval_potential_with(
    mesh: &BoundaryMesh,
    family: &KernelFamily,
    j: usize,
    density: &DensityVector,
    x: &Vec3,
    quad: Quadrature,
) -> Result<f64, OperatorError> {
    check_potential_args(mesh, family, j, density)?;
    check_interior(mesh, x, quad)?;
    Ok(layer_at(mesh, family, j, &density.values, x, quad).0)
}

/// `grad M_j f(x)` at an interior point.
pub fn eval_potential_gradient(
    mesh: &BoundaryMesh,
    family: &KernelFamily,
    j: usize,
    density: &DensityVector,
    x: &Vec3,
) -> Result<Vec3, OperatorError> {
    eval_potential_gradient_with(mesh, family, j, density, x, Quadrature::Centroid)
}

pub fn eval_potential_gradient_with(
    mesh: &BoundaryMesh,
    family: &KernelFamily,
    j: usize,
    density: &DensityVector,
    x: &Vec3,
    quad: Quadrature,
) -> Result<Vec3, OperatorError> {
    check_potential_args(mesh, family, j, density)?;
    check_interior(mesh, x, quad)?;
    Ok(layer_at(mesh, family, j, &density.values, x, quad).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_cube_mesh, make_sphere_mesh};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn row_sums(op: &DenseOperator) -> Vec<f64> {
        (0..op.dim()).map(|i| op.row(i).iter().sum()).collect()
    }

    fn max_dev(v: &[f64], target: f64) -> f64 {
        v.iter().map(|x| (x - target).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn unit_sphere_oracles() {
        // S1 = -1, K*1 = 1/2, M_2 1 = -(1/8 pi) int |X - Q| = -2/3,
        // K*_2 1 = -(1/16 pi) int |X - Q| = -1/3 on the unit sphere
        let mesh = make_sphere_mesh(1.0, 3).unwrap();
        let fam = KernelFamily::new(3, 3).unwrap();
        let s = row_sums(&assemble_single_layer(&mesh, &fam).unwrap());
        assert!(max_dev(&s, -1.0) < 2e-2, "{}", max_dev(&s, -1.0));
        let k = row_sums(&assemble_kstar(&mesh).unwrap());
        assert!(max_dev(&k, 0.5) < 2e-2, "{}", max_dev(&k, 0.5));
        let north = (0..mesh.len()).max_by(|&a, &b| mesh.centroids()[a].z.total_cmp(&mesh.centroids()[b].z)).unwrap();
        let m2 = assemble_mj_boundary(&mesh, &fam, 2).unwrap();
        let at_pole: f64 = m2.row(north).iter().sum();
        assert!((at_pole + 2.0 / 3.0).abs() < 2e-2, "{at_pole}");
        let k2 = row_sums(&assemble_kstar_j(&mesh, &fam, 2).unwrap());
        assert!(max_dev(&k2, -1.0 / 3.0) < 2e-2, "{}", max_dev(&k2, -1.0 / 3.0));
    }

    #[test]
    fn oracles_improve_with_refinement() {
        let err = |r| {
            let mesh = make_sphere_mesh(1.0, r).unwrap();
            max_dev(&row_sums(&assemble_kstar(&mesh).unwrap()), 0.5)
        };
        assert!(err(2) < err(1));
        assert!(err(3) < err(2));
    }

    #[test]
    fn radius_scaling() {
        // S1 = -R and K*1 = 1/2 on the sphere of radius R
        let mesh = make_sphere_mesh(2.5, 2).unwrap();
        let fam = KernelFamily::new(3, 2).unwrap();
        let s = row_sums(&assemble_single_layer(&mesh, &fam).unwrap());
        assert!(max_dev(&s, -2.5) < 2.5 * 4e-2);
        let unit = row_sums(&assemble_kstar(&make_sphere_mesh(1.0, 2).unwrap()).unwrap());
        let k = row_sums(&assemble_kstar(&mesh).unwrap());
        for (a, b) in k.iter().zip(&unit) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_layer_symmetric_under_area_weighting() {
        let mesh = make_cube_mesh(1.0, 1).unwrap();
        let fam = KernelFamily::new(3, 3).unwrap();
        for j in [1, 2, 3] {
            let op = Discretization::new(&mesh, &fam).unwrap().assemble(
                if j == 1 { OperatorKind::SingleLayer } else { OperatorKind::Layer(j) },
                None,
            );
            let op = op.unwrap();
            let a = mesh.areas();
            for i in 0..mesh.len() {
                for k in 0..mesh.len() {
                    assert_relative_eq!(op.entry(i, k) * a[i], op.entry(k, i) * a[k], max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn flat_faces_have_zero_kstar_diagonal() {
        let mesh = make_cube_mesh(2.0, 1).unwrap();
        let k = assemble_kstar(&mesh).unwrap();
        assert!((0..mesh.len()).all(|i| k.entry(i, i) == 0.0));
        let sphere = make_sphere_mesh(1.0, 1).unwrap();
        let k = assemble_kstar(&sphere).unwrap();
        assert!((0..sphere.len()).all(|i| k.entry(i, i) > 0.0));
    }

    #[test]
    fn apply_is_linear_and_matches_matrix_free() {
        let mesh = make_sphere_mesh(1.0, 1).unwrap();
        let fam = KernelFamily::new(3, 3).unwrap();
        let disc = Discretization::new(&mesh, &fam).unwrap();
        let b: Vec<f64> = (0..mesh.len()).map(|i| 1.0 + (i % 3) as f64).collect();
        let x = DensityVector::from_fn(&mesh, |c, _| c.x + 0.3);
        let y = DensityVector::from_fn(&mesh, |c, n| c.y * n.z);
        for kind in [
            OperatorKind::SingleLayer,
            OperatorKind::Kstar,
            OperatorKind::Layer(3),
            OperatorKind::KstarLayer(2),
            OperatorKind::Robin,
            OperatorKind::RobinCoupling(2),
        ] {
            let op = disc.assemble(kind, Some(&b)).unwrap();
            let combo: Vec<f64> = x.values().iter().zip(y.values()).map(|(p, q)| 2.0 * p - q).collect();
            let lhs = op.apply(&DensityVector::new(&mesh, combo.clone()).unwrap()).unwrap();
            let (ax, ay) = (op.apply(&x).unwrap(), op.apply(&y).unwrap());
            for i in 0..mesh.len() {
                assert_relative_eq!(lhs.values()[i], 2.0 * ax.values()[i] - ay.values()[i], epsilon = 1e-12);
            }
            let free = disc.apply(kind, Some(&b), &combo).unwrap();
            assert_eq!(free, lhs.values(), "{kind}");
        }
    }

    #[test]
    fn robin_operator_composition() {
        let mesh = make_sphere_mesh(1.0, 1).unwrap();
        let fam = KernelFamily::new(3, 2).unwrap();
        let disc = Discretization::new(&mesh, &fam).unwrap();
        let b = vec![0.7; mesh.len()];
        let t = disc.assemble(OperatorKind::Robin, Some(&b)).unwrap();
        let s = disc.assemble(OperatorKind::SingleLayer, None).unwrap();
        let k = disc.assemble(OperatorKind::Kstar, None).unwrap();
        for i in 0..mesh.len() {
            for c in 0..mesh.len() {
                let id = if i == c { 0.5 } else { 0.0 };
                assert_relative_eq!(t.entry(i, c), -id + k.entry(i, c) + 0.7 * s.entry(i, c), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mesh = make_sphere_mesh(1.0, 0).unwrap();
        let fam = KernelFamily::new(3, 2).unwrap();
        let disc = Discretization::new(&mesh, &fam).unwrap();
        assert!(matches!(disc.assemble(OperatorKind::Layer(1), None), Err(OperatorError::Order(1))));
        assert!(matches!(disc.assemble(OperatorKind::Layer(3), None), Err(OperatorError::Order(3))));
        assert!(matches!(disc.assemble(OperatorKind::Robin, Some(&[1.0])), Err(OperatorError::Length { .. })));
        let fam4 = KernelFamily::new(4, 2).unwrap();
        assert!(matches!(assemble_single_layer(&mesh, &fam4), Err(OperatorError::Dimension(4))));
        let other = make_sphere_mesh(1.0, 1).unwrap();
        let op = assemble_kstar(&mesh).unwrap();
        assert!(matches!(op.apply(&DensityVector::constant(&other, 1.0)), Err(OperatorError::MeshMismatch)));
        assert!(DensityVector::new(&mesh, vec![1.0; 3]).is_err());
    }

    #[test]
    fn potentials_at_centre() {
        // M_1 1(0) = 4 pi K_1(1) = -1, M_2 1(0) = 4 pi K_2(1) = -1/2
        let mesh = make_sphere_mesh(1.0, 3).unwrap();
        let fam = KernelFamily::new(3, 2).unwrap();
        let one = DensityVector::constant(&mesh, 1.0);
        let o = Vec3::zeros();
        let area = mesh.total_area() / (4.0 * PI);
        assert_relative_eq!(eval_potential(&mesh, &fam, 1, &one, &o).unwrap(), -area, max_relative = 1e-2);
        assert_relative_eq!(eval_potential(&mesh, &fam, 2, &one, &o).unwrap(), -0.5 * area, max_relative = 1e-2);
        assert!((eval_potential(&mesh, &fam, 1, &one, &o).unwrap() + 1.0).abs() < 2e-2);
        let g = eval_potential_gradient(&mesh, &fam, 2, &one, &o).unwrap();
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = make_sphere_mesh(1.0, 2).unwrap();
        let fam = KernelFamily::new(3, 3).unwrap();
        let f = DensityVector::from_fn(&mesh, |c, _| 1.0 + c.x - 0.5 * c.z * c.y);
        let x = Vec3::new(0.2, -0.1, 0.3);
        let h = 1e-5;
        for j in 1..=3 {
            for quad in [Quadrature::Centroid, Quadrature::Adaptive] {
                let g = eval_potential_gradient_with(&mesh, &fam, j, &f, &x, quad).unwrap();
                for axis in 0..3 {
                    let mut e = Vec3::zeros();
                    e[axis] = h;
                    let fd = (eval_potential_with(&mesh, &fam, j, &f, &(x + e), quad).unwrap()
                        - eval_potential_with(&mesh, &fam, j, &f, &(x - e), quad).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[axis]).abs() < 1e-6 * (1.0 + g[axis].abs()), "j={j} {quad:?}");
                }
            }
        }
    }

    #[test]
    fn guards_and_exterior() {
        let mesh = make_sphere_mesh(1.0, 2).unwrap();
        let fam = KernelFamily::new(3, 1).unwrap();
        let one = DensityVector::constant(&mesh, 1.0);
        let near = Vec3::new(0.0, 0.0, 0.97);
        assert!(matches!(
            eval_potential(&mesh, &fam, 1, &one, &near),
            Err(OperatorError::NearBoundary { .. })
        ));
        // the adaptive rule resolves the same point: S1 = -1 everywhere inside
        let v = eval_potential_with(&mesh, &fam, 1, &one, &near, Quadrature::Adaptive).unwrap();
        assert!((v + 1.0).abs() < 3e-2, "{v}");
        assert!(matches!(
            eval_potential(&mesh, &fam, 1, &one, &Vec3::new(0.0, 0.0, 2.0)),
            Err(OperatorError::Exterior(..))
        ));
    }

    #[test]
    fn binary_dump_round_trip() {
        let mesh = make_sphere_mesh(1.0, 0).unwrap();
        let op = assemble_kstar(&mesh).unwrap();
        let mut buf = Vec::new();
        op.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 * 400);
        let (n, data) = DenseOperator::read_binary(&buf[..]).unwrap();
        assert_eq!(n, 20);
        assert_eq!(data, op.data());
    }

    #[test]
    fn norms() {
        let mesh = make_sphere_mesh(1.0, 1).unwrap();
        let k = assemble_kstar(&mesh).unwrap();
        let s = k.spectral_norm_estimate(50);
        assert!(s > 0.4 && s <= k.norm_inf() * (mesh.len() as f64).sqrt());
    }
}
