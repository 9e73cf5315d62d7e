//! Polyharmonic Robin problem
//!
//! ```text
//! Δ^m u = 0 in D,   ∂_N Δ^j u + b_j Δ^j u = h_j on ∂D,  j = 0..m-1
//! ```
//!
//! solved with the ansatz `u = Σ_{j=1}^m M_j h̃_{j-1}`. Since `Δ M_j = M_{j-1}`, the
//! boundary conditions become upper-triangular in the densities: level `l` reads
//! `T_l h̃_l + Σ_{j=l+2}^m T_{l,j-l} h̃_{j-1} = h_l` with `T_l = -I/2 + K* + b_l S` and
//! `T_{l,k} = K*_k + b_l M_k`, so the levels are solved from `m-1` down to `0`.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::defaults::Tolerances;
use crate::error::SolveError;
use crate::geometry::{BoundaryMesh, Vec3};
use crate::kernels::KernelFamily;
use crate::linalg::{relative_residual, LuFactorization};
use crate::operators::{check_interior, layer_at, DenseOperator, DensityVector, Discretization, OperatorKind, Quadrature};

#[derive(Debug, Clone, PartialEq)]
pub struct RobinProblem {
    m: usize,
    mesh: BoundaryMesh,
    b: Vec<DensityVector>,
    h: Vec<DensityVector>,
    p: f64,
}

impl RobinProblem {
    /// `b` and `h` hold one vector per level `0..m`; `m` is their common length.
    pub fn new(mesh: BoundaryMesh, b: Vec<DensityVector>, h: Vec<DensityVector>, p: f64) -> Result<Self, SolveError> {
        let m = h.len();
        if m == 0 {
            return Err(SolveError::Order);
        }
        if b.len() != m {
            return Err(SolveError::Count { what: "Robin coefficients", expected: m, got: b.len() });
        }
        for v in b.iter().chain(&h) {
            v.check_mesh(&mesh)?;
        }
        Ok(Self { m, mesh, b, h, p })
    }

    /// Same coefficient `b` on every level.
    pub fn with_uniform_coefficient(mesh: BoundaryMesh, b: f64, h: Vec<DensityVector>, p: f64) -> Result<Self, SolveError> {
        let coeffs = vec![DensityVector::constant(&mesh, b); h.len()];
        Self::new(mesh, coeffs, h, p)
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[DensityVector] {
        &self.b
    }

    pub fn data(&self) -> &[DensityVector] {
        &self.h
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }
}

/// Outcome of a passing coefficient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Advisory remarks on the exponent range.
    pub notes: Vec<String>,
    /// Status of the integrability conditions on `b_j`.
    pub integrability: String,
}

/// Hard requirements: `p` in `(1, inf)`, every `b_j >= 0` and not identically zero.
pub fn validate_coefficients(problem: &RobinProblem) -> Result<ValidationReport, SolveError> {
    let p = problem.p;
    if !(p > 1.0) || !p.is_finite() {
        return Err(SolveError::Exponent(p));
    }
    for (index, b) in problem.b.iter().enumerate() {
        if let Some((panel, &value)) = b.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(SolveError::NegativeCoefficient { index, panel, value });
        }
        if b.values().iter().all(|&v| v == 0.0) {
            return Err(SolveError::ZeroCoefficient(index));
        }
    }
    let mut notes = Vec::new();
    if p <= 2.0 {
        notes.push(format!("p = {p} lies in (1, 2]: existence and the estimates hold on Lipschitz domains"));
    } else {
        notes.push(format!(
            "p = {p} > 2: existence and the estimates are established for C^1 domains only; on a Lipschitz \
             boundary (creases, corners) the result is not covered"
        ));
    }
    if p == 2.0 {
        notes.push("p = 2 in three dimensions: b_j must lie in L^s for some s > 2".into());
    }
    Ok(ValidationReport { notes, integrability: "satisfied (discrete)".into() })
}

fn check_family(mesh: &BoundaryMesh, b: &DensityVector, family: &KernelFamily) -> Result<(), SolveError> {
    b.check_mesh(mesh)?;
    if family.dim() != 3 {
        return Err(crate::error::OperatorError::Dimension(family.dim()).into());
    }
    Ok(())
}

/// `T = -I/2 + K* + diag(b) S`.
pub fn assemble_t(mesh: &BoundaryMesh, b: &DensityVector, family: &KernelFamily) -> Result<DenseOperator, SolveError> {
    check_family(mesh, b, family)?;
    Ok(Discretization::new(mesh, family)?.assemble(OperatorKind::Robin, Some(b.values()))?)
}

/// `T_{l,k} = K*_k + diag(b_l) M_k` for `order = k >= 2`.
pub fn assemble_t_lj(
    mesh: &BoundaryMesh,
    b: &DensityVector,
    order: usize,
    family: &KernelFamily,
) -> Result<DenseOperator, SolveError> {
    check_family(mesh, b, family)?;
    if order < 2 {
        return Err(crate::error::OperatorError::Order(order).into());
    }
    Ok(Discretization::new(mesh, family)?.assemble(OperatorKind::RobinCoupling(order), Some(b.values()))?)
}

/// Diagnostics of one triangular level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub condition_estimate: f64,
    pub residual: f64,
    /// The factorisation of an earlier level with identical `b` was reused.
    pub reused: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    problem: RobinProblem,
    htilde: Vec<DensityVector>,
    family: KernelFamily,
    levels: Vec<LevelReport>,
}

struct Factored {
    b: Vec<f64>,
    matrix: Vec<f64>,
    lu: LuFactorization,
    cond: f64,
}

pub fn solve(problem: &RobinProblem) -> Result<Solution, SolveError> {
    solve_with(problem, &Tolerances::default())
}

/// Validates, then back-substitutes from level `m-1` to `0`.
pub fn solve_with(problem: &RobinProblem, tol: &Tolerances) -> Result<Solution, SolveError> {
    validate_coefficients(problem)?;
    let m = problem.m;
    let mesh = &problem.mesh;
    let n = mesh.len();
    let family = KernelFamily::new(3, m)?;
    let disc = Discretization::new(mesh, &family)?;

    let mut htilde: Vec<Option<DensityVector>> = vec![None; m];
    let mut levels = Vec::with_capacity(m);
    let mut cache: Vec<Rc<Factored>> = Vec::new();
    for l in (0..m).rev() {
        let b = problem.b[l].values();
        let mut rhs = problem.h[l].values().to_vec();
        for j in l + 2..=m {
            let known = htilde[j - 1].as_ref().expect("higher levels solved first");
            if known.values().iter().all(|&v| v == 0.0) {
                continue;
            }
            let coupled = disc.apply(OperatorKind::RobinCoupling(j - l), Some(b), known.values())?;
            for (r, c) in rhs.iter_mut().zip(coupled) {
                *r -= c;
            }
        }

        let (factored, reused) = match cache.iter().find(|f| f.b == b) {
            Some(f) => (Rc::clone(f), true),
            None => {
                let t = disc.assemble(OperatorKind::Robin, Some(b))?.into_data();
                let lu = LuFactorization::factor(n, t.clone());
                let cond = lu.condition_estimate();
                let f = Rc::new(Factored { b: b.to_vec(), matrix: t, lu, cond });
                cache.push(Rc::clone(&f));
                (f, false)
            }
        };
        if factored.lu.is_singular() || !(factored.cond <= tol.cond_max) {
            return Err(SolveError::IllConditioned { level: l, cond: factored.cond });
        }

        let (x, residual) = if rhs.iter().all(|&v| v == 0.0) {
            (vec![0.0; n], 0.0)
        } else {
            let x = factored.lu.solve(&rhs);
            let res = relative_residual(n, &factored.matrix, &x, &rhs);
            (x, res)
        };
        if !(residual < tol.residual_max) {
            return Err(SolveError::Residual { level: l, residual, limit: tol.residual_max });
        }
        levels.push(LevelReport { level: l, condition_estimate: factored.cond, residual, reused });
        htilde[l] = Some(DensityVector::new(mesh, x)?);
    }
    levels.reverse();
    Ok(Solution {
        problem: problem.clone(),
        htilde: htilde.into_iter().map(|h| h.expect("every level solved")).collect(),
        family,
        levels,
    })
}

/// Serialisable view of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionExport {
    pub m: usize,
    pub p: f64,
    pub panels: usize,
    pub mesh_tag: String,
    pub condition_estimates: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `htilde[j][k]`: density `h̃_j` on panel `k`.
    pub htilde: Vec<Vec<f64>>,
}

impl Solution {
    pub fn problem(&self) -> &RobinProblem {
        &self.problem
    }

    pub fn order(&self) -> usize {
        self.problem.m
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.problem.mesh
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn densities(&self) -> &[DensityVector] {
        &self.htilde
    }

    /// One entry per level `0..m`.
    pub fn levels(&self) -> &[LevelReport] {
        &self.levels
    }

    pub fn condition_estimates(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.condition_estimate).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.residual).collect()
    }

    /// `(Δ^k u, ∇Δ^k u)` at `x`, where `Δ^k u = Σ_{j=k+1}^m M_{j-k} h̃_{j-1}`.
    pub fn evaluate_field(&self, x: &Vec3, k: usize, quad: Quadrature) -> Result<(f64, Vec3), SolveError> {
        let m = self.problem.m;
        if k >= m {
            return Err(SolveError::LaplacianOrder { k, m });
        }
        check_interior(&self.problem.mesh, x, quad)?;
        let mut acc: Option<(f64, Vec3)> = None;
        for j in k + 1..=m {
            let (v, g) = layer_at(&self.problem.mesh, &self.family, j - k, self.htilde[j - 1].values(), x, quad);
            acc = Some(match acc {
                None => (v, g),
                Some((av, ag)) => (av + v, ag + g),
            });
        }
        Ok(acc.expect("k < m leaves at least one term"))
    }

    pub fn evaluate(&self, x: &Vec3) -> Result<f64, SolveError> {
        Ok(self.evaluate_field(x, 0, Quadrature::Centroid)?.0)
    }

    pub fn evaluate_gradient(&self, x: &Vec3) -> Result<Vec3, SolveError> {
        Ok(self.evaluate_field(x, 0, Quadrature::Centroid)?.1)
    }

    /// `Δ^k u(x)` for `0 <= k < m`.
    pub fn evaluate_iterated_laplacian(&self, x: &Vec3, k: usize) -> Result<f64, SolveError> {
        Ok(self.evaluate_field(x, k, Quadrature::Centroid)?.0)
    }

    pub fn export(&self) -> SolutionExport {
        SolutionExport {
            m: self.problem.m,
            p: self.problem.p,
            panels: self.problem.mesh.len(),
            mesh_tag: format!("{:016x}", self.problem.mesh.tag()),
            condition_estimates: self.condition_estimates(),
            residuals: self.residuals(),
            htilde: self.htilde.iter().map(|h| h.values().to_vec()).collect(),
        }
    }
}
