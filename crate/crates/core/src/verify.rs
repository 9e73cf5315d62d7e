//! Manufactured-solution suites, convergence studies and discrete surrogates of the
//! a priori estimates
//!
//! ```text
//! ||M(∇u)||_{L^p(∂D)}        <= C Σ_{j>=0} ||h_j||_p      (ratio_35)
//! ||u||_{L^p(D)}              <= C Σ_{j>=0} ||h_j||_p      (ratio_36)
//! ||∇(u - M_1 h̃_0)||_{L^p(D)} <= C Σ_{j>=1} ||h_j||_p      (ratio_37)
//! ```
//!
//! The constants are unknown, so only the stability of the ratios under refinement is
//! checked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults::Tolerances;
use crate::error::{SolveError, VerifyError};
use crate::geometry::{make_cube_mesh, make_sphere_mesh, nt_cone_samples, BoundaryMesh, Vec3};
use crate::kernels::KernelFamily;
use crate::operators::{assemble_kstar, layer_at, DensityVector, Quadrature, GUARD_FACTOR};
use crate::robin::{solve_with, RobinProblem, Solution};

/// Closed-form polyharmonic fields in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Field {
    /// `u = 1`
    Constant,
    /// `u = 1 / |X - X_0|`, harmonic away from `X_0`.
    PointSource(Vec3),
    /// `u = |X|^2`: `Δu = 6`.
    RadiusSquared,
    /// `u = |X|^2 x_1`: `Δu = 10 x_1`.
    RadiusSquaredX1,
    /// `u = |X|^4`: `Δu = 20 |X|^2`, `Δ²u = 120`.
    RadiusFourth,
}

impl Field {
    /// `Δ^k u(x)`.
    pub fn laplacian(&self, k: usize, x: &Vec3) -> f64 {
        let r2 = x.norm_squared();
        match (self, k) {
            (_, 0) => match self {
                Field::Constant => 1.0,
                Field::PointSource(x0) => 1.0 / (x - x0).norm(),
                Field::RadiusSquared => r2,
                Field::RadiusSquaredX1 => r2 * x.x,
                Field::RadiusFourth => r2 * r2,
            },
            (Field::RadiusSquared, 1) => 6.0,
            (Field::RadiusSquaredX1, 1) => 10.0 * x.x,
            (Field::RadiusFourth, 1) => 20.0 * r2,
            (Field::RadiusFourth, 2) => 120.0,
            _ => 0.0,
        }
    }

    /// `∇Δ^k u(x)`.
    pub fn laplacian_gradient(&self, k: usize, x: &Vec3) -> Vec3 {
        let r2 = x.norm_squared();
        match (self, k) {
            (Field::PointSource(x0), 0) => {
                let d = x - x0;
                -d / d.norm().powi(3)
            }
            (Field::RadiusSquared, 0) => 2.0 * x,
            (Field::RadiusSquaredX1, 0) => 2.0 * x.x * x + Vec3::new(r2, 0.0, 0.0),
            (Field::RadiusSquaredX1, 1) => Vec3::new(10.0, 0.0, 0.0),
            (Field::RadiusFourth, 0) => 4.0 * r2 * x,
            (Field::RadiusFourth, 1) => 40.0 * x,
            _ => Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub id: &'static str,
    pub m: usize,
    pub field: Field,
    pub description: &'static str,
}

impl ManufacturedCase {
    /// `h_j = ∂_N Δ^j u + b_j Δ^j u` at panel centroids with flat-panel normals.
    pub fn robin_data(&self, mesh: &BoundaryMesh, b: &[DensityVector]) -> Vec<DensityVector> {
        (0..self.m)
            .map(|j| {
                let values = mesh
                    .centroids()
                    .iter()
                    .zip(mesh.normals())
                    .zip(b[j].values())
                    .map(|((c, n), bj)| self.field.laplacian_gradient(j, c).dot(n) + bj * self.field.laplacian(j, c))
                    .collect();
                DensityVector::new(mesh, values).expect("one value per panel")
            })
            .collect()
    }

    /// Problem with the same constant coefficient `b` on every level.
    pub fn problem(&self, mesh: BoundaryMesh, b: f64, p: f64) -> Result<RobinProblem, SolveError> {
        let coeffs = vec![DensityVector::constant(&mesh, b); self.m];
        let h = self.robin_data(&mesh, &coeffs);
        RobinProblem::new(mesh, coeffs, h, p)
    }
}

pub fn manufactured_suite() -> Vec<ManufacturedCase> {
    vec![
        ManufacturedCase { id: "a", m: 1, field: Field::Constant, description: "u = 1" },
        ManufacturedCase {
            id: "b",
            m: 1,
            field: Field::PointSource(Vec3::new(0.0, 0.0, 2.0)),
            description: "u = 1/|X - (0,0,2)|",
        },
        ManufacturedCase { id: "c", m: 2, field: Field::RadiusSquared, description: "u = |X|^2" },
        ManufacturedCase { id: "d", m: 2, field: Field::RadiusSquaredX1, description: "u = |X|^2 x_1" },
        ManufacturedCase { id: "e", m: 3, field: Field::RadiusFourth, description: "u = |X|^4" },
    ]
}

pub fn find_case(id: &str) -> Result<ManufacturedCase, VerifyError> {
    manufactured_suite()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| VerifyError::UnknownCase(id.to_string()))
}

/// `min(sample_margin * h_max, inradius_fraction * inradius)`, never inside the guard band.
pub fn sample_margin(mesh: &BoundaryMesh, tol: &Tolerances) -> f64 {
    let m = (tol.sample_margin * mesh.h_max()).min(tol.inradius_fraction * mesh.inradius());
    m.max(GUARD_FACTOR * mesh.h_max())
}

/// `count` points uniform in the bounding box, kept when inside with at least `margin`
/// clearance. Deterministic for a given seed.
pub fn interior_samples(mesh: &BoundaryMesh, count: usize, margin: f64, seed: u64) -> Result<Vec<Vec3>, VerifyError> {
    let (lo, hi) = mesh.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_trials = 2000 * count.max(1);
    for _ in 0..max_trials {
        if out.len() == count {
            break;
        }
        let x = Vec3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        if mesh.contains(&x) && mesh.distance(&x) >= margin {
            out.push(x);
        }
    }
    if out.len() < count {
        return Err(VerifyError::Sampling { wanted: count, found: out.len(), margin });
    }
    Ok(out)
}

/// Errors at interior samples, each normalised by the largest exact magnitude over the
/// samples (absolute when the exact field vanishes there).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub samples: usize,
    pub max_err_u: f64,
    pub mean_err_u: f64,
    pub max_err_grad: f64,
    /// `Δ^k u` for `k = 1..m`.
    pub max_err_lap: Vec<f64>,
}

fn normalised(errs: &[f64], exact: &[f64]) -> (f64, f64) {
    let scale = exact.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let max = errs.iter().fold(0.0, |m: f64, v| m.max(*v));
    let mean = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
    (max / scale, mean / scale)
}

pub fn sample_errors(solution: &Solution, field: &Field, samples: &[Vec3]) -> Result<ErrorStats, VerifyError> {
    let m = solution.order();
    let per_point: Vec<Vec<(f64, Vec3)>> = samples
        .par_iter()
        .map(|x| (0..m).map(|k| solution.evaluate_field(x, k, Quadrature::Centroid)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let mut max_err_lap = Vec::new();
    let mut u_stats = (0.0, 0.0);
    let mut grad_err = 0.0;
    for k in 0..m {
        let errs: Vec<f64> = samples.iter().zip(&per_point).map(|(x, v)| (v[k].0 - field.laplacian(k, x)).abs()).collect();
        let exact: Vec<f64> = samples.iter().map(|x| field.laplacian(k, x)).collect();
        let stats = normalised(&errs, &exact);
        if k == 0 {
            u_stats = stats;
            let gerrs: Vec<f64> =
                samples.iter().zip(&per_point).map(|(x, v)| (v[0].1 - field.laplacian_gradient(0, x)).norm()).collect();
            let gexact: Vec<f64> = samples.iter().map(|x| field.laplacian_gradient(0, x).norm()).collect();
            grad_err = normalised(&gerrs, &gexact).0;
        } else {
            max_err_lap.push(stats.0);
        }
    }
    Ok(ErrorStats { samples: samples.len(), max_err_u: u_stats.0, mean_err_u: u_stats.1, max_err_grad: grad_err, max_err_lap })
}

/// Discrete non-tangential maximal function of `∇u` in `L^p(∂D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtEstimate {
    pub value: f64,
    pub depths: Vec<f64>,
    /// Panels whose cone held no usable sample; left out of the norm.
    pub excluded: Vec<usize>,
}

/// Geometric depths `h_max, 2 h_max, 4 h_max, ...` up to half the inradius; the half
/// inradius alone when even `h_max` exceeds it.
pub fn cone_depths(mesh: &BoundaryMesh) -> Vec<f64> {
    let top = 0.5 * mesh.inradius();
    let mut out = Vec::new();
    let mut t = mesh.h_max();
    while t <= top {
        out.push(t);
        t *= 2.0;
    }
    if out.is_empty() {
        out.push(top);
    }
    out
}

pub fn nt_maximal_estimate(solution: &Solution, aperture: f64, p: f64) -> Result<NtEstimate, VerifyError> {
    let mesh = solution.mesh();
    let depths = cone_depths(mesh);
    let sups: Vec<Option<f64>> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let set = match nt_cone_samples(mesh, i, aperture, &depths) {
                Ok(set) => set,
                Err(crate::error::MeshError::EmptyCone(_)) => return Ok(None),
                Err(e) => return Err(VerifyError::from(e)),
            };
            let mut best: Option<f64> = None;
            for pt in &set.points {
                match solution.evaluate_field(&pt.point, 0, Quadrature::Centroid) {
                    Ok((_, g)) => best = Some(best.map_or(g.norm(), |b| b.max(g.norm()))),
                    Err(SolveError::Operator(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(best)
        })
        .collect::<Result<_, VerifyError>>()?;
    let mut excluded = Vec::new();
    let mut sum = 0.0;
    for (i, s) in sups.iter().enumerate() {
        match s {
            Some(v) => sum += mesh.areas()[i] * v.powf(p),
            None => excluded.push(i),
        }
    }
    Ok(NtEstimate { value: sum.powf(1.0 / p), depths, excluded })
}

/// Integration region for Monte Carlo volume norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Ball { center: Vec3, radius: f64 },
    /// Interior points at least `margin` from the surface.
    Interior { margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloNorm {
    pub value: f64,
    /// One standard error of `value`.
    pub std_error: f64,
    pub accepted: usize,
    pub trials: usize,
}

/// `(∫_region |f|^p)^{1/p}` by hit-or-miss sampling of the region's bounding box until
/// `points` samples are accepted.
pub fn lp_norm_monte_carlo<F>(
    mesh: &BoundaryMesh,
    region: Region,
    p: f64,
    points: usize,
    seed: u64,
    f: F,
) -> Result<MonteCarloNorm, VerifyError>
where
    F: Fn(&Vec3) -> Result<f64, SolveError> + Sync,
{
    let (lo, hi) = match region {
        Region::Ball { center, radius } => (center - Vec3::repeat(radius), center + Vec3::repeat(radius)),
        Region::Interior { .. } => mesh.bounding_box(),
    };
    let inside = |x: &Vec3| match region {
        Region::Ball { center, radius } => (x - center).norm() < radius,
        Region::Interior { margin } => mesh.contains(x) && mesh.distance(x) >= margin,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = Vec::with_capacity(points);
    let mut trials = 0usize;
    let max_trials = 1000 * points.max(1);
    while accepted.len() < points && trials < max_trials {
        trials += 1;
        let x = Vec3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z));
        if inside(&x) {
            accepted.push(x);
        }
    }
    if accepted.len() < points {
        let margin = if let Region::Interior { margin } = region { margin } else { 0.0 };
        return Err(VerifyError::Sampling { wanted: points, found: accepted.len(), margin });
    }
    let values: Vec<f64> = accepted.par_iter().map(|x| f(x).map(|v| v.abs().powf(p))).collect::<Result<_, _>>()?;
    let box_volume = (hi - lo).iter().product::<f64>();
    let t = trials as f64;
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    let integral = box_volume * sum / t;
    // per-trial contributions are box_volume * |f|^p on hits and 0 on misses
    let var = (box_volume * box_volume * sum_sq / t - integral * integral).max(0.0) / (t - 1.0).max(1.0);
    let se_integral = var.sqrt();
    let value = integral.powf(1.0 / p);
    let std_error = if integral > 0.0 { se_integral * value / (p * integral) } else { 0.0 };
    Ok(MonteCarloNorm { value, std_error, accepted: accepted.len(), trials })
}

/// Width of the band the centroid evaluator refuses.
pub fn guard_margin(mesh: &BoundaryMesh) -> f64 {
    GUARD_FACTOR * mesh.h_max()
}

/// `||u||_{L^p}` over interior points at least `margin` (never less than the guard) from
/// the boundary.
pub fn lp_interior_norm(solution: &Solution, p: f64, margin: f64, tol: &Tolerances) -> Result<MonteCarloNorm, VerifyError> {
    let region = Region::Interior { margin: margin.max(guard_margin(solution.mesh())) };
    lp_norm_monte_carlo(solution.mesh(), region, p, tol.mc_points, tol.mc_seed, |x| {
        Ok(solution.evaluate_field(x, 0, Quadrature::Centroid)?.0)
    })
}

/// `||∇(u - M_1 h̃_0)||_{L^p}` over the same region, i.e. the gradient of
/// `Σ_{j>=2} M_j h̃_{j-1}`.
pub fn drift_corrected_gradient_norm(
    solution: &Solution,
    p: f64,
    margin: f64,
    tol: &Tolerances,
) -> Result<MonteCarloNorm, VerifyError> {
    let mesh = solution.mesh();
    let region = Region::Interior { margin: margin.max(guard_margin(mesh)) };
    lp_norm_monte_carlo(mesh, region, p, tol.mc_points, tol.mc_seed, |x| {
        let mut g = Vec3::zeros();
        for j in 2..=solution.order() {
            g += layer_at(mesh, solution.family(), j, solution.densities()[j - 1].values(), x, Quadrature::Centroid).1;
        }
        Ok(g.norm())
    })
}

/// The three estimate ratios with `p = 2`. `ratio_37` is absent when `Σ_{j>=1} ||h_j||`
/// vanishes (in particular for `m = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub ratio_35: f64,
    pub ratio_36: f64,
    pub ratio_37: Option<f64>,
    pub excluded_panels: usize,
}

/// Volume norms are taken over points at least `margin` from the boundary; a study
/// passes the coarsest guard so every level integrates over the same region.
pub fn estimate_ratios(solution: &Solution, margin: f64, tol: &Tolerances) -> Result<Ratios, VerifyError> {
    let p = 2.0;
    let mesh = solution.mesh();
    let norms: Vec<f64> = solution.problem().data().iter().map(|h| h.lp_norm(mesh, p)).collect();
    let all: f64 = norms.iter().sum();
    let higher: f64 = norms[1..].iter().sum();
    let nt = nt_maximal_estimate(solution, tol.aperture, p)?;
    let u = lp_interior_norm(solution, p, margin, tol)?;
    let ratio_37 = if higher > 0.0 { Some(drift_corrected_gradient_norm(solution, p, margin, tol)?.value / higher) } else { None };
    Ok(Ratios { ratio_35: nt.value / all, ratio_36: u.value / all, ratio_37, excluded_panels: nt.excluded.len() })
}

/// One solve of a manufactured case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRun {
    pub case_id: String,
    pub refinement: u32,
    pub panels: usize,
    pub h_max: f64,
    pub errors: ErrorStats,
    pub condition_estimates: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ratios: Option<Ratios>,
}

pub fn run_case_on(
    case: &ManufacturedCase,
    mesh: BoundaryMesh,
    refinement: u32,
    samples: &[Vec3],
    ratio_margin: Option<f64>,
    tol: &Tolerances,
) -> Result<CaseRun, VerifyError> {
    let problem = case.problem(mesh, 1.0, 2.0)?;
    let solution = solve_with(&problem, tol)?;
    let errors = sample_errors(&solution, &case.field, samples)?;
    let ratios = match ratio_margin {
        Some(margin) => Some(estimate_ratios(&solution, margin, tol)?),
        None => None,
    };
    Ok(CaseRun {
        case_id: case.id.to_string(),
        refinement,
        panels: solution.mesh().len(),
        h_max: solution.mesh().h_max(),
        errors,
        condition_estimates: solution.condition_estimates(),
        residuals: solution.residuals(),
        ratios,
    })
}

/// Unit sphere at `refinement`, `b ≡ 1`, samples drawn for this mesh.
pub fn run_case(case: &ManufacturedCase, refinement: u32, tol: &Tolerances) -> Result<CaseRun, VerifyError> {
    let mesh = make_sphere_mesh(1.0, refinement)?;
    let samples = interior_samples(&mesh, tol.min_samples, sample_margin(&mesh, tol), tol.sample_seed)?;
    run_case_on(case, mesh, refinement, &samples, None, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    /// Unit sphere.
    Sphere,
    /// Cube of side 2 centred at the origin.
    Cube,
}

impl Surface {
    pub fn mesh(&self, refinement: u32) -> Result<BoundaryMesh, VerifyError> {
        Ok(match self {
            Surface::Sphere => make_sphere_mesh(1.0, refinement)?,
            Surface::Cube => make_cube_mesh(2.0, refinement)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub case_id: String,
    pub surface: Surface,
    pub runs: Vec<CaseRun>,
    /// Order from each level to the next, `log(e_r / e_{r+1}) / log(h_r / h_{r+1})` on the
    /// `u` error.
    pub step_orders: Vec<f64>,
    /// Least-squares slope of `log e` against `log h_max`.
    pub observed_order: f64,
}

impl ConvergenceReport {
    pub fn levels(&self) -> Vec<u32> {
        self.runs.iter().map(|r| r.refinement).collect()
    }

    pub fn max_err_u(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.errors.max_err_u).collect()
    }

    /// Strictly decreasing `u`, gradient and iterated-Laplacian errors.
    pub fn monotone(&self) -> bool {
        self.runs.windows(2).all(|w| {
            let (a, b) = (&w[0].errors, &w[1].errors);
            b.max_err_u < a.max_err_u
                && b.max_err_grad < a.max_err_grad
                && b.max_err_lap.iter().zip(&a.max_err_lap).all(|(y, x)| y < x)
        })
    }
}

fn order_fit(h: &[f64], e: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(e).filter(|(_, e)| **e > 0.0).map(|(h, e)| (h.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Runs `case` over `levels` on one sample set drawn for the coarsest mesh, so every
/// level is measured at the same points; volume norms likewise use the coarsest guard.
pub fn convergence_study(
    case: &ManufacturedCase,
    surface: Surface,
    levels: &[u32],
    with_ratios: bool,
    tol: &Tolerances,
) -> Result<ConvergenceReport, VerifyError> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(VerifyError::Refinements(*levels.first().unwrap_or(&0), *levels.last().unwrap_or(&0)));
    }
    let coarse = surface.mesh(levels[0])?;
    let samples = interior_samples(&coarse, tol.min_samples, sample_margin(&coarse, tol), tol.sample_seed)?;
    let ratio_margin = with_ratios.then(|| guard_margin(&coarse));
    let mut runs = Vec::with_capacity(levels.len());
    for &r in levels {
        let mesh = if r == levels[0] { coarse.clone() } else { surface.mesh(r)? };
        runs.push(run_case_on(case, mesh, r, &samples, ratio_margin, tol)?);
    }
    let h: Vec<f64> = runs.iter().map(|r| r.h_max).collect();
    let e: Vec<f64> = runs.iter().map(|r| r.errors.max_err_u).collect();
    let step_orders = (1..runs.len()).map(|i| (e[i - 1] / e[i]).ln() / (h[i - 1] / h[i]).ln()).collect();
    Ok(ConvergenceReport {
        case_id: case.id.to_string(),
        surface,
        runs,
        step_orders,
        observed_order: order_fit(&h, &e),
    })
}

/// Two-depth linear extrapolation to the boundary along the inward normal at each
/// centroid, using cone points at `fraction` and `2 fraction` of the panel diameter.
fn cone_limit<F>(mesh: &BoundaryMesh, aperture: f64, fraction: f64, f: F) -> Result<Vec<f64>, VerifyError>
where
    F: Fn(usize, &Vec3) -> f64 + Sync,
{
    (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let t = fraction * mesh.diameters()[i];
            let set = nt_cone_samples(mesh, i, aperture, &[t, 2.0 * t])?;
            let vals: Vec<f64> = set.points.iter().map(|p| f(i, &p.point)).collect();
            Ok(if vals.len() == 2 { 2.0 * vals[0] - vals[1] } else { vals[0] })
        })
        .collect()
}

/// Depth of the extrapolation points as a fraction of the panel diameter.
pub const TRACE_DEPTH: f64 = 0.05;

/// `max_i |∂_N S f (cone limit at c_i) - ((-I/2 + K*) f)_i| / ||f||_inf`.
pub fn jump_relation_error(mesh: &BoundaryMesh, f: &DensityVector, tol: &Tolerances) -> Result<f64, VerifyError> {
    f.check_mesh(mesh).map_err(SolveError::from)?;
    let family = KernelFamily::new(3, 1).map_err(SolveError::from)?;
    let kf = assemble_kstar(mesh).map_err(SolveError::from)?.apply(f).map_err(SolveError::from)?;
    let target: Vec<f64> = kf.values().iter().zip(f.values()).map(|(k, v)| k - 0.5 * v).collect();
    let trace = cone_limit(mesh, tol.aperture, TRACE_DEPTH, |i, x| {
        layer_at(mesh, &family, 1, f.values(), x, Quadrature::Adaptive).1.dot(&mesh.normals()[i])
    })?;
    let err = trace.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(err / f.max_abs().max(f64::MIN_POSITIVE))
}

/// `max_i |(∂_N Δ^k u + b_k Δ^k u)(cone limit at c_i) - h_k| / ||h_k||_inf` (absolute when
/// `h_k = 0`).
pub fn boundary_recovery_error(solution: &Solution, k: usize, tol: &Tolerances) -> Result<f64, VerifyError> {
    let m = solution.order();
    if k >= m {
        return Err(SolveError::LaplacianOrder { k, m }.into());
    }
    let mesh = solution.mesh();
    let b = solution.problem().coefficients()[k].values();
    let h = solution.problem().data()[k].values();
    let got = cone_limit(mesh, tol.aperture, TRACE_DEPTH, |i, x| {
        let mut v = 0.0;
        let mut g = Vec3::zeros();
        for j in k + 1..=m {
            let (a, c) = layer_at(mesh, solution.family(), j - k, solution.densities()[j - 1].values(), x, Quadrature::Adaptive);
            v += a;
            g += c;
        }
        g.dot(&mesh.normals()[i]) + b[i] * v
    })?;
    let err = got.iter().zip(h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = h.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// A named pass/fail check in a suite report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub refinements: Vec<u32>,
    pub studies: Vec<ConvergenceReport>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Available suites: `manufactured` (cases a-e on the sphere), `estimates` (ratio
/// stability for case c), `lipschitz` (case c on the cube, no absolute tolerance).
pub const SUITES: [&str; 3] = ["manufactured", "estimates", "lipschitz"];

/// Refinement from which absolute tolerances apply.
pub const REFERENCE_REFINEMENT: u32 = 3;

/// Absolute tolerances at the levels from `REFERENCE_REFINEMENT` on, each measured on
/// that level's own sample set (the study's shared set sits deeper inside).
fn tolerance_checks(
    case: &ManufacturedCase,
    levels: &[u32],
    tol: &Tolerances,
    checks: &mut Vec<Check>,
) -> Result<(), VerifyError> {
    let limit = if case.id == "a" { tol.constant_case } else { tol.manufactured };
    for &r in levels.iter().filter(|&&r| r >= REFERENCE_REFINEMENT) {
        let e = run_case(case, r, tol)?.errors;
        let worst = e.max_err_lap.iter().fold(e.max_err_u, |m, v| m.max(*v));
        checks.push(Check::new(
            format!("case {} refinement {r} tolerance", case.id),
            worst < limit,
            format!("max_err_u {:.3e}, max_err_lap {:?}, limit {limit:.1e}", e.max_err_u, e.max_err_lap),
        ));
    }
    Ok(())
}

fn monotone_check(study: &ConvergenceReport) -> Check {
    Check::new(
        format!("case {} errors decrease", study.case_id),
        study.monotone(),
        format!(
            "max_err_u {:?}, max_err_grad {:?}",
            study.max_err_u(),
            study.runs.iter().map(|r| r.errors.max_err_grad).collect::<Vec<_>>()
        ),
    )
}

/// Successive ratios of each estimate surrogate inside `[1/band, band]`.
pub fn ratio_checks(study: &ConvergenceReport, tol: &Tolerances) -> Vec<Check> {
    type Pick = fn(&Ratios) -> Option<f64>;
    let pick: [(&str, Pick); 3] =
        [("ratio_35", |r| Some(r.ratio_35)), ("ratio_36", |r| Some(r.ratio_36)), ("ratio_37", |r| r.ratio_37)];
    pick.iter()
        .map(|(name, get)| {
            let vals: Vec<Option<f64>> = study.runs.iter().map(|r| r.ratios.as_ref().and_then(get)).collect();
            let ok = vals.iter().all(|v| v.is_some_and(|x| x.is_finite() && x > 0.0))
                && vals.windows(2).all(|w| {
                    let q = w[1].unwrap() / w[0].unwrap();
                    q >= 1.0 / tol.ratio_band && q <= tol.ratio_band
                });
            Check::new(format!("case {} {name} stable", study.case_id), ok, format!("{vals:?}"))
        })
        .collect()
}

pub fn run_suite(name: &str, levels: &[u32], tol: &Tolerances) -> Result<SuiteReport, VerifyError> {
    let mut studies = Vec::new();
    let mut checks = Vec::new();
    match name {
        "manufactured" => {
            for case in manufactured_suite() {
                let study = convergence_study(&case, Surface::Sphere, levels, false, tol)?;
                checks.push(monotone_check(&study));
                tolerance_checks(&case, levels, tol, &mut checks)?;
                studies.push(study);
            }
        }
        "estimates" => {
            let study = convergence_study(&find_case("c")?, Surface::Sphere, levels, true, tol)?;
            checks.extend(ratio_checks(&study, tol));
            studies.push(study);
        }
        "lipschitz" => {
            let study = convergence_study(&find_case("c")?, Surface::Cube, levels, false, tol)?;
            let e = study.max_err_u();
            checks.push(Check::new(
                "case c on cube: u error decreases",
                e.windows(2).all(|w| w[1] < w[0]),
                format!("max_err_u {e:?}"),
            ));
            studies.push(study);
        }
        other => return Err(VerifyError::UnknownSuite(other.to_string())),
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport { suite: name.to_string(), refinements: levels.to_vec(), studies, checks, passed })
}

fn csv_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// One row per refinement per case.
pub fn report_csv(studies: &[ConvergenceReport]) -> String {
    let mut out = String::from("case,surface,refinement,N,max_err_u,max_err_grad,ratio_35,ratio_36,ratio_37,observed_order\n");
    for s in studies {
        for (i, r) in s.runs.iter().enumerate() {
            let ratios = r.ratios.as_ref();
            out.push_str(&format!(
                "{},{},{},{},{:e},{:e},{},{},{},{}\n",
                s.case_id,
                match s.surface {
                    Surface::Sphere => "sphere",
                    Surface::Cube => "cube",
                },
                r.refinement,
                r.panels,
                r.errors.max_err_u,
                r.errors.max_err_grad,
                csv_num(ratios.map(|q| q.ratio_35)),
                csv_num(ratios.map(|q| q.ratio_36)),
                csv_num(ratios.and_then(|q| q.ratio_37)),
                csv_num(if i == 0 { None } else { Some(s.step_orders[i - 1]) }),
            ));
        }
    }
    out
}
