//! C interface. Meshes, problems and solutions are opaque handles created by the
//! `*_new`/constructor functions and released with the matching `*_free`. Every fallible
//! call returns a [`PolyrobinStatus`]; the message of the last failure on the calling
//! thread is available from [`polyrobin_last_error`].
//!
//! Per-panel arrays are laid out level by level: entry `l * N + k` belongs to level `l`,
//! panel `k`. Points and vectors are 3 consecutive doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use polyrobin::config::{ConfigError, ProblemConfig};
use polyrobin::error::{MeshError, OperatorError, SolveError};
use polyrobin::geometry::{load_mesh, make_cube_mesh, make_sphere_mesh, BoundaryMesh, Vec3};
use polyrobin::operators::{DensityVector, Quadrature};
use polyrobin::robin::{solve_with, RobinProblem, Solution};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyrobinStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Bad argument, size mismatch or unreadable config.
    InvalidArgument = 2,
    /// Robin coefficients or the exponent failed validation.
    Validation = 3,
    /// Condition estimate or residual above the limit.
    IllConditioned = 4,
    /// Evaluation point outside or too close to the boundary.
    EvalPoint = 5,
    /// Mesh generation or validation failed.
    Mesh = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

pub struct PolyrobinMesh(BoundaryMesh);

pub struct PolyrobinProblem {
    problem: RobinProblem,
    tolerances: polyrobin::defaults::Tolerances,
}

pub struct PolyrobinSolution(Solution);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: PolyrobinStatus, msg: impl Into<String>) -> PolyrobinStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn solve_status(e: &SolveError) -> PolyrobinStatus {
    match e {
        SolveError::NegativeCoefficient { .. } | SolveError::ZeroCoefficient(_) | SolveError::Exponent(_) => {
            PolyrobinStatus::Validation
        }
        SolveError::IllConditioned { .. } | SolveError::Residual { .. } => PolyrobinStatus::IllConditioned,
        SolveError::Operator(OperatorError::NearBoundary { .. } | OperatorError::Exterior(..)) => {
            PolyrobinStatus::EvalPoint
        }
        _ => PolyrobinStatus::InvalidArgument,
    }
}

type Res<T> = Result<T, PolyrobinStatus>;

fn from_solve(e: SolveError) -> PolyrobinStatus {
    fail(solve_status(&e), e.to_string())
}

fn from_mesh(e: MeshError) -> PolyrobinStatus {
    fail(PolyrobinStatus::Mesh, e.to_string())
}

fn from_config(e: ConfigError) -> PolyrobinStatus {
    match e {
        ConfigError::Mesh(m) => from_mesh(m),
        other => fail(PolyrobinStatus::InvalidArgument, other.to_string()),
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Res<()>) -> PolyrobinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolyrobinStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PolyrobinStatus::Internal, "panic inside polyrobin"),
    }
}

fn non_null<T>(p: *const T, what: &str) -> Res<()> {
    if p.is_null() {
        Err(fail(PolyrobinStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Res<()> {
    non_null(out, "output handle")?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn path_arg<'a>(path: *const c_char) -> Res<&'a Path> {
    non_null(path, "path")?;
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(PolyrobinStatus::InvalidArgument, "path is not UTF-8"))
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Res<()> {
    non_null(out, "output buffer")?;
    if len < values.len() {
        return Err(fail(
            PolyrobinStatus::InvalidArgument,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated
/// to `len - 1` bytes) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Icosphere of the given radius; refinement `r` has `20 * 4^r` panels.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_mesh_sphere(radius: f64, refinement: u32, out: *mut *mut PolyrobinMesh) -> PolyrobinStatus {
    guard(|| put(out, PolyrobinMesh(make_sphere_mesh(radius, refinement).map_err(from_mesh)?)))
}

/// Axis-aligned cube centred at the origin; refinement `r` has `12 * 4^r` panels.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_mesh_cube(side: f64, refinement: u32, out: *mut *mut PolyrobinMesh) -> PolyrobinStatus {
    guard(|| put(out, PolyrobinMesh(make_cube_mesh(side, refinement).map_err(from_mesh)?)))
}

/// Triangle mesh from an OFF file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_mesh_load(path: *const c_char, out: *mut *mut PolyrobinMesh) -> PolyrobinStatus {
    guard(|| {
        let path = path_arg(path)?;
        let file = std::fs::File::open(path)
            .map_err(|e| fail(PolyrobinStatus::InvalidArgument, format!("{}: {e}", path.display())))?;
        put(out, PolyrobinMesh(load_mesh(std::io::BufReader::new(file)).map_err(from_mesh)?))
    })
}

/// Number of panels, 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_mesh_panel_count(mesh: *const PolyrobinMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.len())
}

/// Panel centroids, `3 * N` values.
///
/// # Safety
/// `mesh` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_mesh_centroids(mesh: *const PolyrobinMesh, out: *mut f64, len: usize) -> PolyrobinStatus {
    guard(|| {
        non_null(mesh, "mesh")?;
        let flat: Vec<f64> = (*mesh).0.centroids().iter().flat_map(|c| [c.x, c.y, c.z]).collect();
        copy_out(&flat, out, len)
    })
}

/// Outward unit normals, `3 * N` values.
///
/// # Safety
/// `mesh` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_mesh_normals(mesh: *const PolyrobinMesh, out: *mut f64, len: usize) -> PolyrobinStatus {
    guard(|| {
        non_null(mesh, "mesh")?;
        let flat: Vec<f64> = (*mesh).0.normals().iter().flat_map(|c| [c.x, c.y, c.z]).collect();
        copy_out(&flat, out, len)
    })
}

/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_mesh_free(mesh: *mut PolyrobinMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Problem of order `m` on a copy of `mesh`: `b` and `h` hold `m * N` values each, `p`
/// is the data exponent.
///
/// # Safety
/// `mesh` must be a live handle, `b` and `h` point to `m * N` doubles, `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_problem_new(
    mesh: *const PolyrobinMesh,
    m: usize,
    b: *const f64,
    h: *const f64,
    p: f64,
    out: *mut *mut PolyrobinProblem,
) -> PolyrobinStatus {
    guard(|| {
        non_null(mesh, "mesh")?;
        non_null(b, "b")?;
        non_null(h, "h")?;
        let mesh = &(*mesh).0;
        let n = mesh.len();
        let levels = |ptr: *const f64| -> Res<Vec<DensityVector>> {
            let all = std::slice::from_raw_parts(ptr, m * n);
            all.chunks(n.max(1))
                .take(m)
                .map(|c| DensityVector::new(mesh, c.to_vec()).map_err(|e| from_solve(e.into())))
                .collect()
        };
        let problem = RobinProblem::new(mesh.clone(), levels(b)?, levels(h)?, p).map_err(from_solve)?;
        put(out, PolyrobinProblem { problem, tolerances: Default::default() })
    })
}

/// Problem from a JSON config file (same format as the command-line tool).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_problem_from_config(path: *const c_char, out: *mut *mut PolyrobinProblem) -> PolyrobinStatus {
    guard(|| {
        let cfg = ProblemConfig::load(path_arg(path)?).map_err(from_config)?;
        let problem = cfg.build_problem().map_err(from_config)?;
        put(out, PolyrobinProblem { problem, tolerances: cfg.tolerances })
    })
}

/// Order `m`, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_problem_order(problem: *const PolyrobinProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.order())
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_problem_free(problem: *mut PolyrobinProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Validates and solves.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_solve(problem: *const PolyrobinProblem, out: *mut *mut PolyrobinSolution) -> PolyrobinStatus {
    guard(|| {
        non_null(problem, "problem")?;
        let p = &*problem;
        put(out, PolyrobinSolution(solve_with(&p.problem, &p.tolerances).map_err(from_solve)?))
    })
}

/// `Δ^k u` and its gradient at `x` (3 doubles); `grad` may be null.
///
/// # Safety
/// `solution` must be a live handle, `x` point to 3 doubles, `value` be writable and
/// `grad` null or point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_solution_evaluate(
    solution: *const PolyrobinSolution,
    x: *const f64,
    k: usize,
    value: *mut f64,
    grad: *mut f64,
) -> PolyrobinStatus {
    guard(|| {
        non_null(solution, "solution")?;
        non_null(x, "x")?;
        non_null(value, "value")?;
        let x = std::slice::from_raw_parts(x, 3);
        let (v, g) =
            (*solution).0.evaluate_field(&Vec3::new(x[0], x[1], x[2]), k, Quadrature::Centroid).map_err(from_solve)?;
        *value = v;
        if !grad.is_null() {
            copy_out(&[g.x, g.y, g.z], grad, 3)?;
        }
        Ok(())
    })
}

/// Density `h̃_level`, `N` values.
///
/// # Safety
/// `solution` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_solution_density(
    solution: *const PolyrobinSolution,
    level: usize,
    out: *mut f64,
    len: usize,
) -> PolyrobinStatus {
    guard(|| {
        non_null(solution, "solution")?;
        let d = (*solution).0.densities();
        let v = d
            .get(level)
            .ok_or_else(|| fail(PolyrobinStatus::InvalidArgument, format!("level {level} >= order {}", d.len())))?;
        copy_out(v.values(), out, len)
    })
}

/// Relative residual of each level system, `m` values.
///
/// # Safety
/// `solution` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_solution_residuals(solution: *const PolyrobinSolution, out: *mut f64, len: usize) -> PolyrobinStatus {
    guard(|| {
        non_null(solution, "solution")?;
        copy_out(&(*solution).0.residuals(), out, len)
    })
}

/// Condition estimate of each level system, `m` values.
///
/// # Safety
/// `solution` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_solution_condition(solution: *const PolyrobinSolution, out: *mut f64, len: usize) -> PolyrobinStatus {
    guard(|| {
        non_null(solution, "solution")?;
        copy_out(&(*solution).0.condition_estimates(), out, len)
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polyrobin_solution_free(solution: *mut PolyrobinSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
