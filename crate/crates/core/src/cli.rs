//! Command-line front end. [`run`] returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | a check failed |
//! | 2 | invalid arguments, config or mesh |
//! | 3 | coefficient validation failed |
//! | 4 | ill-conditioned system or residual too large |
//! | 5 | evaluation point outside or too close to the boundary |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{ConfigError, ProblemConfig};
use crate::defaults::Tolerances;
use crate::error::{OperatorError, SolveError, VerifyError};
use crate::geometry::Vec3;
use crate::kernels::{even_dimension_bracket, KernelFamily};
use crate::operators::{assemble_kstar, assemble_single_layer, check_interior, Quadrature};
use crate::robin::{assemble_t, solve_with, validate_coefficients, LevelReport, SolutionExport};
use crate::verify::{convergence_study, find_case, report_csv, run_suite, Surface};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CONDITIONING: i32 = 4;
pub const EXIT_EVAL_POINT: i32 = 5;

/// Overrides the worker thread count.
pub const THREADS_ENV: &str = "POLYROBIN_THREADS";

/// Recurrence check: step and distance for the finite-difference Laplacian.
const RECURRENCE_STEP: f64 = 1e-3;
const BRACKET_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "polyrobin", version, about = "Polyharmonic Robin problems by multi-layer potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the kernel coefficient table and run the recurrence checks.
    Kernels {
        #[arg(long)]
        n: usize,
        #[arg(long = "m-max")]
        m_max: usize,
        /// Also print one line per check.
        #[arg(long)]
        check: bool,
    },
    /// Solve the problem described by a JSON config.
    Solve {
        config: PathBuf,
        /// CSV of interior points `x,y,z`, one per line.
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Run single-threaded.
        #[arg(long)]
        deterministic: bool,
        /// Write the assembled operators as binary files into this directory.
        #[arg(long = "dump-operators")]
        dump_operators: Option<PathBuf>,
        /// Replace the mesh refinement of the config.
        #[arg(long)]
        refinement: Option<u32>,
    },
    /// Run a verification suite (manufactured, estimates, lipschitz).
    Verify {
        #[arg(long)]
        suite: String,
        /// Inclusive range `A..B`.
        #[arg(long, value_parser = parse_range)]
        refinements: Levels,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence study of one manufactured case.
    Convergence {
        #[arg(long = "case")]
        case_id: String,
        #[arg(long, value_parser = parse_range)]
        refinements: Levels,
        #[arg(long, value_enum, default_value_t = SurfaceArg::Sphere)]
        surface: SurfaceArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurfaceArg {
    Sphere,
    Cube,
}

impl From<SurfaceArg> for Surface {
    fn from(s: SurfaceArg) -> Self {
        match s {
            SurfaceArg::Sphere => Surface::Sphere,
            SurfaceArg::Cube => Surface::Cube,
        }
    }
}

/// Refinement levels from `--refinements`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Levels(pub Vec<u32>);

/// `"A..B"` (inclusive) or a single level `"A"`.
pub fn parse_range(s: &str) -> Result<Levels, String> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (s.trim(), s.trim()),
    };
    let a: u32 = a.parse().map_err(|_| format!("bad refinement '{a}'"))?;
    let b: u32 = b.parse().map_err(|_| format!("bad refinement '{b}'"))?;
    if b < a {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(Levels((a..=b).collect()))
}

/// Command failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_CONFIG, format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::new(EXIT_CONFIG, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::NegativeCoefficient { .. } | SolveError::ZeroCoefficient(_) | SolveError::Exponent(_) => {
                EXIT_VALIDATION
            }
            SolveError::IllConditioned { .. } | SolveError::Residual { .. } => EXIT_CONDITIONING,
            SolveError::Operator(OperatorError::NearBoundary { .. } | OperatorError::Exterior(..)) => EXIT_EVAL_POINT,
            _ => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        Self::new(EXIT_CONFIG, e.to_string())
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(contents).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Failure::io(path, e));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

/// Parses and runs; everything a command prints goes to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    let deterministic = matches!(cli.command, Command::Solve { deterministic: true, .. });
    let threads = if deterministic { Some(1) } else { threads };
    let result = match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::new(EXIT_CONFIG, format!("thread pool: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok((code, text)) => match out.write_all(text.as_bytes()) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command) -> Result<(i32, String), Failure> {
    let mut text = String::new();
    let code = match command {
        Command::Kernels { n, m_max, check } => cmd_kernels(n, m_max, check, &mut text)?,
        Command::Solve { config, eval, out: dir, deterministic: _, dump_operators, refinement } => {
            cmd_solve(&config, eval.as_deref(), &dir, dump_operators.as_deref(), refinement, &mut text)?
        }
        Command::Verify { suite, refinements, out: dir } => cmd_verify(&suite, &refinements.0, dir.as_deref(), &mut text)?,
        Command::Convergence { case_id, refinements, surface, out: dir } => {
            cmd_convergence(&case_id, &refinements.0, surface.into(), dir.as_deref(), &mut text)?
        }
    };
    Ok((code, text))
}

/// Coefficient table `m,a,s,has_log,c` (for log terms `K_m = a (r^s log r + c r^s)`),
/// then the recurrence checks at unit distance; for even `n` also the closed-form bracket.
pub fn cmd_kernels(n: usize, m_max: usize, verbose: bool, out: &mut String) -> Result<i32, Failure> {
    let family = KernelFamily::new(n, m_max).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let bad = |e: crate::error::KernelError| Failure::new(EXIT_CONFIG, e.to_string());
    out.push_str("m,a,s,has_log,c\n");
    for m in 1..=m_max {
        let terms = family.terms(m).map_err(bad)?;
        let c = family.companion_constant(m).map_err(bad)?;
        let lead = terms[0];
        let c = c.map(|c| format!("{c:e}")).unwrap_or_default();
        let _ = writeln!(out, "{m},{:e},{},{},{c}", lead.coeff, lead.power, lead.log);
    }

    let mut failures = Vec::new();
    let x: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat(0.0)).take(n).collect();
    let y = vec![0.0; n];
    for m in 2..=m_max {
        let res = family.recurrence_residual(m, &x, &y, RECURRENCE_STEP).map_err(bad)?;
        let coeff = family.coefficient_recurrence_error(m).map_err(bad)?;
        let ok = res < Tolerances::default().recurrence_max && coeff < 1e-12;
        if verbose {
            let _ = writeln!(out, "# recurrence m={m}: fd residual {res:.3e}, coefficient error {coeff:.3e} {}", verdict(ok));
        }
        if !ok {
            failures.push(format!("recurrence m={m} (fd residual {res:.3e})"));
        }
    }
    if n.is_multiple_of(2) {
        for m in (n / 2).max(1)..=m_max {
            let (Some(c), Some(expected)) = (family.companion_constant(m).map_err(bad)?, even_dimension_bracket(n, m))
            else {
                continue;
            };
            let diff = (c - expected).abs();
            let ok = diff < BRACKET_TOL;
            if verbose {
                let _ = writeln!(out, "# bracket m={m}: c {c:e}, closed form {expected:e} {}", verdict(ok));
            }
            if !ok {
                failures.push(format!("bracket m={m} (difference {diff:.3e})"));
            }
        }
    }
    if failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed checks: {}", failures.join(", "));
        Ok(EXIT_CHECK)
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

/// Points `x,y,z` per line; blank lines, `#` comments and a non-numeric header are skipped.
pub fn read_points(text: &str) -> Result<Vec<Vec3>, String> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 && v.iter().all(|c| c.is_finite()) => pts.push(Vec3::new(v[0], v[1], v[2])),
            Err(_) if pts.is_empty() && i == 0 => continue,
            _ => return Err(format!("line {}: expected x,y,z", i + 1)),
        }
    }
    Ok(pts)
}

#[derive(Serialize)]
struct SolveReport<'a> {
    #[serde(flatten)]
    solution: SolutionExport,
    levels: &'a [LevelReport],
    notes: Vec<String>,
}

pub fn cmd_solve(
    config: &Path,
    eval: Option<&Path>,
    out_dir: &Path,
    dump: Option<&Path>,
    refinement: Option<u32>,
    out: &mut String,
) -> Result<i32, Failure> {
    let mut cfg = ProblemConfig::load(config)?;
    if let Some(r) = refinement {
        cfg.override_refinement(r)?;
    }
    let points = match eval {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            read_points(&text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?
        }
        None => Vec::new(),
    };
    let problem = cfg.build_problem()?;
    let validation = validate_coefficients(&problem)?;
    for (i, x) in points.iter().enumerate() {
        check_interior(problem.mesh(), x, Quadrature::Centroid).map_err(|e| {
            Failure::new(EXIT_EVAL_POINT, format!("evaluation point {} ({}, {}, {}): {e}", i + 1, x.x, x.y, x.z))
        })?;
    }

    if let Some(dir) = dump {
        dump_operators(&problem, dir)?;
    }

    let solution = solve_with(&problem, &cfg.tolerances)?;
    let report = SolveReport { solution: solution.export(), levels: solution.levels(), notes: validation.notes };
    write_atomic(&out_dir.join("solution.json"), to_json(&report).as_bytes())?;
    let _ = writeln!(out, "solved m={} on {} panels", problem.order(), problem.mesh().len());
    for l in solution.levels() {
        let _ = writeln!(out, "level {}: cond {:.3e}, residual {:.3e}", l.level, l.condition_estimate, l.residual);
    }

    if !points.is_empty() {
        let m = problem.order();
        let mut csv = String::from("x,y,z,u");
        for k in 1..m {
            let _ = write!(csv, ",lap{k}");
        }
        csv.push_str(",grad_x,grad_y,grad_z\n");
        for x in &points {
            let (u, g) = solution.evaluate_field(x, 0, Quadrature::Centroid)?;
            let _ = write!(csv, "{},{},{},{u}", x.x, x.y, x.z);
            for k in 1..m {
                let _ = write!(csv, ",{}", solution.evaluate_iterated_laplacian(x, k)?);
            }
            let _ = writeln!(csv, ",{},{},{}", g.x, g.y, g.z);
        }
        write_atomic(&out_dir.join("eval.csv"), csv.as_bytes())?;
        let _ = writeln!(out, "evaluated {} points", points.len());
    }
    Ok(EXIT_OK)
}

/// `S.bin`, `Kstar.bin` and `T{l}.bin` per level, each an 8-byte little-endian size
/// followed by the row-major matrix.
fn dump_operators(problem: &crate::robin::RobinProblem, dir: &Path) -> Result<(), Failure> {
    let family = KernelFamily::new(3, problem.order()).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let mesh = problem.mesh();
    let op_err = |e: OperatorError| Failure::from(SolveError::from(e));
    let mut ops = vec![
        ("S.bin".to_string(), assemble_single_layer(mesh, &family).map_err(op_err)?),
        ("Kstar.bin".to_string(), assemble_kstar(mesh).map_err(op_err)?),
    ];
    for (l, b) in problem.coefficients().iter().enumerate() {
        ops.push((format!("T{l}.bin"), assemble_t(mesh, b, &family)?));
    }
    for (name, op) in ops {
        let mut bytes = Vec::new();
        op.write_binary(&mut bytes).map_err(|e| Failure::io(dir, e))?;
        write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(())
}

fn write_reports<T: Serialize>(dir: Option<&Path>, stem: &str, report: &T, csv: &str) -> Result<(), Failure> {
    if let Some(dir) = dir {
        write_atomic(&dir.join(format!("{stem}.json")), to_json(report).as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.csv")), csv.as_bytes())?;
    }
    Ok(())
}

pub fn cmd_verify(suite: &str, levels: &[u32], dir: Option<&Path>, out: &mut String) -> Result<i32, Failure> {
    let report = run_suite(suite, levels, &Tolerances::default())?;
    let csv = report_csv(&report.studies);
    write_reports(dir, &format!("verify_{suite}"), &report, &csv)?;
    if dir.is_none() {
        out.push_str(&to_json(&report));
    }
    for c in &report.checks {
        let _ = writeln!(out, "{} {}: {}", verdict_word(c.passed), c.name, c.detail);
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed checks: {}", failed.join("; "));
        Ok(EXIT_CHECK)
    }
}

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn cmd_convergence(
    case_id: &str,
    levels: &[u32],
    surface: Surface,
    dir: Option<&Path>,
    out: &mut String,
) -> Result<i32, Failure> {
    let tol = Tolerances::default();
    let case = find_case(case_id)?;
    let study = convergence_study(&case, surface, levels, false, &tol)?;
    let csv = report_csv(std::slice::from_ref(&study));
    write_reports(dir, &format!("convergence_{case_id}"), &study, &csv)?;
    out.push_str(&csv);
    let mut failed = Vec::new();
    if levels.len() >= 2 {
        let _ = writeln!(out, "observed order {:.3}", study.observed_order);
        if !(study.observed_order > tol.min_order) {
            failed.push(format!("observed order {:.3} <= {}", study.observed_order, tol.min_order));
        }
        if !study.monotone() {
            failed.push(format!("errors not decreasing: max_err_u {:?}", study.max_err_u()));
        }
    }
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed checks: {}", failed.join("; "));
        Ok(EXIT_CHECK)
    }
}
