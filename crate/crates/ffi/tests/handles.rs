use std::ffi::{c_char, CString};
use std::ptr::{null, null_mut};

use polyrobin_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { polyrobin_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn sphere(r: u32) -> *mut PolyrobinMesh {
    let mut mesh = null_mut();
    assert_eq!(unsafe { polyrobin_mesh_sphere(1.0, r, &mut mesh) }, PolyrobinStatus::Ok);
    mesh
}

/// Order-2 problem on `mesh` with data from `u = |X|^2` and `b = bval`.
fn radius_squared_problem(mesh: *mut PolyrobinMesh, bval: f64) -> (PolyrobinStatus, *mut PolyrobinProblem) {
    let n = unsafe { polyrobin_mesh_panel_count(mesh) };
    let mut centroids = vec![0.0; 3 * n];
    let mut normals = vec![0.0; 3 * n];
    unsafe {
        assert_eq!(polyrobin_mesh_centroids(mesh, centroids.as_mut_ptr(), centroids.len()), PolyrobinStatus::Ok);
        assert_eq!(polyrobin_mesh_normals(mesh, normals.as_mut_ptr(), normals.len()), PolyrobinStatus::Ok);
    }
    let b = vec![bval; 2 * n];
    let mut h = vec![0.0; 2 * n];
    for k in 0..n {
        let c = &centroids[3 * k..3 * k + 3];
        let nn = &normals[3 * k..3 * k + 3];
        let r2 = c.iter().map(|v| v * v).sum::<f64>();
        let dn = 2.0 * c.iter().zip(nn).map(|(a, b)| a * b).sum::<f64>();
        h[k] = dn + bval * r2;
        h[n + k] = bval * 6.0;
    }
    let mut problem = null_mut();
    let s = unsafe { polyrobin_problem_new(mesh, 2, b.as_ptr(), h.as_ptr(), 2.0, &mut problem) };
    (s, problem)
}

#[test]
fn solve_and_evaluate() {
    let mesh = sphere(2);
    assert_eq!(unsafe { polyrobin_mesh_panel_count(mesh) }, 320);
    let (s, problem) = radius_squared_problem(mesh, 1.0);
    assert_eq!(s, PolyrobinStatus::Ok);
    assert_eq!(unsafe { polyrobin_problem_order(problem) }, 2);
    let mut solution = null_mut();
    assert_eq!(unsafe { polyrobin_solve(problem, &mut solution) }, PolyrobinStatus::Ok);

    let x = [0.5, 0.0, 0.0];
    let (mut u, mut grad) = (0.0, [0.0; 3]);
    assert_eq!(unsafe { polyrobin_solution_evaluate(solution, x.as_ptr(), 0, &mut u, grad.as_mut_ptr()) }, PolyrobinStatus::Ok);
    assert!((u - 0.25).abs() < 0.05, "u = {u}");
    assert!((grad[0] - 1.0).abs() < 0.1);
    let mut lap = 0.0;
    assert_eq!(unsafe { polyrobin_solution_evaluate(solution, x.as_ptr(), 1, &mut lap, null_mut()) }, PolyrobinStatus::Ok);
    assert!((lap - 6.0).abs() < 0.5, "lap = {lap}");

    let mut res = [1.0; 2];
    let mut cond = [0.0; 2];
    unsafe {
        assert_eq!(polyrobin_solution_residuals(solution, res.as_mut_ptr(), 2), PolyrobinStatus::Ok);
        assert_eq!(polyrobin_solution_condition(solution, cond.as_mut_ptr(), 2), PolyrobinStatus::Ok);
    }
    assert!(res.iter().all(|&r| r < 1e-10) && cond.iter().all(|&c| c >= 1.0));

    let mut density = vec![0.0; 320];
    unsafe {
        assert_eq!(polyrobin_solution_density(solution, 1, density.as_mut_ptr(), 320), PolyrobinStatus::Ok);
        assert_eq!(polyrobin_solution_density(solution, 2, density.as_mut_ptr(), 320), PolyrobinStatus::InvalidArgument);
        assert_eq!(polyrobin_solution_density(solution, 0, density.as_mut_ptr(), 10), PolyrobinStatus::InvalidArgument);
    }
    assert!(last_error().contains("buffer"));

    let far = [2.0, 0.0, 0.0];
    let near = [0.999, 0.0, 0.0];
    unsafe {
        assert_eq!(polyrobin_solution_evaluate(solution, far.as_ptr(), 0, &mut u, null_mut()), PolyrobinStatus::EvalPoint);
        assert_eq!(polyrobin_solution_evaluate(solution, near.as_ptr(), 0, &mut u, null_mut()), PolyrobinStatus::EvalPoint);
        assert_eq!(polyrobin_solution_evaluate(solution, x.as_ptr(), 2, &mut u, null_mut()), PolyrobinStatus::InvalidArgument);
        polyrobin_solution_free(solution);
        polyrobin_problem_free(problem);
        polyrobin_mesh_free(mesh);
    }
}

#[test]
fn status_codes() {
    let mut mesh = null_mut();
    unsafe {
        assert_eq!(polyrobin_mesh_sphere(-1.0, 1, &mut mesh), PolyrobinStatus::Mesh);
        assert!(mesh.is_null());
        assert_eq!(polyrobin_mesh_cube(2.0, 0, null_mut()), PolyrobinStatus::NullPointer);
        assert_eq!(polyrobin_mesh_panel_count(null()), 0);
        assert_eq!(polyrobin_solve(null(), &mut null_mut()), PolyrobinStatus::NullPointer);
        polyrobin_mesh_free(null_mut());
        polyrobin_problem_free(null_mut());
        polyrobin_solution_free(null_mut());
    }
    assert!(last_error().contains("null"));

    let mesh = sphere(1);
    let (s, problem) = radius_squared_problem(mesh, 0.0);
    assert_eq!(s, PolyrobinStatus::Ok);
    let mut solution = null_mut();
    assert_eq!(unsafe { polyrobin_solve(problem, &mut solution) }, PolyrobinStatus::Validation);
    assert!(solution.is_null());
    assert!(last_error().contains("b_0"));
    unsafe {
        polyrobin_problem_free(problem);
        polyrobin_mesh_free(mesh);
    }

    let missing = CString::new("/nonexistent/problem.json").unwrap();
    let mut problem = null_mut();
    assert_eq!(unsafe { polyrobin_problem_from_config(missing.as_ptr(), &mut problem) }, PolyrobinStatus::InvalidArgument);
    let mut m = null_mut();
    assert_eq!(unsafe { polyrobin_mesh_load(missing.as_ptr(), &mut m) }, PolyrobinStatus::InvalidArgument);
}

#[test]
fn config_with_tolerances() {
    let dir = std::env::temp_dir().join(format!("polyrobin-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("p.json");
    std::fs::write(&path, r#"{"preset": "c", "mesh": {"type": "sphere", "refinement": 1}, "tolerances": {"cond_max": 1.0}}"#)
        .unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut problem = null_mut();
    assert_eq!(unsafe { polyrobin_problem_from_config(cpath.as_ptr(), &mut problem) }, PolyrobinStatus::Ok);
    let mut solution = null_mut();
    assert_eq!(unsafe { polyrobin_solve(problem, &mut solution) }, PolyrobinStatus::IllConditioned);
    unsafe { polyrobin_problem_free(problem) };
    std::fs::remove_dir_all(&dir).unwrap();
}

/// Compiles the C example against the generated header and shared library.
#[test]
fn c_example_links_and_runs() {
    let crate_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib_dir = deps.parent().unwrap();
    if !lib_dir.join("libpolyrobin_ffi.so").exists() {
        eprintln!("shared library not found next to {}, skipping", deps.display());
        return;
    }
    let Ok(status) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(status.status.success());
    let exe = deps.join("polyrobin_c_example");
    let out = std::process::Command::new("cc")
        .arg(crate_dir.join("examples/solve.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-L")
        .arg(lib_dir)
        .args(["-lpolyrobin_ffi", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = std::process::Command::new(&exe).env("LD_LIBRARY_PATH", lib_dir).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let u: f64 = text.split_whitespace().next().unwrap().trim_start_matches("u=").parse().unwrap();
    assert!((u - 0.25).abs() < 0.05, "{text}");
}
