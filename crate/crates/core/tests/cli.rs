use std::path::Path;
use std::process::{Command, Output};

fn polyrobin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyrobin")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn kernels_table_and_exit_codes() {
    let out = polyrobin(&["kernels", "--n", "3", "--m-max", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("m,a,s,has_log,c"));
    let row: Vec<&str> = text.lines().find(|l| l.starts_with("2,")).unwrap().split(',').collect();
    let a: f64 = row[1].parse().unwrap();
    assert!((a + 1.0 / (8.0 * std::f64::consts::PI)).abs() < 1e-15);
    assert_eq!(&row[2..4], &["1", "false"]);

    let even = polyrobin(&["kernels", "--n", "4", "--m-max", "2", "--check"]);
    assert_eq!(code(&even), 0);
    assert!(String::from_utf8(even.stdout).unwrap().lines().any(|l| l.starts_with("2,") && l.contains(",true,")));

    assert_eq!(code(&polyrobin(&["kernels", "--n", "2", "--m-max", "2"])), 2);
    assert_eq!(code(&polyrobin(&["kernels", "--n", "3"])), 2);
}

#[test]
fn solve_case_c_at_interior_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"preset": "c", "mesh": {"type": "sphere", "radius": 1.0, "refinement": 3}}"#);
    let pts = write(dir.path(), "pts.csv", "x,y,z\n0.5,0,0\n0,0,0\n");
    let out_dir = dir.path().join("out");
    let out = polyrobin(&["solve", &cfg, "--eval", &pts, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("eval.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,z,u,lap1,grad_x,grad_y,grad_z"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // u = |X|^2: u = 0.25, Δu = 6, ∇u = (1, 0, 0)
    assert!((row[3] - 0.25).abs() < 5e-2 * 0.25 + 1e-2, "u = {}", row[3]);
    assert!((row[4] - 6.0).abs() < 0.3, "Δu = {}", row[4]);
    assert!((row[5] - 1.0).abs() < 0.1 && row[6].abs() < 0.1 && row[7].abs() < 0.1);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("solution.json")).unwrap()).unwrap();
    assert_eq!(json["m"], 2);
    assert_eq!(json["panels"], 1280);
    assert_eq!(json["htilde"].as_array().unwrap().len(), 2);
    assert!(json["residuals"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1e-10));
}

#[test]
fn deterministic_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "p.json", r#"{"m": 2, "mesh": {"type": "cube", "refinement": 1}, "b": [1, 2], "h": ["c", [0.5]]}"#);
    // a per-panel array of the wrong length is a config error
    assert_eq!(code(&polyrobin(&["solve", &cfg, "--out", dir.path().to_str().unwrap()])), 2);

    let cfg = write(dir.path(), "p.json", r#"{"m": 2, "mesh": {"type": "cube", "refinement": 2}, "b": [1, 2], "h": ["c", 0.5]}"#);
    let pts = write(dir.path(), "pts.csv", "0.1,0.2,0.3\n-0.4,0.0,0.2\n");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        let dump = dir.path().join(format!("ops_{run}"));
        let out = polyrobin(&[
            "solve",
            &cfg,
            "--eval",
            &pts,
            "--out",
            d.to_str().unwrap(),
            "--deterministic",
            "--dump-operators",
            dump.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((
            std::fs::read(d.join("solution.json")).unwrap(),
            std::fs::read(d.join("eval.csv")).unwrap(),
            std::fs::read(dump.join("T1.bin")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    // 8-byte size header plus N^2 values, N = 192
    assert_eq!(outputs[0].2.len(), 8 + 192 * 192 * 8);
}

#[test]
fn validation_and_eval_point_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let zero = write(dir.path(), "zero.json", r#"{"m": 2, "mesh": {"type": "sphere", "refinement": 1}, "b": [1, 0], "h": [1, 1]}"#);
    let r = polyrobin(&["solve", &zero, "--out", out]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("b_1"));

    let neg = write(dir.path(), "neg.json", r#"{"mesh": {"type": "sphere", "refinement": 1}, "b": -1, "h": [1]}"#);
    assert_eq!(code(&polyrobin(&["solve", &neg, "--out", out])), 3);

    let ok = write(dir.path(), "ok.json", r#"{"preset": "c", "mesh": {"type": "sphere", "refinement": 1}}"#);
    let near = write(dir.path(), "near.csv", "0.999,0,0\n");
    let r = polyrobin(&["solve", &ok, "--eval", &near, "--out", out, "--refinement", "2"]);
    assert_eq!(code(&r), 5);
    assert!(!dir.path().join("solution.json").exists());
    let outside = write(dir.path(), "outside.csv", "2,0,0\n");
    assert_eq!(code(&polyrobin(&["solve", &ok, "--eval", &outside, "--out", out])), 5);

    let tight = write(
        dir.path(),
        "tight.json",
        r#"{"preset": "a", "mesh": {"type": "sphere", "refinement": 1}, "tolerances": {"cond_max": 1.0}}"#,
    );
    assert_eq!(code(&polyrobin(&["solve", &tight, "--out", out])), 4);

    assert_eq!(code(&polyrobin(&["solve", "/nonexistent.json"])), 2);
    let broken = write(dir.path(), "broken.json", "{");
    assert_eq!(code(&polyrobin(&["solve", &broken])), 2);
}

#[test]
fn convergence_and_verify_arguments() {
    assert_eq!(code(&polyrobin(&["convergence", "--case", "zz", "--refinements", "1..2"])), 2);
    assert_eq!(code(&polyrobin(&["verify", "--suite", "nope", "--refinements", "1..2"])), 2);
    assert_eq!(code(&polyrobin(&["verify", "--suite", "manufactured", "--refinements", "3..1"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let out = polyrobin(&["convergence", "--case", "c", "--refinements", "1..3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let order: f64 = text.lines().find_map(|l| l.strip_prefix("observed order ")).unwrap().parse().unwrap();
    assert!(order > 0.8, "order {order}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("convergence_c.json")).unwrap()).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("convergence_c.csv").exists());
}

#[test]
fn lipschitz_suite_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyrobin(&["verify", "--suite", "lipschitz", "--refinements", "1..2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify_lipschitz.json")).unwrap()).unwrap();
    assert_eq!(json["passed"], true);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("PASS"));
}

#[test]
fn manufactured_suite_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyrobin(&["verify", "--suite", "manufactured", "--refinements", "1..3", "--out", dir.path().to_str().unwrap()]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify_manufactured.json")).unwrap()).unwrap();
    let failed: Vec<&str> = json["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    // u = |X|^4 misses the 5e-2 tolerance at refinement 3 with the lowest-order scheme;
    // every other check holds.
    assert_eq!(failed, vec!["case e refinement 3 tolerance"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("case e refinement 3 tolerance"));
    assert_eq!(json["studies"].as_array().unwrap().len(), 5);
    let csv = std::fs::read_to_string(dir.path().join("verify_manufactured.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 3);
}
