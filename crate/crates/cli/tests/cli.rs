use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn plm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plm")).args(args).output().expect("spawn plm")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV with `#` comments, split into named columns.
fn table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k]).collect()
}

#[test]
fn hypar_smooth_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = plm(&["verify", "--scenario", "hypar", "--suite", "smooth-asymptotic", "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert!(json["conventions"]["sqrt_branch"].is_string());
    assert_eq!(json["metadata"]["inputs"], "scenario:hypar");
    let ids = json["identities"].as_array().unwrap();
    let det = ids.iter().find(|r| r["name"] == "det.xy").expect("det.xy record");
    assert_eq!(det["pass"], true);
    for r in ids {
        assert!(r["mean_residual"].as_f64().unwrap() <= r["max_residual"].as_f64().unwrap());
    }
}

#[test]
fn moutard_discrete_suite_passes() {
    let out = plm(&["verify", "--scenario", "moutard-random", "--seed", "42", "--size", "32", "--suite", "discrete"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn unrelated_fields_fail_with_names() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&plm(&["scenario-dump", "--scenario", "cubic-graph", "--out", s(&a)])), 0);
    assert_eq!(code(&plm(&["scenario-dump", "--scenario", "quartic-graph", "--out", s(&b)])), 0);
    let out = plm(&["verify", "--nu", s(&a.join("nu.csv")), "--f", s(&b.join("f.csv")), "--suite", "smooth-asymptotic"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("FAIL plm.x"), "{err}");
}

#[test]
fn sampled_pair_passes_with_finite_differences() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["hypar", "cubic-graph"] {
        let d = dir.path().join(name);
        assert_eq!(code(&plm(&["scenario-dump", "--scenario", name, "--out", s(&d)])), 0);
        let out = plm(&["verify", "--nu", s(&d.join("nu.csv")), "--f", s(&d.join("f.csv"))]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
        let out = plm(&["verify", "--nu", s(&d.join("affine_nu.csv")), "--f", s(&d.join("affine_f.csv")), "--suite", "affine"]);
        assert_eq!(code(&out), 0, "{name} affine: {}", stderr(&out));
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&plm(&["verify", "--no-such-flag"])), 2);
    assert_eq!(code(&plm(&["verify"])), 2);
    assert_eq!(code(&plm(&["verify", "--scenario", "hypar", "--stencil", "3"])), 2);
    assert_eq!(code(&plm(&["verify", "--scenario", "hypar", "--suite", "discrete"])), 2);
    let out = plm(&["verify", "--scenario", "no-such"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("moutard-random"));
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = plm(&["verify", "--nu", s(&dir.path().join("absent.csv"))]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn malformed_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "x,y,v1,v2,v3,v4\n0,0,1,2,3,oops\n").unwrap();
    assert_eq!(code(&plm(&["verify", "--nu", s(&p)])), 3);
}

#[test]
fn wrong_chart_is_reported_and_fatal_when_strict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("hy");
    assert_eq!(code(&plm(&["scenario-dump", "--scenario", "hypar", "--out", s(&d)])), 0);
    let nu = d.join("nu.csv");
    let out = plm(&["reconstruct", "--nu", s(&nu), "--chart", "conjugate", "--out", s(&dir.path().join("f.csv"))]);
    assert_eq!(code(&out), 0);
    let err = stderr(&out);
    assert!(err.contains("chart mismatch"), "{err}");
    assert!(err.contains("could not be reconstructed"), "{err}");
    let out = plm(&["--strict", "reconstruct", "--nu", s(&nu), "--chart", "conjugate"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn hypar_reconstruction_writes_graph_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, obj) = (dir.path().join("f.csv"), dir.path().join("f.obj"));
    let out = plm(&["reconstruct", "--scenario", "hypar", "--out", s(&csv), "--obj", s(&obj)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&obj).unwrap();
    let verts: Vec<[f64; 3]> = text
        .lines()
        .filter_map(|l| l.strip_prefix("v "))
        .map(|l| {
            let v: Vec<f64> = l.split(' ').map(|t| t.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect();
    // 41 x 41 grid on [-1, 1] with exact jets
    assert_eq!(verts.len(), 41 * 41);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2 * 40 * 40);
    for v in &verts {
        assert!((v[2] - v[0] * v[1]).abs() < 1e-12, "{v:?}");
    }
    // the diagonal of the first cell runs from (0,0) to (1,1)
    assert!(text.contains("\nf 1 2 43\nf 1 43 42\n"));
    let (header, rows) = table(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(header, ["x", "y", "v1", "v2", "v3", "v4"]);
    assert_eq!(rows.len(), 41 * 41);
}

#[test]
fn finite_difference_mesh_covers_the_interior() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("f.obj");
    let out = plm(&["reconstruct", "--scenario", "hypar", "--stencil", "4", "--obj", s(&obj)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let n = std::fs::read_to_string(&obj).unwrap().lines().filter(|l| l.starts_with("v ")).count();
    assert_eq!(n, 37 * 37);
}

#[test]
fn lattice_reconstruction_integrates_from_f0() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("mr");
    assert_eq!(code(&plm(&["scenario-dump", "--scenario", "moutard-random", "--size", "12", "--out", s(&d)])), 0);
    let out_csv = dir.path().join("f.csv");
    let out = plm(&[
        "reconstruct",
        "--lattice",
        s(&d.join("nu_lattice.csv")),
        "--gauge",
        "affine",
        "--f0",
        "0,0,0",
        "--out",
        s(&out_csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, got) = table(&std::fs::read_to_string(&out_csv).unwrap());
    let (_, want) = table(&std::fs::read_to_string(d.join("f_lattice.csv")).unwrap());
    assert_eq!(got.len(), 144);
    for (g, w) in got.iter().zip(&want) {
        for k in 0..5 {
            assert!((g[k] - w[k]).abs() < 1e-12, "{g:?} vs {w:?}");
        }
    }
}

#[test]
fn affine_forms_of_hypar() {
    let out = plm(&["forms", "--scenario", "hypar", "--which", "affine"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# cross_sign_anchor:"));
    let (h, rows) = table(&text);
    assert!(column(&h, &rows, "F").iter().all(|&f| (f + 1.0).abs() < 1e-10));
    assert!(column(&h, &rows, "A").iter().all(|&a| a.abs() < 1e-10));
}

#[test]
fn discrete_forms_of_hypar_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("forms.csv");
    let out = plm(&["forms", "--scenario", "hypar-lattice", "--h", "0.1", "--which", "discrete", "--out", s(&p)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (h, rows) = table(&std::fs::read_to_string(&p).unwrap());
    assert!(!rows.is_empty());
    assert!(column(&h, &rows, "Omega2").iter().all(|&w| (w + 0.01).abs() < 1e-15));
    assert!(column(&h, &rows, "F2d").iter().all(|&w| (w - 0.01).abs() < 1e-12));
}

#[test]
fn projective_forms_of_cubic_graph() {
    let out = plm(&["forms", "--scenario", "cubic-graph", "--which", "projective"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (h, rows) = table(&String::from_utf8(out.stdout).unwrap());
    let f3 = column(&h, &rows, "F3");
    // F3 vanishes along y = 0 only
    assert!(f3.iter().fold(0.0_f64, |m, v| m.max(v.abs())) > 0.1);
    let out = plm(&["forms", "--scenario", "hypar-lattice", "--which", "projective"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reports_are_deterministic_without_metadata() {
    let run = || plm(&["verify", "--scenario", "moutard-random", "--no-meta"]).stdout;
    let a = run();
    assert_eq!(a, run());
    let single = Command::new(env!("CARGO_BIN_EXE_plm"))
        .args(["verify", "--scenario", "moutard-random", "--no-meta"])
        .env("PLM_NUM_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a, single.stdout);
    let json: Value = serde_json::from_slice(&a).unwrap();
    assert!(json["metadata"]["timestamp"].is_null());
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_plm"))
        .args(["verify", "--scenario", "hypar"])
        .env("PLM_NUM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn hypersurface_scenarios_verify_and_reconstruct() {
    for n in ["2", "3", "4"] {
        let out = plm(&["verify", "--scenario", "ell-paraboloid", "--n", n]);
        assert_eq!(code(&out), 0, "n = {n}: {}", stderr(&out));
    }
    let out = plm(&["reconstruct", "--scenario", "ell-paraboloid", "--n", "3"]);
    assert_eq!(code(&out), 0);
    let (h, rows) = table(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(h.len(), 3 + 5);
    assert!(!rows.is_empty());
}

#[test]
fn scenario_dump_lists_written_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = plm(&["scenario-dump", "--scenario", "hypar-lattice", "--size", "8", "--out", s(dir.path())]);
    assert_eq!(code(&out), 0);
    let listed = String::from_utf8(out.stdout).unwrap();
    for name in ["nu_lattice.csv", "f_lattice.csv"] {
        assert!(dir.path().join(name).exists());
        assert!(listed.contains(name));
    }
}
