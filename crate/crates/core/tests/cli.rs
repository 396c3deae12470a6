use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nu-analyzer"));
    c.env_remove("NU_ANALYZER_THREADS").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn close(v: &Value, expected: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - expected).abs() <= tol
}

#[test]
fn analyze_ring() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "ring4.csv",
        "0,1,0,0\n0,0,1,0\n0,0,0,1\n1,0,0,0\n",
    );
    let r = json(&run(&["analyze", &f]));
    assert!(close(&r["mu"], 1.0, 1e-8));
    assert!(close(&r["nubar"], 1.0, 1e-12));
    assert!(close(&r["nu_lower"]["bound"], 0.25, 1e-9));
    assert_eq!(r["nu_exact"]["method"], "ring");
}

#[test]
fn analyze_identity() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ident.csv", "1,0\n0,1\n");
    let r = json(&run(&["analyze", &f]));
    assert!(close(&r["mu"], 1.0, 1e-9));
    assert_eq!(r["nubar"], 1.0);
    assert_eq!(r["nu_lower"]["bound"], 1.0);
    assert_eq!(r["diagnostics"]["diagonally_maximal"], true);
}

#[test]
fn analyze_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "m2.csv", "0.5,1\n1,0.5\n");
    let r = json(&run(&["analyze", &f, "--oracle"]));
    assert!(close(&r["nu_exact"]["value"], 0.75, 1e-12));
    let f = write(
        dir.path(),
        "m3.csv",
        "0.1,0.9,0.2\n0.3,0.2,0.7\n0.8,0.1,0.3\n",
    );
    let r = json(&run(&["analyze", &f, "--oracle"]));
    assert_eq!(r["nu_exact"]["method"], "oracle");
    let nu = r["nu_exact"]["value"].as_f64().unwrap();
    assert!(r["nu_lower"]["bound"].as_f64().unwrap() <= nu + 1e-9);
    assert!(nu <= r["nubar"].as_f64().unwrap() + 1e-9);
}

#[test]
fn analyze_system_json_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "sys.json",
        r#"{"n": 2, "entries": [{"row": 1, "col": 2, "impulse": [0, 1]}, {"row": 2, "col": 1, "impulse": [0.5, -0.5]}]}"#,
    );
    let out = dir.path().join("report.json");
    let o = run(&["analyze", &f, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["nubar"], 1.0);
    assert_eq!(r["schema"], 1);
}

#[test]
fn balance_examples() {
    let dir = tempfile::tempdir().unwrap();
    let osc = write(dir.path(), "osc.csv", "0,1\n0.25,0\n");
    let o = run(&["balance", &osc, "--theta", "1", "--max-iter", "20"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("oscillation detected"));
    let s = json(&o);
    assert_eq!(s["converged"], false);

    let trace = dir.path().join("trace.csv");
    let s = json(&run(&[
        "balance",
        &osc,
        "--theta",
        "0.5",
        "--trace",
        trace.to_str().unwrap(),
    ]));
    assert_eq!(s["converged"], true);
    assert!(close(&s["objective"], 0.5, 5e-4));
    let text = std::fs::read_to_string(trace).unwrap();
    assert!(text.starts_with("t,objective,rel_change,d1,d2\n"));

    let ident = write(dir.path(), "ident.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let s = json(&run(&["balance", &ident, "--theta", "0.9"]));
    assert_eq!(s["converged"], true);
    assert_eq!(s["iterations"], 1);
}

#[test]
fn grid_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    assert!(
        run(&["grid2x2", "--steps", "5", "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("x,w,y,mu,nu,nubar,ratio_mu_nu,ratio_nubar_nu")
    );
    assert_eq!(lines.count(), 125);
    assert!(dir.path().join("grid.csv.gp").exists());
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |p: &Path| {
        vec![
            "bench".to_string(),
            "--mode".into(),
            "size".into(),
            "--sizes".into(),
            "4,8".into(),
            "--trials".into(),
            "5".into(),
            "--thetas".into(),
            "0.5".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            p.to_string_lossy().into_owned(),
        ]
    };
    assert!(bin().args(args(&a)).status().unwrap().success());
    assert!(bin()
        .args(args(&b))
        .env("NU_ANALYZER_THREADS", "1")
        .status()
        .unwrap()
        .success());
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    assert!(
        String::from_utf8_lossy(&ta).starts_with("n,theta,tol,max_iters,median_iters,failures\n")
    );
}

#[test]
fn ring_subcommand() {
    let r = json(&run(&["ring", "--n", "4"]));
    assert!(close(&r["nu_exact"]["value"], 0.25, 1e-15));
    let r = json(&run(&["ring", "--weights", "2,0.5"]));
    assert!(close(&r["nu_exact"]["value"], 0.5, 1e-15));
    assert_eq!(
        run(&["ring", "--n", "3", "--weights", "1,2"]).status.code(),
        Some(2)
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "1,-2\n0,1\n");
    let o = run(&["analyze", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1, column 2"));
    let osc = write(dir.path(), "osc.csv", "0,1\n0.25,0\n");
    assert_eq!(
        run(&["balance", &osc, "--theta", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["analyze", "/nonexistent/m.csv"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
