use std::io::Cursor;
use std::path::PathBuf;

use jdist::cli::*;

fn run_cli(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("jdist").chain(args.iter().copied());
    let code = run(argv, &mut Cursor::new(stdin.as_bytes().to_vec()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p: PathBuf = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn example() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/examples/noisy_chain.jd").to_string()
}

#[test]
fn run_emits_probability_json() {
    let (code, out, _) = run_cli(&["run", &example(), "--tol", "1e-3"], "");
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let p = v["probability"].as_f64().unwrap();
    assert!((0.29..0.33).contains(&p), "{p}");
    assert_eq!(v["converged"], true);
    assert!(!v["levels"].as_array().unwrap().is_empty());
    let (code, csv, _) = run_cli(&["run", &example(), "--format", "csv"], "");
    assert_eq!(code, EXIT_OK);
    assert!(csv.starts_with("level,cells,value,lower,upper\n"));
}

#[test]
fn run_reads_stdin() {
    let (code, out, _) = run_cli(&["run", "-"], "x := normal(0,1); return (x > 0);");
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["probability"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn mc_is_deterministic() {
    let args = ["mc", &example(), "--samples", "50000", "--seed", "3"];
    let (c1, a, _) = run_cli(&args, "");
    let (c2, b, _) = run_cli(&args, "");
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(a, b);
    assert!(a.contains("\"generator\""));
}

#[test]
fn dagger_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let j = r#"{"variant":"kernel","base":{"support":[-8,8],"density":{"kind":"gaussian","mean":0,"var":1}},
        "kernel":{"kind":"gaussian","mean":{"slope":1,"intercept":0},"var":1}}"#;
    let f = write(&dir, "j.json", j);
    let (code, once, err) = run_cli(&["dagger", &f], "");
    assert_eq!(code, EXIT_OK, "{err}");
    let (_, twice, _) = run_cli(&["dagger", "-"], &once);
    let canonical = jdist::canonical::to_canonical(&serde_json::from_str::<jdist::joint::JointMeasure2D>(j).unwrap()).unwrap() + "\n";
    assert_eq!(twice, canonical);
    let m = write(&dir, "m.json", r#"{"shape":[2,3],"data":[0.1,0.2,0.0,0.3,0.1,0.3]}"#);
    let (_, once, _) = run_cli(&["dagger", &m], "");
    let (_, twice, _) = run_cli(&["dagger", "-"], &once);
    let (_, again, _) = run_cli(&["dagger", "-"], &run_cli(&["dagger", "-"], &twice).1);
    assert_eq!(twice, again);
    assert!(once.contains("\"shape\":[3,2]"));
}

#[test]
fn compose_discrete_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(&dir, "a.json", r#"{"shape":[2,2],"data":[0.1,0.2,0.3,0.4]}"#);
    let b = write(&dir, "b.json", r#"{"shape":[2,1],"data":[0.4,0.6]}"#);
    let (code, out, _) = run_cli(&["compose", &a, &b], "");
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "{\"data\":[2.9999999999999999e-1,6.9999999999999996e-1],\"shape\":[2,1]}\n");
    let bad = write(&dir, "bad.json", r#"{"shape":[2,1],"data":[0.5,0.5]}"#);
    let (code, _, err) = run_cli(&["compose", &a, &bad], "");
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("max marginal defect 1.000e-1"), "{err}");
}

#[test]
fn compose_continuous_reports_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let theta = r#"{"variant":"kernel","base":{"support":[-8,8],"density":{"kind":"gaussian","mean":0,"var":1}},
        "kernel":{"kind":"gaussian","mean":{"slope":1,"intercept":0},"var":1}}"#;
    let eta = r#"{"variant":"kernel","base":{"support":[-8,8],"density":{"kind":"gaussian","mean":0,"var":2}},
        "kernel":{"kind":"gaussian","mean":{"slope":1,"intercept":0},"var":1}}"#;
    let (t, e) = (write(&dir, "t.json", theta), write(&dir, "e.json", eta));
    let (code, out, _) = run_cli(&["compose", &t, &e, "--format", "csv"], "");
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("level,cells,value,lower,upper\n"));
    let (code, _, err) = run_cli(&["compose", &t, &e, "--tol", "1e-14", "--max-depth", "4"], "");
    assert_eq!(code, EXIT_NONCONVERGENCE, "{err}");
}

#[test]
fn rn_and_limit() {
    let dir = tempfile::tempdir().unwrap();
    let nu = write(&dir, "nu.json", r#"{"support":[0,1],"density":{"kind":"affine","slope":1.4,"intercept":0},"atoms":[[0.5,0.3]]}"#);
    let s = write(&dir, "s.json", r#"{"support":[0,1],"density":{"kind":"affine","slope":1,"intercept":0}}"#);
    let mu = write(&dir, "mu.json", r#"{"support":[0,1],"density":{"kind":"affine","slope":0,"intercept":1}}"#);
    let (code, out, err) = run_cli(&["rn", &nu, &mu, "--max-depth", "8"], "");
    assert_eq!(code, EXIT_OK, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["singular_mass"].as_f64().unwrap() - 0.3).abs() < 1e-9);
    let (code, out, _) = run_cli(&["limit", &s, &s, &mu, "--tol", "1e-6", "--max-depth", "12"], "");
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-4);
    let (code, csv, _) = run_cli(&["limit", &s, &s, &mu, "--format", "csv"], "");
    assert_eq!(code, EXIT_OK);
    assert!(csv.starts_with("level,epsilon,cells,partial_sum,lower_bracket,upper_bracket\n"));
}

#[test]
fn disintegrate_discrete_only() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(&dir, "a.json", r#"{"shape":[2,2],"data":[0.25,0.25,0.0,0.0]}"#);
    let (code, out, _) = run_cli(&["disintegrate", &a, "--fill", "[0.1,0.9]"], "");
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("5.0000000000000000e-1,5.0000000000000000e-1,1.0000000000000001e-1,9.0000000000000002e-1"), "{out}");
    let k = write(&dir, "k.json", r#"{"variant":"diagonal","base":{"support":[0,1],"density":{"kind":"affine","slope":0,"intercept":1}}}"#);
    let (code, _, err) = run_cli(&["disintegrate", &k], "");
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("discrete"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_cli(&["frobnicate"], "").0, EXIT_USAGE);
    assert_eq!(run_cli(&["run"], "").0, EXIT_USAGE);
    assert_eq!(run_cli(&["run", "/nonexistent/file.jd"], "").0, EXIT_USAGE);
    assert_eq!(run_cli(&["run", &example(), "--max-depth", "30"], "").0, EXIT_USAGE);
    assert_eq!(run_cli(&["run", &example(), "--tol", "0"], "").0, EXIT_USAGE);
    let (code, _, err) = run_cli(&["run", "-"], "x := normal(0,1);\nreturn (x >> 0);");
    assert_eq!(code, EXIT_PARSE);
    assert!(err.contains("line 2, column 12"), "{err}");
    let broken = write(&dir, "broken.json", "{\"shape\": [1,");
    assert_eq!(run_cli(&["dagger", &broken], "").0, EXIT_PARSE);
    assert_eq!(run_cli(&["--help"], "").0, EXIT_OK);
}

#[test]
fn max_depth_from_environment() {
    let bin = env!("CARGO_BIN_EXE_jdist");
    let out = std::process::Command::new(bin)
        .args(["run", &example()])
        .env("JDIST_MAX_DEPTH", "30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("got 30"));
    let out = std::process::Command::new(bin)
        .args(["run", &example(), "--tol", "1e-12"])
        .env("JDIST_MAX_DEPTH", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_NONCONVERGENCE));
}
