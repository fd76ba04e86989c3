use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gjekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gjekit")).args(args).env_remove("GJEKIT_THREADS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn shipped(name: &str) -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Writes `cfg` into `dir` with its output redirected to `dir/out`.
fn config_in(dir: &Path, mut cfg: Value) -> PathBuf {
    cfg["output"] = "out".into();
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn quadratic_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), shipped("quadratic-check.json"));
    let o = gjekit(&["check", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "check.json");
    assert_eq!(r["pass"], true);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["seed"], 0);
}

#[test]
fn twist_violator_fails_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), shipped("twist-violator.json"));
    assert_eq!(code(&gjekit(&["check", cfg.to_str().unwrap()])), 1);
    let r = report(dir.path(), "check.json");
    let twist = r["result"]["reports"].as_array().unwrap().iter().find(|c| c["condition"] == "Twist").unwrap();
    assert_eq!(twist["pass"], false);
    assert!(twist["witness"].is_object());
}

#[test]
fn malformed_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in ["{", r#"{"genfun": {"kind": "quasilinear"}}"#, r#"{"genfun": {"kind": "minkowski"}, "seeds": 1}"#].iter().enumerate() {
        let p = dir.path().join(format!("bad{i}.json"));
        fs::write(&p, text).unwrap();
        for cmd in ["check", "solve", "estimate"] {
            assert_eq!(code(&gjekit(&[cmd, p.to_str().unwrap()])), 2, "{cmd} {text}");
        }
    }
    assert_eq!(code(&gjekit(&["check", dir.path().join("missing.json").to_str().unwrap()])), 2);
    assert_eq!(code(&gjekit(&["frobnicate"])), 2);
    assert_eq!(code(&gjekit(&["demo", "no-such-demo"])), 2);
}

#[test]
fn raytrace_without_envelope_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), shipped("quadratic-solve.json"));
    assert_eq!(code(&gjekit(&["raytrace", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&gjekit(&["estimate", cfg.to_str().unwrap()])), 2);
    let mut c = shipped("quadratic-solve.json");
    c["envelope"] = "nowhere.json".into();
    let cfg = config_in(dir.path(), c);
    assert_eq!(code(&gjekit(&["raytrace", cfg.to_str().unwrap()])), 2);
}

#[test]
fn solve_is_byte_identical_and_feeds_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), shipped("quadratic-solve.json"));
    let files = ["envelope.json", "convergence.csv", "solve.json"];
    let run = || {
        let o = gjekit(&["solve", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        files.map(|f| fs::read(dir.path().join("out").join(f)).unwrap())
    };
    let first = run();
    let second = gjekit(&["--threads", "2", "solve", cfg.to_str().unwrap()]);
    assert_eq!(code(&second), 0);
    let second = files.map(|f| fs::read(dir.path().join("out").join(f)).unwrap());
    assert_eq!(first, second);
    assert_eq!(first, run());

    let mut c = shipped("quadratic-solve.json");
    c["envelope"] = "out/envelope.json".into();
    let cfg = config_in(dir.path(), c);
    let o = gjekit(&["estimate", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path(), "estimates.json");
    assert_eq!(r["result"]["aleksandrov"]["violations"], 0);
    let ledger = fs::read_to_string(dir.path().join("out/estimates.csv")).unwrap();
    assert!(ledger.starts_with("theorem,lhs,rhs,constant"));
    assert!(ledger.lines().count() > 20);
    // A quadratic-cost envelope has no reflector.
    assert_eq!(code(&gjekit(&["raytrace", cfg.to_str().unwrap()])), 2);
}

#[test]
fn thread_count_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path(), shipped("quadratic-check.json"));
    let run = |v: &str| Command::new(env!("CARGO_BIN_EXE_gjekit")).args(["check", cfg.to_str().unwrap()]).env("GJEKIT_THREADS", v).output().unwrap().status.code();
    assert_eq!(run("2"), Some(0));
    assert_eq!(run("many"), Some(2));
}

#[test]
fn classical_demo_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cma");
    let o = gjekit(&["demo", "classical-MA", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.json", "envelope.json", "convergence.csv", "solve.json", "estimates.json", "estimates.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    // The written config reproduces the run.
    let o = gjekit(&["solve", out.join("config.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
}

#[test]
fn schema_is_json() {
    let o = gjekit(&["schema"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["required"][0], "genfun");
}
