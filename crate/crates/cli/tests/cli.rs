use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn annulab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annulab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("ANNULAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rotation_of_rigid_quarter() {
    let dir = TempDir::new().unwrap();
    let o = annulab(dir.path(), &["rotation", "--map", "RIGID:alpha=0.25", "--point", "0,0.5", "--steps", "1000"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let est = read_json(&dir.path().join("rotation-estimate.json"));
    assert!((est["mean"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    let csv = fs::read_to_string(dir.path().join("rotation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    assert!(csv.starts_with("n,rotation\n1,0.25"));
}

#[test]
fn horseshoe_certificates_reverify() {
    let dir = TempDir::new().unwrap();
    let o = annulab(dir.path(), &["horseshoe", "--verify"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let cert = read_json(&dir.path().join("horseshoe.json"));
    assert_eq!(cert["kind"], "horseshoe");
    let p = &cert["payload"];
    assert_eq!((p["negative"]["n"].as_i64(), p["negative"]["k"].as_i64()), (Some(1), Some(-1)));
    assert_eq!((p["positive"]["n"].as_i64(), p["positive"]["k"].as_i64()), (Some(5), Some(1)));
    for name in ["horseshoe.json", "horseshoe-chain.json"] {
        let path = dir.path().join(name);
        let o = annulab(dir.path(), &["reverify", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", stdout(&o));
    }
}

#[test]
fn circle_billiard_is_unbounded_at_scale() {
    let dir = TempDir::new().unwrap();
    let o = annulab(dir.path(), &["window", "--map", "billiard-circle", "--grow"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert!(stdout(&o).contains("unbounded at scale"));
    let report = read_json(&dir.path().join("window-report.json"));
    assert_eq!(report["outcome"], "unbounded_at_scale");
}

#[test]
fn tampered_and_mislabelled_certificates_fail() {
    let dir = TempDir::new().unwrap();
    let o = annulab(dir.path(), &["returning", "--map", "DISS_ROT", "--band", "0.3,0.7", "--sign", "+"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let path = dir.path().join("returning.json");
    let good = read_json(&path);
    assert_eq!(code(&annulab(dir.path(), &["reverify", path.to_str().unwrap()])), 0);

    let mut moved = good.clone();
    let x = moved["payload"]["witnesses"][0]["point"]["x"].as_f64().unwrap();
    moved["payload"]["witnesses"][0]["point"]["x"] = (x + 0.05).into();
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, moved.to_string()).unwrap();
    assert_eq!(code(&annulab(dir.path(), &["reverify", tampered.to_str().unwrap()])), 1);

    let mut other = good;
    other["map"]["spec"] = "DISS_ROT:alpha=0.3,lambda=0.6".into();
    let wrong = dir.path().join("wrong.json");
    fs::write(&wrong, other.to_string()).unwrap();
    let o = annulab(dir.path(), &["reverify", wrong.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("map mismatch"));

    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{\"version\": 1}").unwrap();
    let o = annulab(dir.path(), &["reverify", junk.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));
}

#[test]
fn negative_findings_exit_two() {
    let dir = TempDir::new().unwrap();
    let o = annulab(dir.path(), &["periodic", "--map", "DISS_ROT:alpha=1/2,lambda=0.9", "--p", "1", "--q", "3"]);
    assert_eq!(code(&o), 2);
    let o = annulab(dir.path(), &["periodic", "--map", "DISS_ROT:alpha=1/3,lambda=0.9", "--p", "1", "--q", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&dir.path().join("periodic.json"))["kind"], "periodic");
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["bogus"][..],
        &["rotation"],
        &["rotation", "--map", "NOPE"],
        &["rotation", "--map", "RIGID", "--point", "zero"],
        &["billiard", "--table", "square"],
    ] {
        let o = annulab(dir.path(), args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_annulab"))
        .args(["rotation", "--map", "TW"])
        .env("ANNULAB_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn identical_runs_give_identical_files() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["fixed", "--map", "PT:alpha=0,gamma=0.1,beta=0,lambda=0.5"];
    for d in [&a, &b] {
        assert_eq!(code(&annulab(d.path(), &args)), 0);
        assert_eq!(code(&annulab(d.path(), &["drift", "--map", "RNF", "--samples", "12", "--seed", "5"])), 0);
    }
    for name in ["fixed.json", "fixed.csv", "drift.json", "drift.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let fixed = read_json(&a.path().join("fixed.json"));
    assert_eq!(fixed["payload"]["lefschetz"], 0);
    assert_eq!(fixed["payload"]["records"].as_array().unwrap().len(), 2);
}

#[test]
fn billiard_bumper_file() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("bumpers.json");
    fs::write(&file, r#"{"bumpers": [{"center": [0.0, 0.0], "radius": 0.3}]}"#).unwrap();
    let o = annulab(
        dir.path(),
        &["billiard", "--table", "ellipse:2,1", "--theta0", "0.05", "--steps", "2000", "--bumpers", file.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let cert = dir.path().join("billiard.json");
    assert_eq!(code(&annulab(dir.path(), &["reverify", cert.to_str().unwrap()])), 0);
    // a bumper every chord must cross
    let o = annulab(dir.path(), &["billiard", "--theta0", "1.5", "--steps", "10", "--bumper", "0,0,0.5"]);
    assert_eq!(code(&o), 2);
}
