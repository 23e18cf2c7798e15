use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riesz-forge"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RIESZ_FORGE_OUT")
        .output()
        .expect("binary runs")
}

fn points(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("x0"));
    lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn generate_four_points_on_circle_gives_a_square() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(
        &[
            "generate", "--set", "circle", "--N", "4", "--s", "2", "--seed", "11", "--out", "run",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let pts = points(&tmp.path().join("run/points.csv"));
    assert_eq!(pts.len(), 4);
    let mut dists = Vec::new();
    for i in 0..4 {
        assert!(((pts[i][0].powi(2) + pts[i][1].powi(2)).sqrt() - 1.0).abs() < 1e-12);
        for j in i + 1..4 {
            dists.push(((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    // Four sides of length √2 and two diagonals of length 2.
    for d in &dists[..4] {
        assert!((d - 2f64.sqrt()).abs() < 1e-6, "{dists:?}");
    }
    for d in &dists[4..] {
        assert!((d - 2.0).abs() < 1e-6, "{dists:?}");
    }
    let m = manifest(&tmp.path().join("run"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["optimizer"]["seed"], 11);
    let energy = m["summary"]["energy"].as_f64().unwrap();
    // 8 ordered pairs at distance √2 (1/2 each) and 4 at distance 2 (1/4 each).
    assert!((energy - 5.0).abs() < 1e-9);
}

#[test]
fn constants_json_for_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["constants", "--s", "2", "--d", "1", "--json"], tmp.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "exact");
    assert!((v["value"].as_f64().unwrap() - PI * PI / 3.0).abs() < 1e-13);
    // Nothing is written unless an output directory is given.
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn missing_seed_exits_2_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(
        &[
            "generate", "--set", "circle", "--N", "4", "--s", "2", "--out", "run",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn schema_violations_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("bad.json"),
        "{\n  \"experiment\": \"generate\",\n  \"seed\": 1,\n  \"sett\": {\"kind\": \"circle\", \"radius\": 1}\n}\n",
    )
    .unwrap();
    let out = cli(
        &["generate", "--config", "bad.json", "--out", "run"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("unknown field `sett`") && err.contains("line 4"),
        "{err}"
    );
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn mismatched_subcommand_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"experiment":"sweep","seed":1,"s":2}"#,
    )
    .unwrap();
    let out = cli(&["generate", "--config", "c.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn recipes_list_run_and_reject_unknown_names() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["recipe", "unknown-name"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["recipe", "--list"], tmp.path());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 10);
    let out = cli(&["recipe", "sink-scaling"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("sink-scaling: PASS"), "{text}");
}

#[test]
fn identical_runs_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |dir: &'static str| {
        vec![
            "sweep",
            "--set",
            "sphere2",
            "--N",
            "10,20",
            "--s",
            "1",
            "--seed",
            "3",
            "--starts",
            "2",
            "--workers",
            "2",
            "--out",
            dir,
        ]
    };
    for dir in ["a", "b"] {
        let out = cli(&args(dir), tmp.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["points.csv", "energies.csv"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    assert_eq!(manifest(&tmp.path().join("a"))["workers"], 2);
}

#[test]
fn environment_overrides_out_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_riesz-forge"))
        .args([
            "generate", "--set", "interval", "--N", "3", "--s", "1", "--seed", "1", "--out", "flag",
        ])
        .current_dir(tmp.path())
        .env("RIESZ_FORGE_OUT", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from-env/points.csv").exists());
    assert!(!tmp.path().join("flag").exists());
}

#[test]
fn numerical_failure_still_writes_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    // Sink scaling needs the zero at the origin; asking for it with a zero
    // on the circle fails after the points and distribution are written.
    let config = r#"{
        "experiment": "zeroweight",
        "seed": 1,
        "set": {"kind": "circle", "radius": 1.0},
        "weight": {"kind": "power_zero", "a": [1.0, 0.0], "t": 1.0},
        "s": 2.0,
        "N_list": [12],
        "gammas": [0.5],
        "optimizer": {"starts": 1}
    }"#;
    fs::write(tmp.path().join("zw.json"), config).unwrap();
    let out = cli(
        &["zeroweight", "--config", "zw.json", "--out", "run"],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(&tmp.path().join("run"));
    assert_eq!(m["status"], "error");
    assert_eq!(m["partial"], true);
    assert!(m["error"].as_str().unwrap().contains("origin"));
    assert!(tmp.path().join("run/distribution.csv").exists());
}

#[test]
fn splitcheck_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let config = r#"{
        "experiment": "splitcheck",
        "seed": 5,
        "set": {"kind": "disjoint_union", "components": [
            {"set": {"kind": "circle", "radius": 1.0}, "translation": [0, 0]},
            {"set": {"kind": "circle", "radius": 2.0}, "translation": [10, 0]}
        ]},
        "s": 2.0,
        "N_list": [30, 60],
        "optimizer": {"starts": 2, "step": "lbfgs"}
    }"#;
    fs::write(tmp.path().join("split.json"), config).unwrap();
    let out = cli(
        &["splitcheck", "--config", "split.json", "--out", "run"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m = manifest(&tmp.path().join("run"));
    // Equal constants on both circles: the share of the smaller one is
    // 2π / (2π + 4π) = 1/3.
    assert!((m["summary"]["predicted_fraction"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let csv = fs::read_to_string(tmp.path().join("run/splitcheck.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let n: f64 = cells[0].parse().unwrap();
        let on_first: f64 = cells[1].parse().unwrap();
        assert!((on_first / n - 1.0 / 3.0).abs() <= 1.0 / n + 1e-12, "{row}");
    }
}
