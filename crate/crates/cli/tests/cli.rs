use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lattice-pdo");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LATTICE_PDO_OUT")
        .output()
        .expect("binary runs")
}

fn report(out: &Path, cmd: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join(format!("{cmd}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn symbol_check_bracket_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["symbol-check", "-s", "radius=16", "-s", "scan=[8, 16]"],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let r = report(dir.path(), "symbol-check");
    assert_eq!(r["passed"], true);
    assert_eq!(r["config"]["radius"], 16);
    assert_eq!(r["config"]["symbol"]["name"], "japanese_bracket");
    assert!(r["results"]["ellipticity"]["passed"].as_bool().unwrap());
    assert!(dir.path().join("symbol-check_seminorms.csv").exists());
}

#[test]
fn quantize_constant_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let one = r#"{"kind":"expression","order":0.0,"expr":"1"}"#;
    let o = run(
        &[
            "quantize",
            "--symbol",
            one,
            "-s",
            "radius=12",
            "-s",
            "grid=32",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path(), "quantize");
    assert_eq!(r["results"]["diagonal_gap"], 0.0);
    let csv = std::fs::read_to_string(dir.path().join("quantize_section.csv")).unwrap();
    // Header plus the 25 diagonal entries.
    assert_eq!(csv.lines().count(), 26);
}

#[test]
fn hypothesis_violation_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let sym = r#"{"kind":"builtin","name":"elliptic_demo","m":0.0}"#;
    let args = [
        "adjointness",
        "--symbol",
        sym,
        "-s",
        "sobolev.s1=1",
        "-s",
        "radius=12",
        "-s",
        "scan=[4, 8, 12]",
        "-s",
        "grid=64",
        "-s",
        "trials=10",
    ];
    let o = run(&args, dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("hypothesis m > s1 - s2 not met"),
        "{stdout}"
    );
    let r = report(dir.path(), "adjointness");
    assert_eq!(r["results"]["hypothesis_met"], false);
    assert!(!r["exploratory"].as_array().unwrap().is_empty());
    assert!(dir.path().join("adjointness_deficiency.csv").exists());
}

#[test]
fn schema_violations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["quantize", "-s", "grid=8"],
        vec!["quantize", "-s", "unknown=1"],
        vec![
            "quantize",
            "--symbol",
            "{\"kind\":\"builtin\",\"name\":\"nope\"}",
        ],
        vec![
            "parametrix",
            "--symbol",
            "{\"kind\":\"builtin\",\"name\":\"discrete_laplacian\"}",
            "-s",
            "radius=8",
            "-s",
            "grid=32",
        ],
    ] {
        let o = run(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = Command::new(BIN).arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_verdict_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let sym = r#"{"kind":"builtin","name":"elliptic_demo","m":1.0}"#;
    let args = [
        "parametrix",
        "--symbol",
        sym,
        "-s",
        "radius=16",
        "-s",
        "grid=64",
        "-s",
        "parametrix.steps=1",
        "-s",
        "tolerances.parametrix=1e-14",
    ];
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(dir.path(), "parametrix")["passed"], false);
}

#[test]
fn tables_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sym = r#"{"kind":"builtin","name":"perturbed","m":1.0,"terms":[{"freq":[1],"re":0.3}]}"#;
    let args = [
        "quantize",
        "--symbol",
        sym,
        "-s",
        "radius=10",
        "-s",
        "grid=32",
        "-s",
        "seed=5",
    ];
    run(&args, a.path());
    run(&args, b.path());
    let read = |d: &Path| std::fs::read(d.join("quantize_section.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn config_file_and_env_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "radius = 12\ngrid = 64\nscan = [6, 12]\n[symbol]\nkind = \"builtin\"\nname = \"elliptic_demo\"\nm = 1.0\n",
    )
    .unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(BIN)
        .args(["regularity", "--config"])
        .arg(&cfg)
        .env("LATTICE_PDO_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&out, "regularity");
    assert_eq!(r["config"]["symbol"]["name"], "elliptic_demo");
    assert_eq!(r["config"]["scan"], serde_json::json!([6, 12]));
}

#[test]
fn show_config_prints_resolved_toml() {
    let o = Command::new(BIN)
        .args(["show-config", "-s", "sobolev.s1=0.25"])
        .output()
        .unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("s1 = 0.25"), "{text}");
}
