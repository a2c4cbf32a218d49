use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bsdloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsdloc"))
        .current_dir(dir)
        .args(["--config", "exp.toml"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("one JSON report on stdout")
}

const CONFIG: &str = r#"
max_length = 20
test_routes = 5
hamming_lengths = [10]
output_dir = "out"

[map]
kind = "synthetic"
rows = 5
cols = 5
block_size = 100.0
street_dropout = 0.45
seed = 61
"#;

#[test]
fn map_database_and_session_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();

    report(&bsdloc(dir.path(), &["synth", "--out", "city.json"]));
    assert!(dir.path().join("city.json").exists());

    let built = report(&bsdloc(dir.path(), &["--map", "city.json", "build-db"]));
    assert!(built.to_string().contains("routes"));
    assert!(dir.path().join("out/routes.db").exists());

    let session = report(&bsdloc(
        dir.path(),
        &[
            "--map",
            "city.json",
            "localize",
            "--db",
            "out/routes.db",
            "--q",
            "1",
            "--route",
            "2",
        ],
    ));
    assert_eq!(session["status"], "localized");
    assert!(session["first_correct_step"].as_u64().unwrap() <= 20);
    let log = std::fs::read_to_string(dir.path().join("out/session.csv")).unwrap();
    assert_eq!(log.lines().count(), 21);

    // ground-truth descriptors fed back as estimates localize the same way
    report(&bsdloc(dir.path(), &["--map", "city.json", "bsd"]));
    let replay = report(&bsdloc(
        dir.path(),
        &[
            "--map",
            "city.json",
            "localize",
            "--estimates",
            "out/bsd.csv",
            "--route",
            "2",
        ],
    ));
    assert_eq!(replay["first_correct_step"], session["first_correct_step"]);

    report(&bsdloc(
        dir.path(),
        &["--map", "city.json", "snapshot", "--step", "3"],
    ));
    let geo: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/snapshot_step3.geojson")).unwrap(),
    )
    .unwrap();
    assert_eq!(geo["type"], "FeatureCollection");

    report(&bsdloc(dir.path(), &["--map", "city.json", "exp-length"]));
    let csv = std::fs::read_to_string(dir.path().join("out/accuracy_vs_length.csv")).unwrap();
    assert!(csv.starts_with("# config_hash="));
}

#[test]
fn errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let out = bsdloc(dir.path(), &["--map", "missing.json", "bsd"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains("missing.json"));
}
