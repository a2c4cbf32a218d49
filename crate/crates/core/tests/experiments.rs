mod common;

use std::sync::OnceLock;

use bsdloc::error::ExperimentError;
use bsdloc::experiments::{
    accuracy_vs_length, accuracy_vs_q, bsd_distribution, hamming_histogram, read_csv, run_all,
    snapshot, write_csv, AccuracyRow, ExperimentConfig, HammingRow, MapSource, Pipeline,
};
use bsdloc::localizer::{MatchMode, SessionStatus};
use bsdloc::routes::TurnPattern;

fn config(q: f64) -> ExperimentConfig {
    ExperimentConfig {
        map: MapSource::Synthetic(common::unique_city()),
        max_length: 30,
        test_routes: 40,
        q,
        q_values: vec![0.6, 1.0],
        hamming_lengths: vec![10, 20],
        ..Default::default()
    }
}

fn city() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| Pipeline::prepare(config(0.75)).unwrap())
}

fn with_q(q: f64) -> Pipeline {
    let p = city();
    Pipeline::from_artifacts(
        ExperimentConfig {
            q,
            ..p.config.clone()
        },
        p.artifacts.clone(),
    )
    .unwrap()
}

#[test]
fn accuracy_rows_are_cumulative_and_deterministic() {
    let p = city();
    let rows = accuracy_vs_length(p).unwrap();
    assert_eq!(rows.len(), 3 * p.config.buckets.len());
    for method in [
        MatchMode::TurnsOnly,
        MatchMode::BsdOnly,
        MatchMode::BsdAndTurns,
    ] {
        let r: Vec<&AccuracyRow> = rows.iter().filter(|r| r.method == method).collect();
        assert!(r
            .windows(2)
            .all(|w| w[0].bucket < w[1].bucket && w[0].localized <= w[1].localized));
        assert!(r.iter().all(
            |x| x.total == 40 && (x.percent - 100.0 * x.localized as f64 / 40.0).abs() < 1e-12
        ));
    }
    assert_eq!(accuracy_vs_length(p).unwrap(), rows);
}

#[test]
fn noiseless_runs_localize_every_route() {
    let p = city();
    let rows = accuracy_vs_q(p).unwrap();
    let perfect: Vec<&AccuracyRow> = rows.iter().filter(|r| r.q == 1.0).collect();
    assert_eq!(perfect.last().unwrap().percent, 100.0);
    let runs = run_all(p, &p.test_routes().unwrap(), MatchMode::BsdAndTurns, 1.0).unwrap();
    assert!(runs
        .iter()
        .all(|r| r.localized_step.is_some_and(|s| s <= 15)
            && r.tracking_errors == 0
            && r.lost == 0));
}

#[test]
fn csv_output_carries_the_config_hash() {
    let p = city();
    let rows = accuracy_vs_q(p).unwrap();
    let mut out = Vec::new();
    write_csv(&mut out, &p.config.config_hash(), &rows).unwrap();
    let text = String::from_utf8(out.clone()).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        format!("# config_hash={}", p.config.config_hash())
    );
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "method,q,bucket,localized,total,percent"
    );
    let back: Vec<AccuracyRow> = read_csv(out.as_slice()).unwrap();
    assert_eq!(back, rows);
    assert_ne!(config(0.75).config_hash(), config(0.9).config_hash());
    assert_eq!(config(0.75).config_hash(), config(0.75).config_hash());
}

#[test]
fn distance_histograms_cover_every_route() {
    let p = city();
    let rows = hamming_histogram(p).unwrap();
    let probe = p.probe_route().unwrap();
    for &length in &p.config.hamming_lengths {
        let all: Vec<&HammingRow> = rows
            .iter()
            .filter(|r| r.length == length && !r.turns)
            .collect();
        let filtered: Vec<&HammingRow> = rows
            .iter()
            .filter(|r| r.length == length && r.turns)
            .collect();
        assert_eq!(
            all.iter().map(|r| r.count).sum::<usize>(),
            p.db.count(length)
        );
        let turns = bsdloc::experiments::observed_turns(
            &bsdloc::routes::Route(probe.0[..length].to_vec()),
            &p.headings(),
            p.db.turn_threshold(),
        );
        let class = p.db.turn_class(&TurnPattern::from_bools(&turns)).unwrap();
        assert_eq!(filtered.iter().map(|r| r.count).sum::<usize>(), class.len());
        assert_eq!(all.iter().filter(|r| r.true_route).count(), 1);
        assert_eq!(filtered.iter().filter(|r| r.true_route).count(), 1);
        // the turn filter only removes candidates
        for f in &filtered {
            let a = all.iter().find(|a| a.distance == f.distance).unwrap();
            assert!(f.count <= a.count);
        }
    }
    let exact = hamming_histogram(&with_q(1.0)).unwrap();
    assert!(exact
        .iter()
        .filter(|r| r.true_route)
        .all(|r| r.distance == 0));
}

#[test]
fn snapshots_narrow_to_the_true_location() {
    let p = with_q(1.0);
    let early = snapshot(&p, 2).unwrap();
    assert_eq!(early.status, SessionStatus::Bootstrapping);
    assert!(early.best_locations().len() > 10);
    assert!(early.best_locations().contains(&early.true_location));

    let late = snapshot(&p, 25).unwrap();
    assert_eq!(late.status, SessionStatus::Localized);
    assert_eq!(late.best_locations(), vec![late.true_location]);
    let features = late.geojson["features"].as_array().unwrap();
    assert_eq!(late.geojson["type"], "FeatureCollection");
    assert_eq!(features.len(), p.artifacts.locations().len() + 1);
    assert_eq!(features.last().unwrap()["geometry"]["type"], "LineString");
    assert!(
        features
            .iter()
            .filter(|f| f["properties"]["current"] == true)
            .count()
            == 1
    );
    assert!(snapshot(&p, 0).is_err());
    assert!(snapshot(&p, 31).is_err());
}

#[test]
fn too_few_routes_is_reported() {
    let mut c = config(0.75);
    c.test_routes = 10_000_000;
    let p = Pipeline::from_artifacts(c, city().artifacts.clone()).unwrap();
    match p.test_routes() {
        Err(ExperimentError::InsufficientRoutes {
            requested,
            available,
            ..
        }) => {
            assert_eq!(requested, 10_000_000);
            assert_eq!(available, p.db.count(30));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn perfect_detectors_copy_the_histogram() {
    let rows = bsd_distribution(&city().bsds, 1.0, 9).unwrap();
    assert!(rows.iter().all(|r| r.estimated == r.ground_truth));
    let noisy = bsd_distribution(&city().bsds, 0.75, 9).unwrap();
    assert_eq!(
        noisy.iter().map(|r| r.estimated).sum::<usize>(),
        city().bsds.len()
    );
}

#[test]
fn bad_configs_are_rejected() {
    for c in [
        ExperimentConfig {
            test_routes: 0,
            ..config(0.75)
        },
        ExperimentConfig {
            max_length: 0,
            ..config(0.75)
        },
        ExperimentConfig {
            buckets: vec![0, 5],
            ..config(0.75)
        },
        ExperimentConfig {
            q: 1.5,
            ..config(0.75)
        },
    ] {
        assert!(matches!(c.validate(), Err(ExperimentError::Config(_))));
    }
    let long = Pipeline::from_artifacts(
        ExperimentConfig {
            hamming_lengths: vec![31],
            ..config(0.75)
        },
        city().artifacts.clone(),
    )
    .unwrap();
    assert!(matches!(
        hamming_histogram(&long),
        Err(ExperimentError::Config(_))
    ));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(
        &path,
        "max_length = 12\ntest_routes = 5\n[map]\nkind = \"synthetic\"\nrows = 3\ncols = 3\n",
    )
    .unwrap();
    let c = ExperimentConfig::from_file(&path).unwrap();
    assert_eq!((c.max_length, c.test_routes), (12, 5));
    std::fs::write(&path, "max_lenght = 12\n").unwrap();
    assert!(ExperimentConfig::from_file(&path).is_err());
    assert!(matches!(
        ExperimentConfig::from_file(&dir.path().join("missing.toml")),
        Err(ExperimentError::File { .. })
    ));
}
