//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit if
//! any failed. Runs without the libtest harness so the report always prints.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bsdloc::detector_sim::DetectorModel;
use bsdloc::experiments::{
    accuracy_table, run_all, AccuracyRow, ExperimentConfig, MapSource, Pipeline,
};
use bsdloc::hamming_index::{BitString, BkIndex};
use bsdloc::localizer::{
    likelihood_ratio, log_likelihood_ratio, posterior_weight, single_location_posterior,
    LikelihoodModel, MatchMode,
};
use bsdloc::map_ingest::{generate_synthetic_city, MapArtifacts, SyntheticCityParams};
use bsdloc::map_model::{
    compute_bsd_table, gap_bit, gap_ray_mask, normalize_degrees, reverse_bsd, Bsd, BsdConfig,
    DirectedLocation, GeoPoint, LocationId, PointId, SemanticMap, View,
};
use bsdloc::routes::{enumerate_routes, AdjacencyMatrix, LengthSize, RouteDatabase};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn search_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut queries = 0;
    for (db_no, bits) in [4usize, 60, 160].into_iter().cycle().take(20).enumerate() {
        let db: Vec<Bits> = (0..10_000).map(|_| random_bits(&mut rng, bits)).collect();
        let mut index = BkIndex::new(bits);
        for (i, b) in db.iter().enumerate() {
            index
                .insert(&BitString::from_bools(b), i as u32)
                .map_err(|e| e.to_string())?;
        }
        for _ in 0..100 {
            let query = if rng.random_bool(0.5) {
                let mut q = db[rng.random_range(0..db.len())].clone();
                for _ in 0..rng.random_range(0..=bits.min(8)) {
                    let k = rng.random_range(0..bits);
                    q[k] = !q[k];
                }
                q
            } else {
                random_bits(&mut rng, bits)
            };
            let (min, want) = linear_nearest(&db, &query);
            let got = index
                .nearest(&BitString::from_bools(&query), 1)
                .map_err(|e| e.to_string())?;
            let ids: Vec<u32> = got.ties().iter().map(|m| m.route).collect();
            ensure!(
                got.best_distance() == Some(min) && ids == want,
                "database {db_no} ({bits} bits): minimum set differs"
            );
            queries += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}");
    Ok(format!("{queries} queries exact, {elapsed:.1?}"))
}

fn enumeration_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut total = 0u64;
    for g in 0..50 {
        let n = rng.random_range(2..=50usize);
        let edges = rng.random_range(n / 2..=n + n / 3);
        let pairs: Vec<(u32, u32)> = (0..edges)
            .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
            .collect();
        let adj = AdjacencyMatrix::from_edges(n, &pairs);
        let lists: Vec<Vec<u32>> = (0..n as u32).map(|i| adj.neighbors(i).to_vec()).collect();
        for length in 1..=8 {
            let got = enumerate_routes(&adj, length, None).map_err(|e| e.to_string())?;
            let want = dfs_path_count(&lists, length);
            ensure!(
                got.routes.len() as u64 == want,
                "graph {g} length {length}: {} vs {want}",
                got.routes.len()
            );
            total += want;
        }
    }
    Ok(format!("50 graphs, {total} paths, counts equal"))
}

fn noiseless_localization() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig {
        map: MapSource::Synthetic(unique_city()),
        test_routes: 100,
        ..Default::default()
    };
    let p = Pipeline::prepare(config).map_err(|e| e.to_string())?;
    let locations = p.artifacts.locations().len();
    ensure!(locations >= 500, "map has {locations} locations");
    let ambiguous = ambiguous_classes(&p.db, 15);
    ensure!(
        ambiguous == 0,
        "{ambiguous} length-15 classes end at several locations"
    );
    let routes = p.test_routes().map_err(|e| e.to_string())?;
    let runs = run_all(&p, &routes, MatchMode::BsdAndTurns, 1.0).map_err(|e| e.to_string())?;
    let late = runs
        .iter()
        .filter(|r| r.localized_step.is_none_or(|s| s > 15))
        .count();
    let errors: usize = runs.iter().map(|r| r.wrong_steps + r.lost).sum();
    ensure!(late == 0, "{late} of 100 routes not localized by step 15");
    ensure!(errors == 0, "{errors} wrong or lost steps");
    let slowest = runs
        .iter()
        .filter_map(|r| r.localized_step)
        .max()
        .unwrap_or(0);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:.1?}");
    Ok(format!(
        "{locations} locations, 100/100 by step {slowest}, tracking exact, {elapsed:.1?}"
    ))
}

struct Accuracy {
    locations: usize,
    by_method: HashMap<MatchMode, Vec<AccuracyRow>>,
    by_q: Vec<(f64, Vec<AccuracyRow>)>,
    elapsed: Duration,
}

fn accuracy_runs() -> Result<Accuracy, String> {
    let start = Instant::now();
    let config = ExperimentConfig {
        test_routes: 150,
        q: 0.75,
        max_length: 40,
        ..Default::default()
    };
    let p = Pipeline::prepare(config).map_err(|e| e.to_string())?;
    let routes = p.test_routes().map_err(|e| e.to_string())?;
    let buckets = p.config.buckets.clone();
    let mut by_method = HashMap::new();
    for mode in [
        MatchMode::BsdAndTurns,
        MatchMode::BsdOnly,
        MatchMode::TurnsOnly,
    ] {
        let runs = run_all(&p, &routes, mode, 0.75).map_err(|e| e.to_string())?;
        by_method.insert(mode, accuracy_table(&runs, &buckets, mode, 0.75));
    }
    let mut by_q = Vec::new();
    for q in [0.6, 0.75, 0.9, 1.0] {
        let runs = run_all(&p, &routes, MatchMode::BsdAndTurns, q).map_err(|e| e.to_string())?;
        by_q.push((
            q,
            accuracy_table(&runs, &buckets, MatchMode::BsdAndTurns, q),
        ));
    }
    Ok(Accuracy {
        locations: p.artifacts.locations().len(),
        by_method,
        by_q,
        elapsed: start.elapsed(),
    })
}

fn percent_at(rows: &[AccuracyRow], bucket: usize) -> f64 {
    rows.iter()
        .find(|r| r.bucket == bucket)
        .map_or(f64::NAN, |r| r.percent)
}

fn localization_accuracy(a: &Accuracy) -> Outcome {
    let rows = &a.by_method[&MatchMode::BsdAndTurns];
    let (b20, b40) = (percent_at(rows, 20), percent_at(rows, 40));
    ensure!(a.locations >= 2_000, "map has {} locations", a.locations);
    ensure!(
        a.elapsed < Duration::from_secs(1800),
        "took {:.1?}",
        a.elapsed
    );
    ensure!(
        b20 >= 70.0 && b40 >= 85.0,
        "0-20: {b20:.1}%, 0-40: {b40:.1}%"
    );
    Ok(format!(
        "{} locations, 150 routes, 0-20: {b20:.1}%, 0-40: {b40:.1}%",
        a.locations
    ))
}

fn monotone_in_q(a: &Accuracy) -> Outcome {
    let b40: Vec<(f64, f64)> = a
        .by_q
        .iter()
        .map(|(q, rows)| (*q, percent_at(rows, 40)))
        .collect();
    let text = b40
        .iter()
        .map(|(q, p)| format!("q={q}: {p:.1}%"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure!(
        b40.windows(2).all(|w| w[0].1 <= w[1].1),
        "not monotone at 0-40: {text}"
    );
    ensure!(b40.last().unwrap().1 >= 99.0, "q=1 below 99%: {text}");
    Ok(text)
}

fn method_ordering(a: &Accuracy) -> Outcome {
    let both = &a.by_method[&MatchMode::BsdAndTurns];
    let bsd = &a.by_method[&MatchMode::BsdOnly];
    let turns = &a.by_method[&MatchMode::TurnsOnly];
    for ((x, y), z) in both.iter().zip(bsd).zip(turns) {
        ensure!(
            x.percent >= y.percent && y.percent >= z.percent,
            "bucket {}: {:.1} / {:.1} / {:.1}",
            x.bucket,
            x.percent,
            y.percent,
            z.percent
        );
    }
    let t40 = percent_at(turns, 40);
    ensure!(t40 < 30.0, "turns only at 0-40 is {t40:.1}%");
    Ok(format!(
        "0-40: both {:.1}%, bsd only {:.1}%, turns only {t40:.1}%",
        percent_at(both, 40),
        percent_at(bsd, 40)
    ))
}

fn probability_formulas() -> Outcome {
    let mut worst = 0f64;
    for q in [0.55f64, 0.6, 0.75, 0.9, 0.99] {
        let m = LikelihoodModel::new(q).map_err(|e| e.to_string())?;
        for n in [1usize, 5, 40] {
            for h in (0..=4 * n as u32).step_by(3) {
                let want = q.powi((4 * n as u32 - h) as i32) * (1.0 - q).powi(h as i32);
                worst = worst.max(((posterior_weight(h, n, &m) - want) / want).abs());
            }
        }
        for (hi, hj) in [(0u32, 0u32), (1, 0), (5, 2), (2, 9)] {
            let want = ((1.0 - q) / q).powi(hi as i32 - hj as i32);
            worst = worst.max(((likelihood_ratio(hi, hj, &m) - want) / want).abs());
        }
    }
    ensure!(worst < 1e-12, "relative error {worst:e}");
    let m = LikelihoodModel::new(0.75).map_err(|e| e.to_string())?;
    ensure!(
        log_likelihood_ratio(0, 1, &m) == 3f64.ln(),
        "unit ratio is not ln 3"
    );

    let table: Vec<Bsd> = Bsd::all().collect();
    let candidates: Vec<Bits> = table.iter().map(|d| d.bits().to_vec()).collect();
    let mut gap = 0f64;
    for obs in Bsd::all() {
        let got = single_location_posterior(obs, &table, &m);
        let want = bayes_posterior(&candidates, &obs.bits(), 0.75);
        gap = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(gap, f64::max);
    }
    ensure!(gap < 1e-9, "posterior differs from Bayes by {gap:e}");
    Ok(format!(
        "relative error {worst:.1e}, ln 3 exact, Bayes gap {gap:.1e}"
    ))
}

fn storage_accounting() -> Outcome {
    ensure!(
        LengthSize::for_routes(40, 1).descriptor_bytes == 20,
        "descriptor is not 20 bytes"
    );
    let payload = LengthSize::for_routes(40, 40_000_000).payload_bytes;
    ensure!(payload == 800_000_000, "payload {payload}");
    let p = Pipeline::prepare(ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let report = p.db.size_report(None);
    ensure!(report.routes >= 100_000, "only {} routes", report.routes);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("routes.db");
    p.db.save(&path, None).map_err(|e| e.to_string())?;
    let measured = std::fs::metadata(&path).map_err(|e| e.to_string())?.len();
    let off = (measured as f64 - report.total_bytes as f64).abs() / report.total_bytes as f64;
    ensure!(
        off < 0.05,
        "file {measured} bytes vs {} predicted",
        report.total_bytes
    );
    let back = RouteDatabase::load(&path).map_err(|e| e.to_string())?;
    ensure!(
        back.total_routes() == p.db.total_routes(),
        "reload lost routes"
    );
    Ok(format!(
        "20 B/route, 800 MB at 4e7 routes, {} routes in {measured} B ({:.2}% over records)",
        report.routes,
        100.0 * off
    ))
}

fn geometry_oracle() -> Outcome {
    let config = BsdConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    for layout in 0..1_000 {
        let buildings = random_layout(&mut rng);
        let loc = DirectedLocation::new(
            LocationId(0),
            PointId(0),
            GeoPoint::new(0.0, 0.0),
            rng.random_range(0.0..360.0),
        );
        let intervals = covered_intervals(&loc.position, &buildings, config.sector.radius);
        let map = SemanticMap::new(vec![], buildings, vec![]);
        for view in [View::Left, View::Right] {
            let exact: Vec<bool> = config
                .ray_angles(loc.heading, view)
                .iter()
                .map(|&t| !direction_covered(t, &intervals))
                .collect();
            ensure!(
                gap_ray_mask(&loc, &map, view, &config) == exact,
                "layout {layout} {view:?}: ray mask differs"
            );
            let bit = gap_bit(&loc, &map, view, &config).map_err(|e| e.to_string())?;
            ensure!(
                bit == config.has_gap_run(&exact),
                "layout {layout} {view:?}: gap bit differs"
            );
        }
    }
    let city =
        generate_synthetic_city(&SyntheticCityParams::default()).map_err(|e| e.to_string())?;
    let a = MapArtifacts::from_synthetic(city, 10.0).map_err(|e| e.to_string())?;
    let table = compute_bsd_table(a.locations(), &a.map, &config);
    let key = |point: PointId, heading: f64| {
        (
            point.0,
            (normalize_degrees(heading) * 1e6).round() as i64 % 360_000_000,
        )
    };
    let by_pose: HashMap<_, Bsd> = a
        .locations()
        .iter()
        .zip(&table)
        .map(|(l, d)| (key(l.point, l.heading), *d))
        .collect();
    for (l, d) in a.locations().iter().zip(&table) {
        let back = by_pose
            .get(&key(l.point, l.heading + 180.0))
            .ok_or(format!("location {} has no reverse", l.id.0))?;
        ensure!(
            *back == reverse_bsd(*d),
            "location {}: reversal relation fails",
            l.id.0
        );
    }
    Ok(format!(
        "1000 layouts exact, reversal holds on all {} locations",
        table.len()
    ))
}

fn detector_channel() -> Outcome {
    let n = 100_000u64;
    let model = DetectorModel::symmetric(0.75, 1010).map_err(|e| e.to_string())?;
    let mut truths = ChaCha8Rng::seed_from_u64(1011);
    let mut kept = [0u64; 4];
    let mut stream = Vec::with_capacity(n as usize);
    for i in 0..n {
        let truth = Bsd::unpack(truths.random_range(0..16)).map_err(|e| e.to_string())?;
        let out = model.estimate_indexed(truth, 0, i);
        for (b, k) in kept.iter_mut().enumerate() {
            *k += (truth.bit(b) == out.bit(b)) as u64;
        }
        stream.push(out.pack());
    }
    let sigma = (n as f64 * 0.75 * 0.25).sqrt();
    for (b, k) in kept.iter().enumerate() {
        let z = (*k as f64 - 0.75 * n as f64) / sigma;
        ensure!(
            z.abs() < 3.0 + f64::EPSILON,
            "bit {b}: {k} kept, z = {z:.2}"
        );
    }
    let again: Vec<u8> = {
        let twin = DetectorModel::symmetric(0.75, 1010).map_err(|e| e.to_string())?;
        let mut truths = ChaCha8Rng::seed_from_u64(1011);
        (0..n)
            .map(|i| {
                twin.estimate_indexed(Bsd::unpack(truths.random_range(0..16)).unwrap(), 0, i)
                    .pack()
            })
            .collect()
    };
    ensure!(again == stream, "same seed gave a different stream");
    let rates: Vec<String> = kept
        .iter()
        .map(|k| format!("{:.4}", *k as f64 / n as f64))
        .collect();
    Ok(format!(
        "per-bit accuracy {}, replay identical",
        rates.join(" ")
    ))
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Err(panic_message(e)))
}

fn main() -> ExitCode {
    let shared = catch_unwind(accuracy_runs).unwrap_or_else(|e| Err(panic_message(e)));
    let with_runs = |f: fn(&Accuracy) -> Outcome| -> Outcome {
        match &shared {
            Ok(a) => guarded(|| f(a)),
            Err(e) => Err(format!("accuracy runs failed: {e}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("1 search oracle", guarded(search_oracle)),
        ("2 enumeration oracle", guarded(enumeration_oracle)),
        ("3 noiseless localization", guarded(noiseless_localization)),
        ("4 localization accuracy", with_runs(localization_accuracy)),
        ("5 monotone in q", with_runs(monotone_in_q)),
        ("6 method ordering", with_runs(method_ordering)),
        ("7 probability formulas", guarded(probability_formulas)),
        ("8 storage accounting", guarded(storage_accounting)),
        ("9 geometry oracle", guarded(geometry_oracle)),
        ("10 detector channel", guarded(detector_channel)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
