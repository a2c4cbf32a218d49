mod common;

use bsdloc::experiments::{ExperimentConfig, Pipeline};
use bsdloc::routes::{LengthSize, RouteDatabase, RouteRef};

#[test]
fn forty_location_descriptors_take_twenty_bytes() {
    let s = LengthSize::for_routes(40, 1);
    assert_eq!(s.descriptor_bytes, 20);
    assert_eq!(
        LengthSize::for_routes(40, 40_000_000).payload_bytes,
        800_000_000
    );
    // the descriptor is 4 bits per location, rounded up to whole bytes
    for l in 1..=64u64 {
        assert_eq!(
            LengthSize::for_routes(l as usize, 1).descriptor_bytes,
            (4 * l).div_ceil(8)
        );
    }
}

#[test]
fn file_size_matches_the_record_prediction() {
    let p = Pipeline::prepare(ExperimentConfig::default()).unwrap();
    let report = p.db.size_report(None);
    assert!(report.routes >= 100_000, "only {} routes", report.routes);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("routes.db");
    p.db.save(&path, None).unwrap();
    let measured = std::fs::metadata(&path).unwrap().len();
    assert_eq!(measured, report.file_bytes);
    let predicted = report.total_bytes as f64;
    assert!(
        (measured as f64 - predicted).abs() / predicted < 0.05,
        "{measured} vs {predicted}"
    );

    let back = RouteDatabase::load(&path).unwrap();
    assert_eq!(back.total_routes(), p.db.total_routes());
    assert_eq!(back.map_hash(), p.db.map_hash());
    for length in [1usize, 13, 40] {
        assert_eq!(back.count(length), p.db.count(length));
        for index in (0..p.db.count(length) as u32).step_by(997) {
            let r = RouteRef { length, index };
            assert_eq!(back.route(r).unwrap(), p.db.route(r).unwrap());
            assert_eq!(back.descriptor(r).unwrap(), p.db.descriptor(r).unwrap());
            assert_eq!(back.turn_pattern(r).unwrap(), p.db.turn_pattern(r).unwrap());
        }
    }
}

#[test]
fn partial_saves_hold_only_the_chosen_lengths() {
    let p = common::pipeline(common::unique_city(), 1);
    let mut bytes = Vec::new();
    p.db.save_to(&mut bytes, Some(&[3, 7])).unwrap();
    assert_eq!(
        bytes.len() as u64,
        p.db.size_report(Some(&[3, 7])).file_bytes
    );
    let back = RouteDatabase::load_from(bytes.as_slice()).unwrap();
    assert_eq!(back.lengths(), vec![3, 7]);
    assert_eq!(back.count(7), p.db.count(7));
}

#[test]
fn corrupt_files_are_rejected() {
    let p = common::pipeline(common::unique_city(), 1);
    let mut bytes = Vec::new();
    p.db.save_to(&mut bytes, Some(&[2])).unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    assert!(RouteDatabase::load_from(bad_magic.as_slice()).is_err());
    assert!(RouteDatabase::load_from(&bytes[..bytes.len() - 3]).is_err());
}
