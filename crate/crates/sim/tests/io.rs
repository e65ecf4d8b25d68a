use std::io::Write;
use std::path::PathBuf;

use pem_core::signals::{Series, Unit};
use pem_sim::config::Scenario;
use pem_sim::io::{config_hash, load_series, read_scores, write_scores, write_series, ScoreRow};
use pem_sim::Error;
use tempfile::TempDir;

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
    p
}

#[test]
fn headerless_values() {
    let d = TempDir::new().unwrap();
    let s = load_series(&file(&d, "a.csv", "1.0\n-1.0\n0.0\n"), 2.0).unwrap();
    assert_eq!(s.values(), &[1.0, -1.0, 0.0]);
    assert_eq!((s.dt(), s.t0(), s.unit()), (2.0, 0, Unit::Normalized));
}

#[test]
fn empty_file_is_an_error() {
    let d = TempDir::new().unwrap();
    assert!(load_series(&file(&d, "e.csv", ""), 2.0).is_err());
    assert!(load_series(&file(&d, "h.csv", "t,value\n"), 2.0).is_err());
}

#[test]
fn bad_values_report_their_line() {
    let d = TempDir::new().unwrap();
    for (text, line) in [
        ("0.5\nNaN\n0.1\n", 2),
        ("0.5\n0.2\nabc\n", 3),
        ("t,value\n0,0.1\n2,\n", 3),
    ] {
        match load_series(&file(&d, "n.csv", text), 2.0) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn missing_samples_are_not_skipped() {
    let d = TempDir::new().unwrap();
    let r = load_series(&file(&d, "gap.csv", "0.1\n\n0.3\n"), 2.0);
    assert!(matches!(r, Err(Error::Parse { line: 2, .. })), "{r:?}");
    assert!(load_series(&file(&d, "trail.csv", "0.1\n0.3\n\n"), 2.0).is_ok());
    assert!(load_series(&file(&d, "gapt.csv", "0,0.1\n2,0.2\n6,0.3\n"), 2.0).is_err());
}

#[test]
fn time_column_sets_the_period() {
    let d = TempDir::new().unwrap();
    let s = load_series(&file(&d, "t.csv", "100,0.5\n102,0.1\n104,0.2\n"), 4.0).unwrap();
    assert_eq!((s.dt(), s.t0()), (2.0, 100));
    assert_eq!(s.values(), &[0.5, 0.1, 0.2]);

    let iso = "time,mw\n2019-01-07T00:00:00Z,3.7\n2019-01-07T00:00:02Z,3.8\n2019-01-07T00:00:04Z,3.6\n";
    let s = load_series(&file(&d, "iso.csv", iso), 4.0).unwrap();
    assert_eq!((s.dt(), s.t0(), s.unit()), (2.0, 1_546_819_200, Unit::MegaWatt));
}

#[test]
fn series_round_trip() {
    let d = TempDir::new().unwrap();
    let s = Series::new(vec![0.25, -0.5, 1.0 / 3.0], 2.0, 1_000, Unit::Normalized).unwrap();
    let p = d.path().join("s.csv");
    write_series(&p, &s).unwrap();
    assert_eq!(load_series(&p, 7.0).unwrap(), s);
}

#[test]
fn score_table_round_trip() {
    let d = TempDir::new().unwrap();
    let row = ScoreRow {
        scenario: "x".into(),
        method: "baseline".into(),
        seed: 4,
        packet_s: 180.0,
        randomization_s: 30.0,
        horizon: 0,
        precision: 0.5,
        accuracy: 0.25,
        delay: 0.125,
        composite: 0.875 / 3.0,
        rmae: 0.1,
        rrmse: 0.2,
        cycles_per_device_hour: 1.5,
    };
    let p = d.path().join("scores.csv");
    write_scores(&p, std::slice::from_ref(&row)).unwrap();
    assert_eq!(read_scores(&p).unwrap(), vec![row]);
}

#[test]
fn config_hash_tracks_the_configuration() {
    let a = Scenario::default();
    let mut b = a.clone();
    assert_eq!(config_hash(&a), config_hash(&b));
    assert_eq!(config_hash(&a).len(), 64);
    b.packets.delta_p_s = 120.0;
    assert_ne!(config_hash(&a), config_hash(&b));
}
