//! CSV and JSON file formats.
//!
//! Signal files hold one sample per line, optionally preceded by a time
//! column (epoch seconds or ISO-8601) that fixes the sample period. A header
//! row may name the columns; a value column called `mw` marks the samples as
//! megawatts rather than normalized.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use pem_core::signals::{Series, Unit};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Scenario;
use crate::run::{RunRecord, StepRow};
use crate::Error;

fn parse_time(field: &str) -> Option<f64> {
    if let Ok(v) = field.parse::<f64>() {
        return Some(v);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(field) {
        return Some(t.timestamp() as f64 + t.timestamp_subsec_millis() as f64 / 1000.0);
    }
    for fmt in [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S",
        "%m/%d/%Y %H:%M:%S",
        "%m/%d/%Y %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(field, fmt) {
            return Some(t.and_utc().timestamp() as f64);
        }
    }
    None
}

/// Loads a uniformly sampled series. `default_dt` applies when there is no
/// time column.
///
/// Accepts one value per line, `time,value` pairs, or a header naming the
/// columns (`value` or `mw`, and optionally `t`/`time`/`timestamp`).
pub fn load_series(path: &Path, default_dt: f64) -> Result<Series, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    // the csv reader drops blank lines, which would silently shift the samples
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).unwrap_or(0);
    if let Some(i) = lines[..last].iter().position(|l| l.trim().is_empty()) {
        return Err(Error::Parse {
            path: path.into(),
            line: i as u64 + 1,
            msg: "missing sample (blank line)".into(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = rdr.records().peekable();

    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let mut value_col = 0;
    let mut time_col = None;
    let mut unit = Unit::Normalized;
    if let Some(Ok(first)) = records.peek() {
        let numeric = first
            .iter()
            .all(|f| f.parse::<f64>().is_ok() || parse_time(f).is_some());
        if numeric {
            if first.len() >= 2 {
                time_col = Some(0);
                value_col = 1;
            }
        } else {
            let find = |name: &str| first.iter().position(|h| h.eq_ignore_ascii_case(name));
            (value_col, unit) = match (find("value"), find("mw")) {
                (Some(c), _) => (c, Unit::Normalized),
                (None, Some(c)) => (c, Unit::MegaWatt),
                _ => return Err(parse_err(1, "header has no `value` or `mw` column".into())),
            };
            time_col = find("t").or_else(|| find("time")).or_else(|| find("timestamp"));
            records.next();
        }
    }

    let mut values = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            return Err(parse_err(line, "missing sample (blank line)".into()));
        }
        let raw = rec
            .get(value_col)
            .ok_or_else(|| parse_err(line, "missing value field".into()))?;
        let v: f64 = raw
            .parse()
            .map_err(|_| parse_err(line, format!("cannot parse value {raw:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value {raw:?}")));
        }
        values.push(v);
        if let Some(tc) = time_col {
            let f = rec.get(tc).unwrap_or("");
            let t = parse_time(f).ok_or_else(|| parse_err(line, format!("cannot parse time {f:?}")))?;
            if let Some(&prev) = times.last() {
                let step = t - prev;
                let expected = if times.len() >= 2 { times[1] - times[0] } else { step };
                if !(step > 0.0) || f64::abs(step - expected) > 1e-6 * expected.abs().max(1.0) {
                    return Err(parse_err(
                        line,
                        format!("non-uniform sampling: step {step} s, expected {expected} s"),
                    ));
                }
            }
            times.push(t);
        }
    }
    if values.is_empty() {
        return Err(parse_err(1, "no samples".into()));
    }
    let (dt, t0) = match times.as_slice() {
        [t0, t1, ..] => (t1 - t0, t0.floor() as i64),
        [t0] => (default_dt, t0.floor() as i64),
        [] => (default_dt, 0),
    };
    Ok(Series::new(values, dt, t0, unit)?)
}

pub fn write_series(path: &Path, s: &Series) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    let col = match s.unit() {
        Unit::Normalized => "value",
        Unit::MegaWatt => "mw",
    };
    w.write_record(["t", col])?;
    for (k, v) in s.values().iter().enumerate() {
        w.write_record([s.time_of(k).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_rows(path: &Path, rows: &[StepRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Score table row. Column names are part of the output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub packet_s: f64,
    pub randomization_s: f64,
    pub horizon: usize,
    pub precision: f64,
    pub accuracy: f64,
    pub delay: f64,
    pub composite: f64,
    pub rmae: f64,
    pub rrmse: f64,
    pub cycles_per_device_hour: f64,
}

impl ScoreRow {
    pub fn new(sc: &Scenario, rec: &RunRecord) -> Self {
        Self {
            scenario: sc.name.clone(),
            method: sc.method.label().into(),
            seed: rec.seed,
            packet_s: sc.packets.delta_p_s,
            randomization_s: sc.packets.delta_a_s,
            horizon: if sc.method.is_mpc() { sc.mpc.horizon } else { 0 },
            precision: rec.score.precision,
            accuracy: rec.score.accuracy,
            delay: rec.score.delay,
            composite: rec.score.composite,
            rmae: rec.score.rmae,
            rrmse: rec.score.rrmse,
            cycles_per_device_hour: rec.cycles_per_device_hour,
        }
    }
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>, Error> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// SHA-256 of the canonical TOML rendering of a scenario.
pub fn config_hash(sc: &Scenario) -> String {
    let digest = Sha256::digest(sc.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub schema_version: u32,
    pub package_version: String,
    pub floor_violations: usize,
    pub fallbacks: usize,
    pub outputs: Vec<PathBuf>,
    pub config: Scenario,
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<(), Error> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, m)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `<stem>.csv`, `<stem>.scores.csv` and `<stem>.manifest.json` into `dir`.
pub fn persist_run(dir: &Path, sc: &Scenario, rec: &RunRecord) -> Result<Vec<PathBuf>, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = format!("{}_{}_seed{}", sc.name, sc.method.label(), rec.seed);
    let rows_path = dir.join(format!("{stem}.csv"));
    let score_path = dir.join(format!("{stem}.scores.csv"));
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    write_rows(&rows_path, &rec.rows)?;
    write_scores(&score_path, &[ScoreRow::new(sc, rec)])?;
    let outputs = vec![rows_path, score_path, manifest_path.clone()];
    write_manifest(
        &manifest_path,
        &Manifest {
            name: sc.name.clone(),
            method: sc.method.label().into(),
            seed: rec.seed,
            config_hash: rec.config_hash.clone(),
            schema_version: sc.schema_version,
            package_version: env!("CARGO_PKG_VERSION").into(),
            floor_violations: rec.floor_violations,
            fallbacks: rec.fallbacks,
            outputs: outputs
                .iter()
                .map(|p| p.file_name().map(PathBuf::from).unwrap_or_default())
                .collect(),
            config: sc.clone(),
        },
    )?;
    Ok(outputs)
}
