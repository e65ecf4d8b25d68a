//! Seed aggregation and ordering checks over a sweep table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::sweep::SweepRow;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation; the deviation is zero below two values.
pub fn mean_std(v: &[f64]) -> MeanStd {
    if v.is_empty() {
        return MeanStd {
            mean: f64::NAN,
            std: 0.0,
        };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

/// Plot-ready summary row of one sweep cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: String,
    pub method: String,
    pub packet_s: f64,
    pub randomization_s: f64,
    pub horizon: usize,
    pub seeds: usize,
    pub failures: usize,
    pub rmae_mean: f64,
    pub rmae_std: f64,
    pub rrmse_mean: f64,
    pub rrmse_std: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
    pub composite_mean: f64,
    pub composite_std: f64,
    pub cycles_mean: f64,
    pub cycles_std: f64,
    pub floor_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    /// Human-readable ordering violations, one per line.
    pub flags: Vec<String>,
}

impl Report {
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<48} n={:<2} rmae {:.4}±{:.4}  rrmse {:.4}±{:.4}  composite {:.3}±{:.3}  cycles {:.3}",
                r.key,
                r.seeds,
                r.rmae_mean,
                r.rmae_std,
                r.rrmse_mean,
                r.rrmse_std,
                r.composite_mean,
                r.composite_std,
                r.cycles_mean
            );
        }
        if self.flags.is_empty() {
            s.push_str("no ordering violations\n");
        }
        for f in &self.flags {
            let _ = writeln!(s, "FLAG {f}");
        }
        s
    }
}

/// Key with the `method=` component removed, so methods of one cell group together.
fn cell_of(key: &str) -> String {
    key.split(';')
        .filter(|p| !p.starts_with("method="))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn report(table: &[SweepRow]) -> Report {
    let mut groups: BTreeMap<(String, String), Vec<&SweepRow>> = BTreeMap::new();
    for r in table {
        let key = if r.key.is_empty() {
            r.scenario.clone()
        } else {
            r.key.clone()
        };
        groups.entry((key, r.method.clone())).or_default().push(r);
    }
    let rows: Vec<SummaryRow> = groups
        .iter()
        .map(|((key, method), rs)| {
            let ok: Vec<&&SweepRow> = rs.iter().filter(|r| r.error.is_none()).collect();
            let col = |f: fn(&SweepRow) -> Option<f64>| mean_std(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let rmae = col(|r| r.rmae);
            let rrmse = col(|r| r.rrmse);
            let precision = col(|r| r.precision);
            let accuracy = col(|r| r.accuracy);
            let delay = col(|r| r.delay);
            let composite = col(|r| r.composite);
            let cycles = col(|r| r.cycles_per_device_hour);
            SummaryRow {
                key: key.clone(),
                method: method.clone(),
                packet_s: rs[0].packet_s,
                randomization_s: rs[0].randomization_s,
                horizon: rs[0].horizon,
                seeds: ok.len(),
                failures: rs.len() - ok.len(),
                rmae_mean: rmae.mean,
                rmae_std: rmae.std,
                rrmse_mean: rrmse.mean,
                rrmse_std: rrmse.std,
                precision_mean: precision.mean,
                precision_std: precision.std,
                accuracy_mean: accuracy.mean,
                accuracy_std: accuracy.std,
                delay_mean: delay.mean,
                delay_std: delay.std,
                composite_mean: composite.mean,
                composite_std: composite.std,
                cycles_mean: cycles.mean,
                cycles_std: cycles.std,
                floor_violations: ok.iter().filter_map(|r| r.floor_violations).sum(),
            }
        })
        .collect();

    let mut flags = Vec::new();
    for r in &rows {
        if r.failures > 0 {
            flags.push(format!("{}: {} failed run(s)", r.key, r.failures));
        }
        if r.floor_violations > 0 {
            flags.push(format!(
                "{}: {} down-ramp floor violation(s)",
                r.key, r.floor_violations
            ));
        }
    }
    let mut by_cell: BTreeMap<String, BTreeMap<&str, &SummaryRow>> = BTreeMap::new();
    for r in &rows {
        by_cell.entry(cell_of(&r.key)).or_default().insert(r.method.as_str(), r);
    }
    for (cell, m) in &by_cell {
        let cell = if cell.is_empty() { "(all)" } else { cell.as_str() };
        if let (Some(pf), Some(base)) = (m.get("mpc-pf"), m.get("baseline")) {
            if pf.rrmse_mean > base.rrmse_mean {
                flags.push(format!(
                    "{cell}: mpc-pf rrmse {:.4} worse than baseline {:.4}",
                    pf.rrmse_mean, base.rrmse_mean
                ));
            }
        }
        if let (Some(pf), Some(af)) = (m.get("mpc-pf"), m.get("mpc-af")) {
            if pf.rrmse_mean > af.rrmse_mean {
                flags.push(format!(
                    "{cell}: mpc-pf rrmse {:.4} worse than mpc-af {:.4}",
                    pf.rrmse_mean, af.rrmse_mean
                ));
            }
        }
        if let (Some(af), Some(base)) = (m.get("mpc-af"), m.get("baseline")) {
            if af.rrmse_mean > base.rrmse_mean * 1.005 {
                flags.push(format!(
                    "{cell}: mpc-af rrmse {:.4} worse than baseline {:.4}",
                    af.rrmse_mean, base.rrmse_mean
                ));
            }
        }
    }
    Report { rows, flags }
}

pub fn write_summary(path: &std::path::Path, rep: &Report) -> Result<(), crate::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &rep.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))?;
    Ok(())
}
