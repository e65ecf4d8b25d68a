//! Cartesian sweeps over scenario parameters.

use pem_core::coordinator::RandomizeAt;
use pem_core::mpc::Norm;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, Scenario};
use crate::io::ScoreRow;
use crate::run::{run_scenario, RunRecord};
use crate::Error;

/// One swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "axis", content = "values")]
pub enum Axis {
    /// Mean packet length, minutes.
    PacketMinutes(Vec<f64>),
    /// Width `2 delta_a` of the packet-length distribution, minutes.
    WidthMinutes(Vec<f64>),
    /// MPC horizon, samples.
    Horizon(Vec<usize>),
    Method(Vec<Method>),
    Norm(Vec<Norm>),
    /// Reference delay of the MPC window and the delay precompensator, samples.
    Td(Vec<usize>),
    /// Regulation amplitude, MW.
    AmplitudeMw(Vec<f64>),
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::PacketMinutes(_) => "packet_min",
            Axis::WidthMinutes(_) => "width_min",
            Axis::Horizon(_) => "horizon",
            Axis::Method(_) => "method",
            Axis::Norm(_) => "norm",
            Axis::Td(_) => "t_d",
            Axis::AmplitudeMw(_) => "amplitude_mw",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::PacketMinutes(v) | Axis::WidthMinutes(v) | Axis::AmplitudeMw(v) => v.len(),
            Axis::Horizon(v) | Axis::Td(v) => v.len(),
            Axis::Method(v) => v.len(),
            Axis::Norm(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies value `i` to `sc` and returns its label.
    fn apply(&self, i: usize, sc: &mut Scenario) -> String {
        match self {
            Axis::PacketMinutes(v) => {
                sc.packets.delta_p_s = v[i] * 60.0;
                v[i].to_string()
            }
            Axis::WidthMinutes(v) => {
                sc.packets.delta_a_s = v[i] * 30.0;
                if v[i] > 0.0 && sc.packets.randomize_at == RandomizeAt::None {
                    sc.packets.randomize_at = RandomizeAt::Coordinator;
                }
                v[i].to_string()
            }
            Axis::Horizon(v) => {
                sc.mpc.horizon = v[i];
                v[i].to_string()
            }
            Axis::Method(v) => {
                sc.method = v[i];
                v[i].label().into()
            }
            Axis::Norm(v) => {
                sc.mpc.norm = v[i];
                format!("l{}", v[i].p())
            }
            Axis::Td(v) => {
                sc.mpc.t_d = v[i];
                v[i].to_string()
            }
            Axis::AmplitudeMw(v) => {
                sc.signal.amplitude_mw = v[i];
                v[i].to_string()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub template: Scenario,
    pub axes: Vec<Axis>,
}

impl SweepGrid {
    /// Every axis combination, first axis slowest, with its labels.
    pub fn scenarios(&self) -> Result<Vec<(Vec<String>, Scenario)>, Error> {
        if let Some(a) = self.axes.iter().find(|a| a.is_empty()) {
            return Err(Error::Config(format!("sweep axis {} has no values", a.name())));
        }
        let mut out = vec![(Vec::new(), self.template.clone())];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|(labels, sc)| {
                    (0..axis.len()).map(move |i| {
                        let mut sc = sc.clone();
                        let mut labels = labels.clone();
                        labels.push(axis.apply(i, &mut sc));
                        (labels, sc)
                    })
                })
                .collect();
        }
        for (labels, sc) in &mut out {
            if !labels.is_empty() {
                sc.name = format!("{}[{}]", self.template.name, labels.join(","));
            }
        }
        Ok(out)
    }
}

/// One (combination, seed) run. `result` holds the error text on failure.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub labels: Vec<String>,
    pub scenario: Scenario,
    pub seed: u64,
    pub result: Result<RunRecord, String>,
}

/// Runs every combination and seed in parallel; failures are kept per cell.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepCell>, Error> {
    let jobs: Vec<(Vec<String>, Scenario, u64)> = grid
        .scenarios()?
        .into_iter()
        .flat_map(|(labels, sc)| {
            let seeds = sc.seeds.clone();
            seeds.into_iter().map(move |seed| (labels.clone(), sc.clone(), seed))
        })
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(labels, scenario, seed)| {
            let result = run_scenario(&scenario, seed).map_err(|e| e.to_string());
            SweepCell {
                labels,
                scenario,
                seed,
                result,
            }
        })
        .collect())
}

/// Tidy result table row; axis values are in `key` (`name=value;...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub key: String,
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub packet_s: f64,
    pub randomization_s: f64,
    pub horizon: usize,
    pub precision: Option<f64>,
    pub accuracy: Option<f64>,
    pub delay: Option<f64>,
    pub composite: Option<f64>,
    pub rmae: Option<f64>,
    pub rrmse: Option<f64>,
    pub cycles_per_device_hour: Option<f64>,
    pub floor_violations: Option<usize>,
    pub fallbacks: Option<usize>,
    pub error: Option<String>,
}

pub fn table(grid: &SweepGrid, cells: &[SweepCell]) -> Vec<SweepRow> {
    cells
        .iter()
        .map(|c| {
            let key = grid
                .axes
                .iter()
                .zip(&c.labels)
                .map(|(a, l)| format!("{}={l}", a.name()))
                .collect::<Vec<_>>()
                .join(";");
            let sc = &c.scenario;
            let base = SweepRow {
                key,
                scenario: sc.name.clone(),
                method: sc.method.label().into(),
                seed: c.seed,
                packet_s: sc.packets.delta_p_s,
                randomization_s: sc.packets.delta_a_s,
                horizon: if sc.method.is_mpc() { sc.mpc.horizon } else { 0 },
                precision: None,
                accuracy: None,
                delay: None,
                composite: None,
                rmae: None,
                rrmse: None,
                cycles_per_device_hour: None,
                floor_violations: None,
                fallbacks: None,
                error: None,
            };
            match &c.result {
                Ok(rec) => {
                    let s = ScoreRow::new(sc, rec);
                    SweepRow {
                        precision: Some(s.precision),
                        accuracy: Some(s.accuracy),
                        delay: Some(s.delay),
                        composite: Some(s.composite),
                        rmae: Some(s.rmae),
                        rrmse: Some(s.rrmse),
                        cycles_per_device_hour: Some(s.cycles_per_device_hour),
                        floor_violations: Some(rec.floor_violations),
                        fallbacks: Some(rec.fallbacks),
                        ..base
                    }
                }
                Err(e) => SweepRow {
                    error: Some(e.clone()),
                    ..base
                },
            }
        })
        .collect()
}

pub fn write_table(path: &std::path::Path, rows: &[SweepRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_table(path: &std::path::Path) -> Result<Vec<SweepRow>, Error> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}
