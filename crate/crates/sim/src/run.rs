//! Closed-loop simulation of one scenario and seed.

use std::time::Instant;

use pem_core::coordinator::{cycling_report, Coordinator};
use pem_core::fleet::{ChunkExecutor, Device, Fleet, Sequential};
use pem_core::mpc::Controller;
use pem_core::scoring::{pjm_scores, rmae, rrmse, to_scoring_grid, ScoreInputs, ScoreOptions, ScoreReport};
use pem_core::signals::{fit_ar, scale_to_power, ArModel, Series, Unit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, Scenario, SignalKind};
use crate::{derive_seed, io, Error};

const STREAM_FLEET: u64 = 1;
const STREAM_COORDINATOR: u64 = 2;
const STREAM_AR_TRAINING: u64 = 3;

/// Devices per parallel chunk.
const CHUNK: usize = 256;

/// One CSV row per simulation step of the recorded window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    /// Epoch seconds.
    pub t: i64,
    /// Reference, MW.
    pub r: f64,
    /// Input sent to the coordinator, MW.
    pub u: f64,
    /// Fleet power during the step, MW.
    pub y: f64,
    /// Devices on at the start of the step.
    pub x_on: usize,
    pub opt_outs: usize,
    pub accepts: usize,
    pub denies: usize,
    pub solve_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub config_hash: String,
    /// Scored window followed by the scoring tail.
    pub rows: Vec<StepRow>,
    /// PJM scores; `rmae`/`rrmse` are on the simulation grid over the scored window.
    pub score: ScoreReport,
    pub cycles_per_device_hour: f64,
    /// MPC steps whose input fell below the packet-expiry floor.
    pub floor_violations: usize,
    /// MPC steps that fell back to the raw reference.
    pub fallbacks: usize,
    /// Slowest controller step, ms (wall clock).
    pub max_solve_ms: f64,
}

impl RunRecord {
    /// Reference and output over the scored window, MW.
    pub fn scored(&self, steps: usize) -> (Vec<f64>, Vec<f64>) {
        self.rows[..steps].iter().map(|r| (r.r, r.y)).unzip()
    }
}

/// Splits the per-device update across the rayon pool. Devices own their
/// random streams, so results do not depend on the thread count.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl ChunkExecutor for RayonExecutor {
    fn for_each_device(&self, devices: &mut [Device], f: &(dyn Fn(&mut Device) + Sync)) {
        devices
            .par_chunks_mut(CHUNK)
            .for_each(|chunk| chunk.iter_mut().for_each(f));
    }
}

fn pad_to(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    let last = v.last().copied().unwrap_or(0.0);
    v.resize(len.max(v.len()), last);
    v
}

/// Reference in MW covering warm-up, scored window, tail and one horizon of
/// look-ahead. Index `warmup_steps` is the first scored sample.
pub fn build_reference(sc: &Scenario, seed: u64) -> Result<Series, Error> {
    let warm = sc.steps(sc.warmup_s);
    let len = warm + sc.steps(sc.duration_s) + sc.steps(sc.tail_s) + sc.mpc.horizon + 1;
    match sc.signal.kind {
        SignalKind::Synthetic => {
            let start = sc.signal.t0 - sc.warmup_s.round() as i64;
            let s = sc.signal.synth.generate(seed, start, len, sc.dt);
            Ok(scale_to_power(&s, sc.signal.bias_mw, sc.signal.amplitude_mw))
        }
        SignalKind::File => {
            let path = sc
                .signal
                .path
                .as_deref()
                .ok_or_else(|| Error::Config("signal.path missing".into()))?;
            let raw = io::load_series(path, sc.dt)?;
            if (raw.dt() - sc.dt).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "{}: sample period {} s differs from dt = {} s",
                    path.display(),
                    raw.dt(),
                    sc.dt
                )));
            }
            let mw = match raw.unit() {
                Unit::Normalized => scale_to_power(&raw, sc.signal.bias_mw, sc.signal.amplitude_mw),
                Unit::MegaWatt => raw,
            };
            // the file starts at the scored window; warm-up holds its first value
            let first = mw.values()[0];
            let mut values = vec![first; warm];
            values.extend_from_slice(mw.values());
            let t0 = mw.t0() - sc.warmup_s.round() as i64;
            Ok(Series::new(pad_to(values, len), sc.dt, t0, Unit::MegaWatt)?)
        }
    }
}

/// AR model for the reference in MW, fitted on an independent record.
pub fn fit_forecaster(sc: &Scenario, seed: u64) -> Result<ArModel, Error> {
    let training = match &sc.ar.training_path {
        Some(path) => {
            let raw = io::load_series(path, sc.dt)?;
            match raw.unit() {
                Unit::Normalized => scale_to_power(&raw, sc.signal.bias_mw, sc.signal.amplitude_mw),
                Unit::MegaWatt => raw,
            }
        }
        None => {
            let len = sc.steps(sc.ar.training_s);
            let s = sc
                .signal
                .synth
                .generate(derive_seed(seed, STREAM_AR_TRAINING), 0, len, sc.dt);
            scale_to_power(&s, sc.signal.bias_mw, sc.signal.amplitude_mw)
        }
    };
    Ok(fit_ar(&training, sc.ar.order)?)
}

pub fn run_scenario(sc: &Scenario, seed: u64) -> Result<RunRecord, Error> {
    run_scenario_with(sc, seed, &Sequential)
}

pub fn run_scenario_with(sc: &Scenario, seed: u64, exec: &dyn ChunkExecutor) -> Result<RunRecord, Error> {
    sc.validate()?;
    let fail = |step: usize, module: &'static str| {
        move |e: &dyn std::fmt::Display| Error::Run {
            step,
            module,
            msg: e.to_string(),
        }
    };
    let dt = sc.dt;
    let warm = sc.steps(sc.warmup_s);
    let scored = sc.steps(sc.duration_s);
    let recorded = scored + sc.steps(sc.tail_s);
    let reference = build_reference(sc, seed)?;
    let r = reference.values();

    let vb = sc.vb_params();
    let n_p = vb.n_p;
    let p_kw = sc.fleet.device.p_rate_kw;
    let p_mw = p_kw / 1000.0;
    let ar = match sc.method {
        Method::MpcAf => Some(fit_forecaster(sc, seed)?),
        _ => None,
    };
    let mut controller = Controller::new(sc.effective_mpc(), vb, ar).map_err(|e| fail(0, "mpc")(&e))?;
    let mut fleet =
        Fleet::new(&sc.fleet, &sc.packets, dt, derive_seed(seed, STREAM_FLEET)).map_err(|e| fail(0, "fleet")(&e))?;
    let mut coord = Coordinator::new(sc.packets.clone(), dt, p_kw, derive_seed(seed, STREAM_COORDINATOR))
        .map_err(|e| fail(0, "coordinator")(&e))?;

    let mut rows = Vec::with_capacity(recorded);
    let mut start_states = Vec::new();
    let mut end_states = Vec::new();
    let mut floor_violations = 0;
    let mut fallbacks = 0;
    let mut max_solve_ms: f64 = 0.0;

    for k in 0..warm + recorded {
        if k == warm {
            start_states = fleet.states().cloned().collect();
        }
        if k == warm + scored {
            end_states = fleet.states().cloned().collect();
        }
        let observed = fleet.observe(n_p);
        let x_on = fleet.states().filter(|s| s.is_on()).count();
        let (u, solve_ms) = if k < warm {
            (r[k], None)
        } else {
            let t = Instant::now();
            let cs = controller.step(k, r, &observed).map_err(|e| fail(k, "mpc")(&e))?;
            let ms = t.elapsed().as_secs_f64() * 1e3;
            if sc.method.is_mpc() {
                max_solve_ms = max_solve_ms.max(ms);
                fallbacks += cs.fallback as usize;
                if cs.u_mw < p_mw * x_on as f64 - 1e-9 {
                    floor_violations += 1;
                }
            }
            (cs.u_mw, Some(ms))
        };
        let measured = fleet.committed_kw();
        let decisions = coord.decide(fleet.pending_requests(), u * 1000.0, measured);
        let accepts = decisions.iter().filter(|d| d.accepted).count();
        let out = fleet.step_with(&decisions, exec).map_err(|e| fail(k, "fleet")(&e))?;
        if k >= warm {
            rows.push(StepRow {
                t: reference.time_of(k),
                r: r[k],
                u,
                y: out.aggregate_kw / 1000.0,
                x_on,
                opt_outs: out.opt_out_count,
                accepts,
                denies: decisions.len() - accepts,
                solve_ms: solve_ms.filter(|_| sc.record_timing),
            });
        }
    }

    let score = score_rows(sc, &rows, reference.time_of(warm))?;
    let cycles = cycling_report(&start_states, &end_states, sc.duration_s / 3600.0, None).mean_per_hour;
    Ok(RunRecord {
        seed,
        config_hash: io::config_hash(sc),
        rows,
        score,
        cycles_per_device_hour: cycles,
        floor_violations,
        fallbacks,
        max_solve_ms,
    })
}

/// PJM scores on the 10-s grid plus RMAE/RRMSE over the scored window.
pub fn score_rows(sc: &Scenario, rows: &[StepRow], t0: i64) -> Result<ScoreReport, Error> {
    let scored = sc.steps(sc.duration_s);
    let r: Vec<f64> = rows.iter().map(|row| row.r).collect();
    let y: Vec<f64> = rows.iter().map(|row| row.y).collect();
    let grid = |v: Vec<f64>| -> Result<Vec<f64>, Error> {
        Ok(to_scoring_grid(&Series::new(v, sc.dt, t0, Unit::MegaWatt)?)?.into_values())
    };
    let (r_max, r_min) = sc.range();
    let inputs = ScoreInputs::constant(
        grid(r.clone())?,
        grid(y.clone())?,
        sc.scoring.r0_mw,
        sc.scoring.rr10_mw,
        sc.scoring.reg_mw,
        r_max,
        r_min,
    );
    let opts = ScoreOptions {
        pjm_branch_as_printed: sc.scoring.pjm_branch_as_printed,
    };
    let mut report = pjm_scores(&inputs, &opts)?;
    report.rmae = rmae(&[&r[..scored]], &[&y[..scored]], r_max, r_min)?;
    report.rrmse = rrmse(&[&r[..scored]], &[&y[..scored]], r_max, r_min)?;
    Ok(report)
}
