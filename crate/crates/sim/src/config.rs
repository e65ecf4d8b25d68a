//! Scenario files (TOML, schema version 1).

use std::path::{Path, PathBuf};

use pem_core::coordinator::PacketPolicy;
use pem_core::fleet::FleetConfig;
use pem_core::mpc::{ForecastMode, MpcConfig};
use pem_core::signals::RegDSynth;
use pem_core::vbmodel::VbParams;
use serde::{Deserialize, Serialize};

use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Reference passed straight to the coordinator.
    #[default]
    Baseline,
    /// Reference delayed by `mpc.t_d` samples.
    Delay,
    /// MPC with the true future reference.
    MpcPf,
    /// MPC with an AR forecast.
    MpcAf,
}

impl Method {
    pub fn forecast_mode(self) -> ForecastMode {
        match self {
            Method::Baseline => ForecastMode::Passthrough,
            Method::Delay => ForecastMode::DelayPrecompensator,
            Method::MpcPf => ForecastMode::Perfect,
            Method::MpcAf => ForecastMode::Ar,
        }
    }

    pub fn is_mpc(self) -> bool {
        matches!(self, Method::MpcPf | Method::MpcAf)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Delay => "delay",
            Method::MpcPf => "mpc-pf",
            Method::MpcAf => "mpc-af",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    #[default]
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSpec {
    pub kind: SignalKind,
    /// CSV with a `value` column (and optionally `t`), for `kind = "file"`.
    pub path: Option<PathBuf>,
    pub synth: RegDSynth,
    pub bias_mw: f64,
    pub amplitude_mw: f64,
    /// Epoch seconds of the first scored sample for synthetic signals.
    pub t0: i64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            kind: SignalKind::Synthetic,
            path: None,
            synth: RegDSynth::default(),
            bias_mw: 3.7,
            amplitude_mw: 1.0,
            // 2019-01-07 00:00 UTC
            t0: 1_546_819_200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArSpec {
    pub order: usize,
    /// Length of the synthetic training record, s.
    pub training_s: f64,
    /// Optional recorded training signal; otherwise a synthetic record with
    /// an independent seed is used.
    pub training_path: Option<PathBuf>,
}

impl Default for ArSpec {
    fn default() -> Self {
        Self {
            order: 3,
            training_s: 6.0 * 3600.0,
            training_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSpec {
    /// Economic basepoint, MW.
    pub r0_mw: f64,
    /// Ramp limit per 10-s step, MW.
    pub rr10_mw: f64,
    /// TREG = AREG, MW.
    pub reg_mw: f64,
    pub pjm_branch_as_printed: bool,
}

impl Default for ScoringSpec {
    fn default() -> Self {
        Self {
            r0_mw: 3.7,
            rr10_mw: 0.25,
            reg_mw: 1.0,
            pjm_branch_as_printed: false,
        }
    }
}

/// Optional overrides of the VB parameters derived from the fleet.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VbOverrides {
    pub a1: Option<f64>,
    pub a2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub method: Method,
    pub dt: f64,
    /// Scored duration, s.
    pub duration_s: f64,
    /// Extra reference/output after the scored hour so every PJM window is full, s.
    pub tail_s: f64,
    /// Passthrough operation before the scored window, s.
    pub warmup_s: f64,
    pub seeds: Vec<u64>,
    /// Fill the `solve_ms` column (wall-clock, so not reproducible).
    pub record_timing: bool,
    pub fleet: FleetConfig,
    pub packets: PacketPolicy,
    pub vb: VbOverrides,
    pub mpc: MpcConfig,
    pub ar: ArSpec,
    pub signal: SignalSpec,
    pub scoring: ScoringSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: "default".into(),
            method: Method::Baseline,
            dt: 2.0,
            duration_s: 3600.0,
            tail_s: 2400.0,
            warmup_s: 3600.0,
            seeds: vec![1],
            record_timing: false,
            fleet: FleetConfig::default(),
            packets: PacketPolicy::default(),
            vb: VbOverrides::default(),
            mpc: MpcConfig::default(),
            ar: ArSpec::default(),
            signal: SignalSpec::default(),
            scoring: ScoringSpec::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut sc = Self::from_toml(&text)?;
        // relative signal paths are resolved against the config file
        if let Some(dir) = path.parent() {
            for p in [&mut sc.signal.path, &mut sc.ar.training_path].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if !(self.dt > 0.0) || ((10.0 / self.dt) - (10.0 / self.dt).round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "dt = {} s must divide the 10 s scoring step",
                self.dt
            )));
        }
        if self.duration_s < 3600.0 {
            return Err(Error::Config("duration_s must cover at least one scored hour".into()));
        }
        let needed_tail = (pem_core::scoring::PJM_REQUIRED_SAMPLES - pem_core::scoring::PJM_SAMPLES) as f64 * 10.0;
        if self.tail_s < needed_tail {
            return Err(Error::Config(format!(
                "tail_s = {} s is shorter than the {needed_tail} s of PJM look-ahead",
                self.tail_s
            )));
        }
        if self.signal.kind == SignalKind::File && self.signal.path.is_none() {
            return Err(Error::Config("signal.kind = \"file\" needs signal.path".into()));
        }
        self.packets
            .validate(self.dt)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.effective_mpc()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.fleet.device.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// MPC block with the forecast mode implied by `method`.
    pub fn effective_mpc(&self) -> MpcConfig {
        MpcConfig {
            forecast: self.method.forecast_mode(),
            ..self.mpc.clone()
        }
    }

    pub fn vb_params(&self) -> VbParams {
        let mut vb = VbParams::from_fleet(&self.fleet, self.packets.nominal_steps(self.dt) as usize, self.dt);
        if let Some(a1) = self.vb.a1 {
            vb.a1 = a1;
        }
        if let Some(a2) = self.vb.a2 {
            vb.a2 = a2;
        }
        vb
    }

    pub fn steps(&self, seconds: f64) -> usize {
        (seconds / self.dt).round() as usize
    }

    /// Regulation range `bias ± reg_mw` used to normalize RMAE/RRMSE.
    pub fn range(&self) -> (f64, f64) {
        let b = self.signal.bias_mw;
        let a = self.scoring.reg_mw.abs();
        (b + a, b - a)
    }
}
