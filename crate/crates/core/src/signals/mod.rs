//! AGC reference signals: the [`Series`] container, scaling to fleet power,
//! sample statistics, AR(g) forecasting and a synthetic Reg-D stand-in.

mod ar;
mod stats;
mod synth;

pub use ar::{fit_ar, forecast, forecast_with_bands, ArModel, Forecast};
pub use stats::{acf, pacf, variability_profile, Bucket};
pub use synth::RegDSynth;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Default AGC sample period in seconds (PJM Reg-D cadence).
pub const REG_D_DT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("series is empty")]
    Empty,
    #[error("sample period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("series is constant (zero variance)")]
    Constant,
    #[error("series of length {len} is too short for lag/order {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("Toeplitz system is singular at lag {lag}")]
    Singular { lag: usize },
    #[error("fitted AR polynomial is not stationary: roots {roots:?} lie on or inside the unit circle")]
    NonStationary { roots: Vec<(f64, f64)> },
    #[error("forecast needs at least {needed} history samples, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("series spans too little time: no samples for bucket index {index}")]
    SpanTooShort { index: usize },
}

/// Physical unit of a [`Series`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Regulation signal normalized to [-1, 1].
    #[default]
    Normalized,
    #[serde(rename = "mw")]
    MegaWatt,
}

/// Uniformly sampled time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    values: Vec<f64>,
    /// Seconds per sample.
    dt: f64,
    /// Epoch seconds of the first sample.
    t0: i64,
    unit: Unit,
}

impl Series {
    pub fn new(values: Vec<f64>, dt: f64, t0: i64, unit: Unit) -> Result<Self, SignalError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SignalError::BadPeriod(dt));
        }
        if values.is_empty() {
            return Err(SignalError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        Ok(Self { values, dt, t0, unit })
    }

    pub fn normalized(values: Vec<f64>, dt: f64) -> Result<Self, SignalError> {
        Self::new(values, dt, 0, Unit::Normalized)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Epoch seconds of sample `k`, floored to whole seconds.
    pub fn time_of(&self, k: usize) -> i64 {
        self.t0 + (k as f64 * self.dt).floor() as i64
    }

    /// Sub-series `[start, end)` with the start time shifted accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Result<Series, SignalError> {
        let end = end.min(self.values.len());
        if start >= end {
            return Err(SignalError::Empty);
        }
        Ok(Series {
            values: self.values[start..end].to_vec(),
            dt: self.dt,
            t0: self.time_of(start),
            unit: self.unit,
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Maps a normalized regulation signal onto fleet power: `bias + amplitude * s`.
///
/// The input is read as normalized regardless of its declared unit; the
/// output is always in MW.
pub fn scale_to_power(s: &Series, bias_mw: f64, amplitude_mw: f64) -> Series {
    Series {
        values: s.values.iter().map(|v| bias_mw + amplitude_mw * v).collect(),
        dt: s.dt,
        t0: s.t0,
        unit: Unit::MegaWatt,
    }
}
