//! Receding-horizon precompensator between the AGC reference and the
//! packet coordinator, with its own dense QP (p = 2) and LP (p = 1) solvers.

mod assemble;
mod controller;
mod lp;
mod qp;
mod ramps;
mod solve;

pub use assemble::{assemble, MpcProblem};
pub use controller::{ControlStep, Controller};
pub use ramps::{down_ramp_anticipation_check, RampReport, RampSegment};
pub use solve::{solve, solve_with, Kkt, Solution, SolveStatus};

use serde::{Deserialize, Serialize};

use crate::vbmodel::VbError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MpcError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("output map is singular (C B = {0})")]
    SingularOutputMap(f64),
    #[error("AR forecast mode needs a fitted model")]
    MissingForecaster,
    #[error(transparent)]
    Model(#[from] VbError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    #[default]
    L2,
}

impl Norm {
    pub fn p(self) -> u32 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ForecastMode {
    #[default]
    Perfect,
    Ar,
    DelayPrecompensator,
    Passthrough,
}

/// Which side of the feasible input band the controller clamps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Clamp {
    #[default]
    Both,
    Floor,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// Horizon in samples.
    pub horizon: usize,
    pub norm: Norm,
    /// Reference delay in samples; the first `t_d + 1` window entries are known.
    pub t_d: usize,
    pub forecast: ForecastMode,
    /// Penalty on the down-ramp slack, per MW; zero keeps the rows hard.
    pub slack_penalty: f64,
    pub clamp: Clamp,
    pub max_iter: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 150,
            norm: Norm::L2,
            t_d: 0,
            forecast: ForecastMode::Perfect,
            // 10^4 times the 2 MW regulation range
            slack_penalty: 2.0e4,
            clamp: Clamp::Both,
            max_iter: 10_000,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        let needs_horizon = matches!(self.forecast, ForecastMode::Perfect | ForecastMode::Ar);
        if needs_horizon && self.horizon <= self.t_d {
            return Err(MpcError::InvalidConfig("horizon must exceed t_d"));
        }
        if !(self.slack_penalty >= 0.0) {
            return Err(MpcError::InvalidConfig("slack penalty must be non-negative"));
        }
        Ok(())
    }
}
