use alloc::vec::Vec;

use super::{assemble, solve_with, Clamp, ForecastMode, MpcConfig, MpcError, SolveStatus};
use crate::signals::{forecast, ArModel};
use crate::vbmodel::{feasible_input_bounds, linearize, output, VbParams, VbState};

/// Diagnostics of one controller step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    /// Input sent to the coordinator, MW.
    pub u_mw: f64,
    /// `u0 + dU[0]` before clamping (equal to `u_mw` for the open-loop modes).
    pub unclamped_mw: f64,
    /// NaN when no optimization ran.
    pub objective: f64,
    pub status: Option<SolveStatus>,
    pub kkt: f64,
    pub iterations: usize,
    /// The optimizer was skipped or failed and the raw reference was used.
    pub fallback: bool,
}

impl ControlStep {
    fn open_loop(u: f64, fallback: bool) -> Self {
        Self {
            u_mw: u,
            unclamped_mw: u,
            objective: f64::NAN,
            status: None,
            kkt: 0.0,
            iterations: 0,
            fallback,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: MpcConfig,
    vb: VbParams,
    ar: Option<ArModel>,
    last_u: Option<f64>,
}

fn at(r: &[f64], idx: isize) -> f64 {
    r[idx.clamp(0, r.len() as isize - 1) as usize]
}

impl Controller {
    pub fn new(cfg: MpcConfig, vb: VbParams, ar: Option<ArModel>) -> Result<Self, MpcError> {
        cfg.validate()?;
        vb.validate()?;
        if cfg.forecast == ForecastMode::Ar && ar.is_none() {
            return Err(MpcError::MissingForecaster);
        }
        Ok(Self {
            cfg,
            vb,
            ar,
            last_u: None,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    /// Reference window `R_j = r[k - t_d + j]`, `j = 0..n`. Entries up to
    /// `r[k]` are realized; later ones come from the forecaster. In AR mode
    /// only `reference[..=k]` is read.
    pub fn reference_window(&self, k: usize, reference: &[f64]) -> Result<Vec<f64>, MpcError> {
        if k >= reference.len() {
            return Err(MpcError::DimensionMismatch {
                what: "reference",
                expected: k + 1,
                got: reference.len(),
            });
        }
        let n = self.cfg.horizon;
        let td = self.cfg.t_d as isize;
        let ahead = n.saturating_sub(self.cfg.t_d + 1);
        let predicted = match (self.cfg.forecast, &self.ar) {
            (ForecastMode::Ar, Some(model)) => {
                let known = &reference[..=k];
                let g = model.order();
                let mut hist: Vec<f64> = Vec::with_capacity(known.len().max(g));
                hist.extend(core::iter::repeat_n(known[0], g.saturating_sub(known.len())));
                hist.extend_from_slice(&known[known.len().saturating_sub(g.max(1))..]);
                forecast(model, &hist, ahead).expect("history padded to model order")
            }
            _ => Vec::new(),
        };
        Ok((0..n as isize)
            .map(|j| {
                let idx = k as isize - td + j;
                if idx <= k as isize || predicted.is_empty() {
                    at(reference, idx)
                } else {
                    predicted[(idx - k as isize - 1) as usize]
                }
            })
            .collect())
    }

    /// Computes `u[k]` from the observed fleet state.
    pub fn step(&mut self, k: usize, reference: &[f64], observed: &VbState) -> Result<ControlStep, MpcError> {
        if k >= reference.len() {
            return Err(MpcError::DimensionMismatch {
                what: "reference",
                expected: k + 1,
                got: reference.len(),
            });
        }
        let step = match self.cfg.forecast {
            ForecastMode::Passthrough => ControlStep::open_loop(reference[k], false),
            ForecastMode::DelayPrecompensator => {
                ControlStep::open_loop(at(reference, k as isize - self.cfg.t_d as isize), false)
            }
            ForecastMode::Perfect | ForecastMode::Ar => self.optimize(k, reference, observed)?,
        };
        self.last_u = Some(step.u_mw);
        Ok(step)
    }

    fn optimize(&mut self, k: usize, reference: &[f64], observed: &VbState) -> Result<ControlStep, MpcError> {
        let (lo, hi) = feasible_input_bounds(observed, &self.vb)?;
        let clamp = |u: f64| match self.cfg.clamp {
            Clamp::Both => u.max(lo).min(hi.max(lo)),
            Clamp::Floor => u.max(lo),
            Clamp::None => u,
        };
        let u0 = self.last_u.unwrap_or_else(|| output(observed, &self.vb));
        let lin = match linearize(observed, u0, &self.vb) {
            Ok(lin) => lin,
            Err(crate::vbmodel::VbError::OutsideDeadband { .. }) => {
                let mut s = ControlStep::open_loop(clamp(reference[k]), true);
                s.unclamped_mw = reference[k];
                return Ok(s);
            }
            Err(e) => return Err(e.into()),
        };
        let window = self.reference_window(k, reference)?;
        let prob = assemble(&lin, &window, self.cfg.horizon)?;
        let slack = Some(self.cfg.slack_penalty).filter(|w| *w > 0.0);
        let sol = solve_with(&prob, self.cfg.norm, slack, self.cfg.max_iter)?;
        if sol.status != SolveStatus::Optimal {
            let mut s = ControlStep::open_loop(clamp(reference[k]), true);
            s.unclamped_mw = reference[k];
            s.status = Some(sol.status);
            s.iterations = sol.iterations;
            return Ok(s);
        }
        let raw = u0 + sol.du[0];
        Ok(ControlStep {
            u_mw: clamp(raw),
            unclamped_mw: raw,
            objective: sol.objective,
            status: Some(sol.status),
            kkt: sol.kkt.max(),
            iterations: sol.iterations,
            fallback: false,
        })
    }
}
