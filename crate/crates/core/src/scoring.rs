//! Tracking metrics and PJM regulation performance scores.
//!
//! The PJM scores are computed on a 10-s grid over 360 samples (one hour).
//! Windows look ahead up to 239 samples, so inputs must hold at least
//! [`PJM_REQUIRED_SAMPLES`] samples.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::signals::Series;

/// Scoring grid period, s.
pub const SCORING_DT: f64 = 10.0;
/// Scored samples per hour.
pub const PJM_SAMPLES: usize = 360;
/// Window of the |UREG| normalizer.
const UREG_WINDOW: usize = 240;
/// Correlation window is `CORR_LEN` samples, delays `0..=MAX_DELAY`.
const CORR_LEN: usize = 31;
const MAX_DELAY: usize = 30;
/// Flat-reference test window, samples `k..=k+60`.
const FLAT_WINDOW: usize = 60;
/// `sum_{j=0}^{30} (j - 15)^2`.
const SLOPE_NORM: f64 = 2480.0;
/// Samples needed to score [`PJM_SAMPLES`] without truncating any window.
pub const PJM_REQUIRED_SAMPLES: usize = PJM_SAMPLES + UREG_WINDOW - 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} scoring samples, got {got}; pad the run with a reference/output tail")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("r_max equals r_min; the range normalization is undefined")]
    ZeroRange,
    #[error("sample period {0} s does not divide the 10 s scoring step")]
    BadPeriod(f64),
    #[error("no series given")]
    Empty,
}

fn check_range(r_max: f64, r_min: f64) -> Result<f64, ScoreError> {
    let range = r_max - r_min;
    if range == 0.0 || !range.is_finite() {
        return Err(ScoreError::ZeroRange);
    }
    Ok(range)
}

fn paired<'a>(
    refs: &'a [&'a [f64]],
    outs: &'a [&'a [f64]],
) -> Result<impl Iterator<Item = (&'a [f64], &'a [f64])>, ScoreError> {
    if refs.is_empty() {
        return Err(ScoreError::Empty);
    }
    if refs.len() != outs.len() {
        return Err(ScoreError::LengthMismatch(refs.len(), outs.len()));
    }
    for (r, y) in refs.iter().zip(outs) {
        if r.len() != y.len() {
            return Err(ScoreError::LengthMismatch(r.len(), y.len()));
        }
        if r.is_empty() {
            return Err(ScoreError::Empty);
        }
    }
    Ok(refs.iter().copied().zip(outs.iter().copied()))
}

/// Relative mean absolute error averaged over signals.
pub fn rmae(refs: &[&[f64]], outs: &[&[f64]], r_max: f64, r_min: f64) -> Result<f64, ScoreError> {
    let range = check_range(r_max, r_min)?;
    let n = refs.len() as f64;
    Ok(paired(refs, outs)?
        .map(|(r, y)| r.iter().zip(y).map(|(r, y)| (y - r).abs()).sum::<f64>() / (r.len() as f64 * range))
        .sum::<f64>()
        / n)
}

/// Relative root-mean-square error averaged over signals.
pub fn rrmse(refs: &[&[f64]], outs: &[&[f64]], r_max: f64, r_min: f64) -> Result<f64, ScoreError> {
    let range = check_range(r_max, r_min)?;
    let n = refs.len() as f64;
    Ok(paired(refs, outs)?
        .map(|(r, y)| {
            let ms = r.iter().zip(y).map(|(r, y)| (y - r) * (y - r)).sum::<f64>() / r.len() as f64;
            ms.sqrt() / range
        })
        .sum::<f64>()
        / n)
}

/// Ramp-limited economic basepoint: follows `r0` while the step is below
/// `rr10`, otherwise moves by `rr10` toward it.
pub fn ramp_limited_basepoint(r0: &[f64], rr10: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(r0.len());
    for (k, &target) in r0.iter().enumerate() {
        if k == 0 {
            out.push(target);
            continue;
        }
        let prev = out[k - 1];
        let step = target - prev;
        out.push(if step.abs() < rr10 {
            target
        } else {
            prev + step.signum() * rr10
        });
    }
    out
}

/// Block means over `10 / dt` samples; a trailing partial block is dropped.
pub fn to_scoring_grid(s: &Series) -> Result<Series, ScoreError> {
    let ratio = SCORING_DT / s.dt();
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 {
        return Err(ScoreError::BadPeriod(s.dt()));
    }
    let f = factor as usize;
    let values: Vec<f64> = s
        .values()
        .chunks_exact(f)
        .map(|c| c.iter().sum::<f64>() / f as f64)
        .collect();
    Series::new(values, SCORING_DT, s.t0(), s.unit()).map_err(|_| ScoreError::InsufficientSamples {
        needed: f,
        got: s.len(),
    })
}

/// Inputs on the 10-s scoring grid, MW.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInputs {
    pub r: Vec<f64>,
    pub y: Vec<f64>,
    /// Economic basepoint.
    pub r0: Vec<f64>,
    /// Ramp limit per scoring step.
    pub rr10: f64,
    pub treg: Vec<f64>,
    pub areg: Vec<f64>,
    pub r_max: f64,
    pub r_min: f64,
}

impl ScoreInputs {
    /// Constant basepoint and capacities.
    pub fn constant(r: Vec<f64>, y: Vec<f64>, r0: f64, rr10: f64, reg_mw: f64, r_max: f64, r_min: f64) -> Self {
        let n = r.len();
        Self {
            r,
            y,
            r0: vec![r0; n],
            rr10,
            treg: vec![reg_mw; n],
            areg: vec![reg_mw; n],
            r_max,
            r_min,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreOptions {
    /// Use the published accuracy branches literally (zero whenever TREG is
    /// nonzero) instead of the reading consistent with the precision score.
    pub pjm_branch_as_printed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub accuracy: f64,
    pub delay: f64,
    pub composite: f64,
    pub rmae: f64,
    pub rrmse: f64,
}

/// Per-sample intermediate values, exposed for audits and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrace {
    pub p_prec: Vec<f64>,
    pub p_acc: Vec<f64>,
    pub p_del: Vec<f64>,
    /// Selected delay `n[k]`.
    pub delay_index: Vec<usize>,
}

/// `min(1 - (m - 1) / 30, 1)`.
pub fn delay_weight(m: usize) -> f64 {
    (1.0 - (m as f64 - 1.0) / 30.0).min(1.0)
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn pjm_scores(inp: &ScoreInputs, opts: &ScoreOptions) -> Result<ScoreReport, ScoreError> {
    pjm_scores_traced(inp, opts).map(|(r, _)| r)
}

pub fn pjm_scores_traced(inp: &ScoreInputs, opts: &ScoreOptions) -> Result<(ScoreReport, ScoreTrace), ScoreError> {
    let len = inp.r.len();
    for other in [inp.y.len(), inp.r0.len(), inp.treg.len(), inp.areg.len()] {
        if other != len {
            return Err(ScoreError::LengthMismatch(len, other));
        }
    }
    if len < PJM_REQUIRED_SAMPLES {
        return Err(ScoreError::InsufficientSamples {
            needed: PJM_REQUIRED_SAMPLES,
            got: len,
        });
    }
    let range = check_range(inp.r_max, inp.r_min)?;
    let printed = opts.pjm_branch_as_printed;

    let r0_bar = ramp_limited_basepoint(&inp.r0, inp.rr10);
    let r_hat: Vec<f64> = (0..len).map(|k| 2.0 * (inp.r[k] - inp.r0[k]) / range).collect();
    let ures: Vec<f64> = (0..len).map(|k| inp.y[k] - r0_bar[k]).collect();
    let ureg: Vec<f64> = (0..len)
        .map(|k| {
            if inp.treg[k] != 0.0 {
                inp.areg[k] / inp.treg[k] * r_hat[k]
            } else {
                0.0
            }
        })
        .collect();
    let x: Vec<f64> = (0..len)
        .map(|k| {
            let zero = if printed {
                inp.treg[k] != 0.0
            } else {
                inp.treg[k] == 0.0
            };
            if zero {
                0.0
            } else {
                (r_hat[k] / inp.treg[k]).clamp(-1.0, 1.0)
            }
        })
        .collect();

    let mut trace = ScoreTrace {
        p_prec: Vec::with_capacity(PJM_SAMPLES),
        p_acc: Vec::with_capacity(PJM_SAMPLES),
        p_del: Vec::with_capacity(PJM_SAMPLES),
        delay_index: Vec::with_capacity(PJM_SAMPLES),
    };
    for k in 0..PJM_SAMPLES {
        let areg_ok = inp.areg[k..=k + MAX_DELAY].iter().all(|&a| a != 0.0);
        let window = &inp.r[k..=k + FLAT_WINDOW];
        let flat = window.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            == window.iter().copied().fold(f64::INFINITY, f64::min);

        // precision
        let p_prec = if inp.treg[k] == 0.0 || flat || !areg_ok {
            0.0
        } else {
            let ureg_bar = ureg[k..k + UREG_WINDOW].iter().map(|v| v.abs()).sum::<f64>() / UREG_WINDOW as f64;
            if ureg_bar == 0.0 {
                0.0
            } else {
                (1.0 - (ures[k] - ureg[k]).abs() / ureg_bar).clamp(0.0, 1.0)
            }
        };

        // accuracy and delay
        let (n_k, p_hat_acc) = accuracy_at(k, &ureg, &ures, &x);
        let acc_zero = if printed {
            inp.treg[k] != 0.0
        } else {
            inp.treg[k] == 0.0
        };
        let p_hat_acc = if flat { 0.0 } else { p_hat_acc };
        let p_acc = if acc_zero || !areg_ok { 0.0 } else { p_hat_acc };
        let p_del = if !areg_ok || p_hat_acc == 0.0 {
            0.0
        } else {
            delay_weight(n_k)
        };

        trace.p_prec.push(p_prec);
        trace.p_acc.push(p_acc);
        trace.p_del.push(p_del);
        trace.delay_index.push(n_k);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let precision = mean(&trace.p_prec);
    let accuracy = mean(&trace.p_acc);
    let delay = mean(&trace.p_del);
    let r = &inp.r[..PJM_SAMPLES];
    let y = &inp.y[..PJM_SAMPLES];
    let report = ScoreReport {
        precision,
        accuracy,
        delay,
        composite: (precision + accuracy + delay) / 3.0,
        rmae: rmae(&[r], &[y], inp.r_max, inp.r_min)?,
        rrmse: rrmse(&[r], &[y], inp.r_max, inp.r_min)?,
    };
    Ok((report, trace))
}

/// Window statistics for the correlation/slope branch selection.
fn window_mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `(n[k], clamp(rho~[n[k], k], 0, 1))`.
fn accuracy_at(k: usize, ureg: &[f64], ures: &[f64], x: &[f64]) -> (usize, f64) {
    let xs = &x[k..k + CORR_LEN];
    let x_bar = window_mean(xs);
    let x_hat = (xs.iter().map(|v| (v - x_bar) * (v - x_bar)).sum::<f64>()).sqrt() / (30.0f64).sqrt();
    let use_corr = x_hat >= 0.05;

    let v1_src = &ureg[k..k + CORR_LEN];
    let v1_bar = window_mean(v1_src);
    let s11: f64 = v1_src.iter().map(|v| (v - v1_bar) * (v - v1_bar)).sum();
    // time index deviations k + j - k_bar are j - 15
    let mu_tilde = xs
        .iter()
        .enumerate()
        .map(|(j, v)| (j as f64 - 15.0) * (v - x_bar))
        .sum::<f64>()
        / SLOPE_NORM;

    let mut best = (0usize, f64::NEG_INFINITY, 0.0f64);
    for m in 0..=MAX_DELAY {
        let v2_src = &ures[k + m..k + m + CORR_LEN];
        let v2_bar = window_mean(v2_src);
        let rho_t = if use_corr {
            let mut s12 = 0.0;
            let mut s22 = 0.0;
            for j in 0..CORR_LEN {
                let a = v1_src[j] - v1_bar;
                let b = v2_src[j] - v2_bar;
                s12 += a * b;
                s22 += b * b;
            }
            ratio_or_zero(s12, (s11 * s22).sqrt())
        } else {
            let mu_hat = v2_src
                .iter()
                .enumerate()
                .map(|(j, v)| (j as f64 - 15.0) * (v - v2_bar))
                .sum::<f64>()
                / SLOPE_NORM;
            1.0 - (mu_tilde - mu_hat).abs()
        };
        let clamped = rho_t.clamp(0.0, 1.0);
        let objective = clamped / 3.0 + delay_weight(m) / 3.0;
        if objective > best.1 {
            best = (m, objective, clamped);
        }
    }
    (best.0, best.2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_offset_of_one_range_is_unit_error() {
        let r = [0.0, 1.0, 2.0];
        let y = [2.0, 3.0, 4.0];
        assert_eq!(rmae(&[&r], &[&y], 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(rrmse(&[&r], &[&y], 2.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_range_is_rejected() {
        assert_eq!(rmae(&[&[1.0]], &[&[1.0]], 1.0, 1.0), Err(ScoreError::ZeroRange));
    }

    #[test]
    fn grid_block_means() {
        let s = Series::normalized(vec![0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0, 10.0], 2.0).unwrap();
        assert_eq!(to_scoring_grid(&s).unwrap().values(), &[0.0, 10.0]);
        let ramp = Series::normalized((1..=10).map(f64::from).collect(), 2.0).unwrap();
        assert_eq!(to_scoring_grid(&ramp).unwrap().values(), &[3.0, 8.0]);
        let bad = Series::normalized(vec![0.0; 10], 3.0).unwrap();
        assert_eq!(to_scoring_grid(&bad), Err(ScoreError::BadPeriod(3.0)));
    }

    #[test]
    fn ramp_reaches_step_in_three_samples() {
        let out = ramp_limited_basepoint(&[0.0, 3.0, 3.0, 3.0, 3.0], 1.0);
        assert_eq!(out, vec![0.0, 1.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn delay_weights() {
        assert_eq!(delay_weight(0), 1.0);
        assert_eq!(delay_weight(1), 1.0);
        assert_eq!(delay_weight(3), 1.0 - 2.0 / 30.0);
    }
}
