use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Series, SignalError};

/// Sample autocorrelation for lags `0..=max_lag`, biased (1/N) normalization.
pub fn acf(s: &Series, max_lag: usize) -> Result<Vec<f64>, SignalError> {
    acf_values(s.values(), max_lag)
}

pub(crate) fn acf_values(x: &[f64], max_lag: usize) -> Result<Vec<f64>, SignalError> {
    let n = x.len();
    if n <= max_lag {
        return Err(SignalError::TooShort {
            len: n,
            needed: max_lag + 1,
        });
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(SignalError::Constant);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma0: f64 = centered.iter().map(|v| v * v).sum();
    if gamma0 <= 0.0 {
        return Err(SignalError::Constant);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for lag in 1..=max_lag {
        let g: f64 = centered[lag..]
            .iter()
            .zip(&centered[..n - lag])
            .map(|(a, b)| a * b)
            .sum();
        out.push(g / gamma0);
    }
    Ok(out)
}

/// Durbin-Levinson recursion over autocorrelations `rho[0..=order]`.
///
/// Returns the partial autocorrelations `phi_ll` for `l = 1..=order` and the
/// final-order coefficient vector `phi_{order, 1..=order}`.
pub(crate) fn durbin_levinson(rho: &[f64], order: usize) -> Result<(Vec<f64>, Vec<f64>), SignalError> {
    let mut partial = Vec::with_capacity(order);
    let mut phi: Vec<f64> = Vec::with_capacity(order);
    let mut err = 1.0f64;
    for l in 1..=order {
        let num = rho[l] - (1..l).map(|j| phi[j - 1] * rho[l - j]).sum::<f64>();
        if err.abs() < 1e-12 {
            return Err(SignalError::Singular { lag: l });
        }
        let k = num / err;
        let prev = phi.clone();
        for j in 1..l {
            phi[j - 1] = prev[j - 1] - k * prev[l - j - 1];
        }
        phi.push(k);
        partial.push(k);
        err *= 1.0 - k * k;
    }
    Ok((partial, phi))
}

/// Partial autocorrelation for lags `0..=max_lag`; entry 0 is 1 by convention
/// and entry `l` is the last coefficient of the order-`l` Yule-Walker system.
pub fn pacf(s: &Series, max_lag: usize) -> Result<Vec<f64>, SignalError> {
    let rho = acf(s, max_lag)?;
    let (partial, _) = durbin_levinson(&rho, max_lag)?;
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    out.extend(partial);
    Ok(out)
}

/// Calendar grouping for [`variability_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bucket {
    MinuteOfHour,
    HourOfDay,
    DayOfWeek,
    MonthOfYear,
}

impl Bucket {
    pub fn count(self) -> usize {
        match self {
            Bucket::MinuteOfHour => 60,
            Bucket::HourOfDay => 24,
            Bucket::DayOfWeek => 7,
            Bucket::MonthOfYear => 12,
        }
    }

    /// `(instance id, bucket index)` for an epoch time. Samples sharing an
    /// instance id form one contiguous block whose variance is taken.
    fn classify(self, t: i64) -> (i64, usize) {
        match self {
            Bucket::MinuteOfHour => {
                let m = t.div_euclid(60);
                (m, m.rem_euclid(60) as usize)
            }
            Bucket::HourOfDay => {
                let h = t.div_euclid(3600);
                (h, h.rem_euclid(24) as usize)
            }
            Bucket::DayOfWeek => {
                let d = t.div_euclid(86_400);
                // 1970-01-01 was a Thursday; index 0 is Monday.
                (d, (d + 3).rem_euclid(7) as usize)
            }
            Bucket::MonthOfYear => {
                let (y, m) = civil_year_month(t.div_euclid(86_400));
                (y * 12 + m as i64, m as usize - 1)
            }
        }
    }
}

/// Year and month (1-12) of a day count since 1970-01-01 (proleptic Gregorian).
fn civil_year_month(days: i64) -> (i64, u32) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + if m <= 2 { 1 } else { 0 };
    (y, m)
}

/// Mean within-block variance grouped by calendar bucket.
///
/// Each calendar block (one clock minute, hour, day or month) contributes the
/// sample variance of its values; blocks are averaged per bucket index.
/// Every index must be covered by at least one block of two or more samples.
pub fn variability_profile(s: &Series, bucket: Bucket) -> Result<Vec<f64>, SignalError> {
    let n_idx = bucket.count();
    let mut sums = vec![0.0; n_idx];
    let mut counts = vec![0usize; n_idx];

    let mut flush = |block: &[f64], idx: usize| {
        if block.len() < 2 {
            return;
        }
        let m = block.iter().sum::<f64>() / block.len() as f64;
        let var = block.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (block.len() - 1) as f64;
        sums[idx] += var;
        counts[idx] += 1;
    };

    let values = s.values();
    let mut start = 0;
    let (mut cur_id, mut cur_idx) = bucket.classify(s.time_of(0));
    for k in 1..values.len() {
        let (id, idx) = bucket.classify(s.time_of(k));
        if id != cur_id {
            flush(&values[start..k], cur_idx);
            start = k;
            cur_id = id;
            cur_idx = idx;
        }
    }
    flush(&values[start..], cur_idx);

    if let Some(index) = counts.iter().position(|&c| c == 0) {
        return Err(SignalError::SpanTooShort { index });
    }
    Ok(sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect())
}
