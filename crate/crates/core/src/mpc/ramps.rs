use alloc::vec::Vec;

/// One detected down-ramp of the reference, `start..=end` in samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RampSegment {
    pub start: usize,
    pub end: usize,
    /// First sample in the segment where the MPC output is below the reference.
    pub mpc_crossing: Option<usize>,
    pub baseline_stays_above: bool,
    /// Samples after `end` until the baseline output first reaches the reference.
    pub baseline_lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RampReport {
    pub segments: Vec<RampSegment>,
}

impl RampReport {
    pub fn crossings(&self) -> usize {
        self.segments.iter().filter(|s| s.mpc_crossing.is_some()).count()
    }
}

/// Finds runs of at least `min_len` consecutive decrements of `r` steeper
/// than `min_drop` per sample and compares how both outputs follow them.
pub fn down_ramp_anticipation_check(
    r: &[f64],
    y_mpc: &[f64],
    y_base: &[f64],
    min_drop: f64,
    min_len: usize,
) -> RampReport {
    let len = r.len().min(y_mpc.len()).min(y_base.len());
    let mut segments = Vec::new();
    let mut k = 0;
    while k + 1 < len {
        if r[k] - r[k + 1] < min_drop {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < len && r[k] - r[k + 1] >= min_drop {
            k += 1;
        }
        let end = k;
        if end - start >= min_len.max(1) {
            let mpc_crossing = (start..=end).find(|&i| y_mpc[i] < r[i]);
            let baseline_stays_above = (start..=end).all(|i| y_base[i] >= r[i]);
            let baseline_lag = (end..len).find(|&i| y_base[i] <= r[i]).map(|i| i - end);
            segments.push(RampSegment {
                start,
                end,
                mpc_crossing,
                baseline_stays_above,
                baseline_lag,
            });
        }
    }
    RampReport { segments }
}
