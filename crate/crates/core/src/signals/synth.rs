use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ArModel, Series, Unit};

/// Synthetic Reg-D-like generator used when recorded signals are absent.
///
/// An AR(3) process built from a lightly damped oscillatory pole pair and one
/// real smoothing pole, with innovation variance boosted during the first
/// minutes of each clock hour and the output clipped to [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegDSynth {
    /// Radius of the complex pole pair.
    pub pole_radius: f64,
    /// Oscillation period of the complex pair, in samples.
    pub period_samples: f64,
    /// Real pole.
    pub real_pole: f64,
    /// Target marginal standard deviation before clipping.
    pub marginal_std: f64,
    /// Relative innovation boost at minute 0 of each hour.
    pub hour_start_gain: f64,
    /// Decay of that boost, in minutes.
    pub hour_start_minutes: f64,
    pub burn_in: usize,
}

impl Default for RegDSynth {
    fn default() -> Self {
        Self {
            pole_radius: 0.996,
            period_samples: 150.0,
            real_pole: 0.5,
            marginal_std: 0.5,
            hour_start_gain: 0.6,
            hour_start_minutes: 4.0,
            burn_in: 3000,
        }
    }
}

impl RegDSynth {
    /// AR coefficients of `(1 - p L)(1 - 2 r cos(w) L + r^2 L^2)`.
    pub fn phi(&self) -> [f64; 3] {
        let r = self.pole_radius;
        let c = (2.0 * PI / self.period_samples).cos();
        let p = self.real_pole;
        [2.0 * r * c + p, -(r * r + 2.0 * r * c * p), p * r * r]
    }

    /// Innovation standard deviation giving `marginal_std` without modulation.
    pub fn innovation_std(&self) -> f64 {
        let model = ArModel {
            phi: self.phi().to_vec(),
            mu: 0.0,
            sigma2: 1.0,
        };
        let gain: f64 = model.psi_weights(20_000).iter().map(|p| p * p).sum();
        self.marginal_std / gain.sqrt()
    }

    fn modulation(&self, t: i64) -> f64 {
        let minute = t.rem_euclid(3600) as f64 / 60.0;
        1.0 + self.hour_start_gain * (-minute / self.hour_start_minutes).exp()
    }

    /// Generates `len` normalized samples starting at epoch `t0`.
    pub fn generate(&self, seed: u64, t0: i64, len: usize, dt: f64) -> Series {
        let phi = self.phi();
        let sigma = self.innovation_std();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hist = [0.0f64; 3];
        let mut out = Vec::with_capacity(len);
        let total = self.burn_in + len;
        for i in 0..total {
            let t = t0 + ((i as f64 - self.burn_in as f64) * dt).floor() as i64;
            let a: f64 = rng.sample(StandardNormal);
            let next = phi[0] * hist[0] + phi[1] * hist[1] + phi[2] * hist[2] + sigma * self.modulation(t) * a;
            hist = [next, hist[0], hist[1]];
            if i >= self.burn_in {
                out.push(next.clamp(-1.0, 1.0));
            }
        }
        Series::new(out, dt, t0, Unit::Normalized).expect("generator output is finite and nonempty")
    }
}
