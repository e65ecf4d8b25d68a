//! Packet coordinator: greedy admission of device requests against a power
//! reference, packet-length randomization and cycling statistics.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fleet::DeviceState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("packet length {delta_p_s} s must be a positive multiple of the step {dt} s")]
    OffGrid { delta_p_s: f64, dt: f64 },
    #[error("randomization half-width {delta_a_s} s must satisfy 0 <= delta_a < delta_p = {delta_p_s} s")]
    BadHalfWidth { delta_a_s: f64, delta_p_s: f64 },
}

/// Where packet lengths are randomized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RandomizeAt {
    /// Every packet has the nominal length.
    #[default]
    None,
    /// The coordinator draws a length for each accepted request.
    Coordinator,
    /// Devices attach a length to each request.
    Device,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacketPolicy {
    /// Nominal packet length, s.
    pub delta_p_s: f64,
    /// Half-width of the uniform length distribution, s.
    pub delta_a_s: f64,
    pub randomize_at: RandomizeAt,
    /// Device-side only: when nonzero each device pregenerates this many
    /// lengths and cycles through them.
    pub string_len: usize,
}

impl Default for PacketPolicy {
    fn default() -> Self {
        Self {
            delta_p_s: 300.0,
            delta_a_s: 0.0,
            randomize_at: RandomizeAt::None,
            string_len: 0,
        }
    }
}

impl PacketPolicy {
    pub fn fixed(delta_p_s: f64) -> Self {
        Self {
            delta_p_s,
            ..Self::default()
        }
    }

    pub fn randomized(delta_p_s: f64, delta_a_s: f64, at: RandomizeAt) -> Self {
        Self {
            delta_p_s,
            delta_a_s,
            randomize_at: at,
            string_len: 0,
        }
    }

    pub fn validate(&self, dt: f64) -> Result<(), PolicyError> {
        let steps = self.delta_p_s / dt;
        if !(steps >= 1.0 - 1e-9) || (steps - steps.round()).abs() > 1e-9 {
            return Err(PolicyError::OffGrid {
                delta_p_s: self.delta_p_s,
                dt,
            });
        }
        if !(self.delta_a_s >= 0.0 && self.delta_a_s < self.delta_p_s) {
            return Err(PolicyError::BadHalfWidth {
                delta_a_s: self.delta_a_s,
                delta_p_s: self.delta_p_s,
            });
        }
        Ok(())
    }

    pub fn nominal_steps(&self, dt: f64) -> u32 {
        (self.delta_p_s / dt).round() as u32
    }

    /// Inclusive range of packet lengths in steps. Lengths live on the step
    /// grid, so the continuous interval is shrunk to the grid points inside it.
    pub fn support_steps(&self, dt: f64) -> (u32, u32) {
        if self.randomize_at == RandomizeAt::None || self.delta_a_s == 0.0 {
            let n = self.nominal_steps(dt);
            return (n, n);
        }
        let lo = ((self.delta_p_s - self.delta_a_s) / dt - 1e-9).ceil().max(1.0) as u32;
        let hi = ((self.delta_p_s + self.delta_a_s) / dt + 1e-9).floor() as u32;
        (lo, hi.max(lo))
    }

    /// Draws a packet length in steps, uniformly over [`Self::support_steps`].
    pub fn draw_packet_steps<R: RngCore + ?Sized>(&self, dt: f64, rng: &mut R) -> u32 {
        let (lo, hi) = self.support_steps(dt);
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }

    /// Draws a packet length in seconds.
    pub fn draw_packet_length<R: RngCore + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        self.draw_packet_steps(dt, rng) as f64 * dt
    }
}

/// A device asking for a packet; device-side randomization attaches a length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub device: usize,
    pub packet_steps: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub device: usize,
    pub accepted: bool,
    /// Granted length in steps; meaningful only when accepted.
    pub packet_steps: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoordinatorState {
    /// Power locked in by coordinator-accepted packets still running, kW.
    pub locked_kw: f64,
    /// `expiring[i]` is the power whose packets end after `i` more steps.
    expiring: VecDeque<f64>,
    pub accept_count: u64,
    pub deny_count: u64,
    /// Steps in which every request was accepted and the reference was still
    /// more than one device's power away.
    pub request_shortfalls: u64,
}

#[derive(Debug, Clone)]
pub struct Coordinator {
    policy: PacketPolicy,
    dt: f64,
    p_rate_kw: f64,
    state: CoordinatorState,
    rng: ChaCha8Rng,
}

impl Coordinator {
    pub fn new(policy: PacketPolicy, dt: f64, p_rate_kw: f64, seed: u64) -> Result<Self, PolicyError> {
        policy.validate(dt)?;
        Ok(Self {
            policy,
            dt,
            p_rate_kw,
            state: CoordinatorState::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn policy(&self) -> &PacketPolicy {
        &self.policy
    }

    pub fn state(&self) -> &CoordinatorState {
        &self.state
    }

    /// Processes one step of requests in random order, accepting while
    /// `measured + accepted * p_rate <= reference`.
    pub fn decide(&mut self, requests: &[Request], reference_kw: f64, measured_kw: f64) -> Vec<Decision> {
        let mut order: Vec<usize> = (0..requests.len()).collect();
        // Fisher-Yates
        for i in (1..order.len()).rev() {
            let j = self.rng.random_range(0..=i);
            order.swap(i, j);
        }
        let tol = 1e-9 * reference_kw.abs().max(1.0);
        let mut projected = measured_kw;
        let mut decisions = Vec::with_capacity(requests.len());
        for idx in order {
            let req = requests[idx];
            let accept = projected + self.p_rate_kw <= reference_kw + tol;
            let packet_steps = if !accept {
                0
            } else {
                match (self.policy.randomize_at, req.packet_steps) {
                    (RandomizeAt::Device, Some(len)) => len,
                    (RandomizeAt::Coordinator, _) => self.policy.draw_packet_steps(self.dt, &mut self.rng),
                    _ => self.policy.nominal_steps(self.dt),
                }
            };
            if accept {
                projected += self.p_rate_kw;
                self.lock(packet_steps);
                self.state.accept_count += 1;
            } else {
                self.state.deny_count += 1;
            }
            decisions.push(Decision {
                device: req.device,
                accepted: accept,
                packet_steps,
            });
        }
        if projected + self.p_rate_kw < reference_kw - tol && decisions.iter().all(|d| d.accepted) {
            self.state.request_shortfalls += 1;
        }
        self.advance();
        decisions
    }

    fn lock(&mut self, steps: u32) {
        let slot = steps.max(1) as usize - 1;
        if self.state.expiring.len() <= slot {
            self.state.expiring.resize(slot + 1, 0.0);
        }
        self.state.expiring[slot] += self.p_rate_kw;
        self.state.locked_kw += self.p_rate_kw;
    }

    /// Releases packets that end with the current step.
    fn advance(&mut self) {
        if let Some(done) = self.state.expiring.pop_front() {
            self.state.locked_kw -= done;
            if self.state.expiring.iter().all(|&v| v == 0.0) {
                // avoid drift once nothing is running
                self.state.locked_kw = 0.0;
            }
        }
    }
}

/// Per-device cycling over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclingReport {
    /// Cycles per device per hour.
    pub per_device: Vec<f64>,
    pub mean_per_hour: f64,
    /// Ratio to the baseline mean, when given.
    pub relative_to_baseline: Option<f64>,
}

/// Cycles per device per hour between two snapshots of the fleet.
pub fn cycling_report(
    start: &[DeviceState],
    end: &[DeviceState],
    hours: f64,
    baseline_mean: Option<f64>,
) -> CyclingReport {
    let per_device: Vec<f64> = start
        .iter()
        .zip(end)
        .map(|(a, b)| (b.cycle_count - a.cycle_count) as f64 / hours)
        .collect();
    let mean = per_device.iter().sum::<f64>() / per_device.len().max(1) as f64;
    CyclingReport {
        relative_to_baseline: baseline_mean.filter(|b| *b > 0.0).map(|b| mean / b),
        per_device,
        mean_per_hour: mean,
    }
}
