//! Agent-based fleet of packetized electric water heaters.
//!
//! Each device integrates a single-node thermal model, stochastically
//! requests energy packets while OFF, and opts out of coordination when it
//! falls below the deadband. Every device owns a ChaCha stream selected by
//! its id, so results do not depend on fleet size or on how devices are
//! partitioned across threads.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coordinator::{Decision, PacketPolicy, PolicyError, RandomizeAt, Request};
use crate::vbmodel::VbState;

/// Specific heat of water, kJ/(kg °C).
pub const SPECIFIC_HEAT: f64 = 4.186;
/// Density of water near 50 °C, kg/L.
pub const WATER_DENSITY: f64 = 0.990;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FleetError {
    #[error("invalid device parameters: {0}")]
    InvalidParams(&'static str),
    #[error("decision refers to device {device}, which has no pending request")]
    UnknownRequest { device: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Thermal and request parameters shared by every device of the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceParams {
    /// Lower deadband bound, °C.
    pub z_lo: f64,
    /// Upper deadband bound, °C.
    pub z_hi: f64,
    pub z_set: f64,
    pub tank_l: f64,
    /// Insulation time constant, s.
    pub tau_s: f64,
    /// Element rating, kW.
    pub p_rate_kw: f64,
    /// Request rate at the setpoint, Hz.
    pub m_r_hz: f64,
    pub x_amb: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            z_lo: 43.0,
            z_hi: 57.0,
            z_set: 50.0,
            tank_l: 200.0,
            // standby loss of 1 °C/h at the setpoint: (50 - 20) °C over 30 h
            tau_s: 108_000.0,
            p_rate_kw: 4.5,
            m_r_hz: 1.0 / 300.0,
            x_amb: 20.0,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), FleetError> {
        if !(self.z_lo < self.z_set && self.z_set < self.z_hi) {
            return Err(FleetError::InvalidParams("need z_lo < z_set < z_hi"));
        }
        if !(self.tank_l > 0.0 && self.tau_s > 0.0 && self.p_rate_kw > 0.0 && self.m_r_hz > 0.0) {
            return Err(FleetError::InvalidParams(
                "tank, tau, rated power and m_R must be positive",
            ));
        }
        Ok(())
    }

    /// Heat capacity of a full tank, kJ/°C.
    pub fn heat_capacity(&self) -> f64 {
        SPECIFIC_HEAT * WATER_DENSITY * self.tank_l
    }

    /// Standby loss at temperature `soc`, kW.
    pub fn standby_loss_kw(&self, soc: f64) -> f64 {
        self.heat_capacity() * (soc - self.x_amb) / self.tau_s
    }

    /// Temperature change over one packet of `seconds` without losses.
    pub fn packet_heating(&self, seconds: f64) -> f64 {
        self.p_rate_kw * seconds / self.heat_capacity()
    }
}

/// Mean request rate `mu(z)` in Hz; `f64::INFINITY` at or below `z_lo`.
pub fn request_rate(soc: f64, p: &DeviceParams) -> f64 {
    if soc >= p.z_hi {
        0.0
    } else if soc <= p.z_lo {
        f64::INFINITY
    } else {
        p.m_r_hz * ((p.z_hi - soc) / (soc - p.z_lo)) * ((p.z_set - p.z_lo) / (p.z_hi - p.z_set))
    }
}

/// Probability of a request within one step of `dt` seconds.
pub fn request_probability(soc: f64, p: &DeviceParams, dt: f64) -> f64 {
    let mu = request_rate(soc, p);
    if mu.is_infinite() {
        1.0
    } else {
        1.0 - (-mu * dt).exp()
    }
}

/// Customer hot-water usage as a Poisson pulse process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaterDrawProcess {
    /// Pulse arrivals per hour.
    pub rate_per_hour: f64,
    /// Thermal power drawn during a pulse, kW.
    pub pulse_kw: f64,
    pub pulse_duration_s: f64,
}

impl Default for WaterDrawProcess {
    fn default() -> Self {
        // 3.7 MW across 6000 devices, net of standby loss at the setpoint.
        Self::balancing(&DeviceParams::default(), 3700.0 / 6000.0, 15.0, 180.0)
    }
}

impl WaterDrawProcess {
    /// Pulse rate for which the mean draw plus standby loss at the setpoint
    /// equals `electric_kw` per device.
    pub fn balancing(params: &DeviceParams, electric_kw: f64, pulse_kw: f64, pulse_duration_s: f64) -> Self {
        let draw_kw = (electric_kw - params.standby_loss_kw(params.z_set)).max(0.0);
        Self {
            rate_per_hour: draw_kw * 3600.0 / (pulse_kw * pulse_duration_s),
            pulse_kw,
            pulse_duration_s,
        }
    }

    /// Mean thermal draw, kW.
    pub fn mean_kw(&self) -> f64 {
        self.rate_per_hour * self.pulse_kw * self.pulse_duration_s / 3600.0
    }

    pub fn validate(&self) -> Result<(), FleetError> {
        if self.rate_per_hour < 0.0 || self.pulse_kw < 0.0 || self.pulse_duration_s < 0.0 {
            return Err(FleetError::InvalidParams("water draw fields must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Off,
    Charging,
    OptOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    /// Tank temperature, °C.
    pub soc: f64,
    pub mode: Mode,
    /// Steps left in the running packet; nonzero exactly when charging.
    pub timer_remaining: u32,
    /// OFF to ON transitions so far.
    pub cycle_count: u32,
    /// Steps since the running (or just finished) packet was accepted.
    pub packet_age: u32,
    /// The packet ended during the last step.
    pub just_finished: bool,
}

impl DeviceState {
    pub fn off(soc: f64) -> Self {
        Self {
            soc,
            mode: Mode::Off,
            timer_remaining: 0,
            cycle_count: 0,
            packet_age: 0,
            just_finished: false,
        }
    }

    pub fn is_on(&self) -> bool {
        matches!(self.mode, Mode::Charging | Mode::OptOut)
    }
}

/// Advances one device by `dt` seconds.
///
/// `accepted` carries the packet length in steps when this device's request
/// was granted in the current step. A granted packet starts immediately and
/// the device draws power for the whole step. Transitions are evaluated on
/// the post-step temperature.
pub fn step_device(st: &DeviceState, p: &DeviceParams, accepted: Option<u32>, draw_kw: f64, dt: f64) -> DeviceState {
    let mut next = st.clone();
    next.just_finished = false;
    if let Some(len) = accepted {
        debug_assert_eq!(st.mode, Mode::Off, "only OFF devices request packets");
        next.mode = Mode::Charging;
        next.timer_remaining = len.max(1);
        next.packet_age = 0;
        next.cycle_count += 1;
    }
    let heating = if next.is_on() { p.p_rate_kw } else { 0.0 };
    next.soc = st.soc + dt / p.tau_s * (p.x_amb - st.soc) + dt / p.heat_capacity() * (heating - draw_kw);

    match next.mode {
        Mode::Charging => {
            next.timer_remaining -= 1;
            next.packet_age += 1;
            if next.timer_remaining == 0 {
                next.mode = Mode::Off;
                next.just_finished = true;
            }
        }
        Mode::OptOut => {
            if next.soc >= p.z_set {
                next.mode = Mode::Off;
            }
        }
        Mode::Off => {}
    }
    if next.mode == Mode::Off && next.soc <= p.z_lo {
        next.mode = Mode::OptOut;
        next.cycle_count += 1;
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    pub n_devices: usize,
    pub device: DeviceParams,
    pub water_draw: WaterDrawProcess,
    /// Initial temperatures are uniform on `z_set ± init_spread`.
    pub init_spread: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            n_devices: 6000,
            device: DeviceParams::default(),
            water_draw: WaterDrawProcess::default(),
            init_spread: 6.0,
        }
    }
}

/// One simulated device and its private random stream.
#[derive(Debug, Clone)]
pub struct Device {
    id: usize,
    state: DeviceState,
    rng: ChaCha8Rng,
    draw_remaining: u32,
    /// Pregenerated packet lengths cycled through for device-side randomization.
    length_string: Vec<u32>,
    string_cursor: usize,
    /// Packet length attached to this device's pending request.
    request: Option<Option<u32>>,
    /// Packet length granted for the current step.
    grant: Option<u32>,
    /// Mode held during the last completed step.
    last_mode: Mode,
}

impl Device {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }
}

/// Runs the per-device update over disjoint device chunks. The default
/// implementation is sequential; a threaded one must visit every device once.
pub trait ChunkExecutor {
    fn for_each_device(&self, devices: &mut [Device], f: &(dyn Fn(&mut Device) + Sync));
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ChunkExecutor for Sequential {
    fn for_each_device(&self, devices: &mut [Device], f: &(dyn Fn(&mut Device) + Sync)) {
        devices.iter_mut().for_each(f);
    }
}

/// Result of one [`Fleet::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Power drawn during the step, kW.
    pub aggregate_kw: f64,
    /// Devices opted out during the step.
    pub opt_out_count: usize,
    pub accepted: usize,
    /// Requests pending for the next step.
    pub requests: usize,
}

#[derive(Debug, Clone)]
pub struct Fleet {
    params: DeviceParams,
    draw: WaterDrawProcess,
    policy: PacketPolicy,
    dt: f64,
    devices: Vec<Device>,
    pending: Vec<Request>,
    steps: u64,
}

impl Fleet {
    pub fn new(cfg: &FleetConfig, policy: &PacketPolicy, dt: f64, seed: u64) -> Result<Self, FleetError> {
        cfg.device.validate()?;
        cfg.water_draw.validate()?;
        policy.validate(dt)?;
        let device_side = policy.randomize_at == RandomizeAt::Device;
        let devices = (0..cfg.n_devices)
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(id as u64);
                let spread = cfg.init_spread;
                let soc = cfg.device.z_set + spread * (2.0 * rng.random::<f64>() - 1.0);
                let length_string = if device_side && policy.string_len > 0 {
                    (0..policy.string_len)
                        .map(|_| policy.draw_packet_steps(dt, &mut rng))
                        .collect()
                } else {
                    Vec::new()
                };
                Device {
                    id,
                    state: DeviceState::off(soc),
                    rng,
                    draw_remaining: 0,
                    length_string,
                    string_cursor: 0,
                    request: None,
                    grant: None,
                    last_mode: Mode::Off,
                }
            })
            .collect();
        let mut fleet = Self {
            params: cfg.device.clone(),
            draw: cfg.water_draw.clone(),
            policy: policy.clone(),
            dt,
            devices,
            pending: Vec::new(),
            steps: 0,
        };
        fleet.poll(&Sequential);
        Ok(fleet)
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn states(&self) -> impl Iterator<Item = &DeviceState> {
        self.devices.iter().map(|d| &d.state)
    }

    pub fn pending_requests(&self) -> &[Request] {
        &self.pending
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Power already committed for the coming step (running packets and
    /// opted-out devices), kW.
    pub fn committed_kw(&self) -> f64 {
        self.devices.iter().filter(|d| d.state.is_on()).count() as f64 * self.params.p_rate_kw
    }

    pub fn opt_out_count(&self) -> usize {
        self.devices.iter().filter(|d| d.state.mode == Mode::OptOut).count()
    }

    pub fn mean_soc(&self) -> f64 {
        self.devices.iter().map(|d| d.state.soc).sum::<f64>() / self.devices.len().max(1) as f64
    }

    /// Aggregate state in virtual-battery coordinates for a conveyor of `n_p`
    /// timer states. `z_i` counts packets accepted `i` steps ago and `z_{n_p}`
    /// the packets that ended in the last step; longer-running randomized
    /// packets are folded into `z_{n_p - 1}`.
    pub fn observe(&self, n_p: usize) -> VbState {
        let mut z = vec![0.0; n_p.max(1)];
        let mut x2 = 0.0;
        let mut x3 = 0.0;
        for d in &self.devices {
            let s = &d.state;
            match s.mode {
                Mode::Charging => {
                    x2 += 1.0;
                    // still-running packets never occupy the finishing slot
                    let age = (s.packet_age as usize).clamp(1, n_p.saturating_sub(1).max(1));
                    z[age - 1] += 1.0;
                }
                Mode::OptOut => x3 += 1.0,
                Mode::Off => {}
            }
            if s.just_finished {
                x2 += 1.0;
                z[n_p - 1] += 1.0;
            }
        }
        VbState {
            x1: self.mean_soc(),
            x2,
            x3,
            z,
        }
    }

    pub fn step(&mut self, decisions: &[Decision]) -> Result<StepOutcome, FleetError> {
        self.step_with(decisions, &Sequential)
    }

    /// Applies coordinator decisions for the pending requests, advances every
    /// device by one step and polls the next round of requests.
    pub fn step_with(&mut self, decisions: &[Decision], exec: &dyn ChunkExecutor) -> Result<StepOutcome, FleetError> {
        let mut accepted = 0;
        for d in decisions {
            let dev = self
                .devices
                .get_mut(d.device)
                .filter(|dev| dev.request.is_some())
                .ok_or(FleetError::UnknownRequest { device: d.device })?;
            if d.accepted {
                dev.grant = Some(d.packet_steps);
                accepted += 1;
            }
        }

        let params = &self.params;
        let draw = &self.draw;
        let dt = self.dt;
        let start_prob = 1.0 - (-draw.rate_per_hour * dt / 3600.0).exp();
        let pulse_steps = (draw.pulse_duration_s / dt).round() as u32;
        exec.for_each_device(&mut self.devices, &|dev: &mut Device| {
            // draw process first so its stream position is independent of decisions
            if dev.draw_remaining == 0 && pulse_steps > 0 && dev.rng.random::<f64>() < start_prob {
                dev.draw_remaining = pulse_steps;
            }
            let draw_kw = if dev.draw_remaining > 0 {
                dev.draw_remaining -= 1;
                draw.pulse_kw
            } else {
                0.0
            };
            let grant = dev.grant.take();
            dev.request = None;
            dev.last_mode = if grant.is_some() {
                Mode::Charging
            } else {
                dev.state.mode
            };
            dev.state = step_device(&dev.state, params, grant, draw_kw, dt);
        });

        let mut on = 0usize;
        let mut opt_outs = 0usize;
        for dev in &self.devices {
            match dev.last_mode {
                Mode::Charging => on += 1,
                Mode::OptOut => {
                    on += 1;
                    opt_outs += 1;
                }
                Mode::Off => {}
            }
        }
        self.steps += 1;
        self.poll(exec);
        Ok(StepOutcome {
            aggregate_kw: on as f64 * self.params.p_rate_kw,
            opt_out_count: opt_outs,
            accepted,
            requests: self.pending.len(),
        })
    }

    fn poll(&mut self, exec: &dyn ChunkExecutor) {
        let params = &self.params;
        let policy = &self.policy;
        let dt = self.dt;
        let device_side = policy.randomize_at == RandomizeAt::Device;
        exec.for_each_device(&mut self.devices, &|dev: &mut Device| {
            dev.request = None;
            if dev.state.mode != Mode::Off {
                return;
            }
            let p = request_probability(dev.state.soc, params, dt);
            if dev.rng.random::<f64>() < p {
                let len = if !device_side {
                    None
                } else if dev.length_string.is_empty() {
                    Some(policy.draw_packet_steps(dt, &mut dev.rng))
                } else {
                    let l = dev.length_string[dev.string_cursor];
                    dev.string_cursor = (dev.string_cursor + 1) % dev.length_string.len();
                    Some(l)
                };
                dev.request = Some(len);
            }
        });
        self.pending.clear();
        for dev in &self.devices {
            if let Some(len) = dev.request {
                self.pending.push(Request {
                    device: dev.id,
                    packet_steps: len,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn rate_at_setpoint_is_design_parameter() {
        let p = params();
        assert_eq!(request_rate(p.z_set, &p), p.m_r_hz);
        assert_eq!(request_rate(p.z_hi, &p), 0.0);
        assert!(request_rate(p.z_lo, &p).is_infinite());
    }

    #[test]
    fn probability_branches() {
        let mut p = params();
        assert_eq!(request_probability(p.z_hi + 1.0, &p, 2.0), 0.0);
        assert_eq!(request_probability(p.z_lo - 1.0, &p, 2.0), 1.0);
        p.m_r_hz = core::f64::consts::LN_2 / 2.0;
        assert!((request_probability(p.z_set, &p, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn packet_expiry_turns_device_off() {
        let p = params();
        let mut st = DeviceState::off(50.0);
        st.mode = Mode::Charging;
        st.timer_remaining = 1;
        let next = step_device(&st, &p, None, 0.0, 2.0);
        assert_eq!(next.mode, Mode::Off);
        assert_eq!(next.timer_remaining, 0);
        assert!(next.just_finished);
    }

    #[test]
    fn cold_off_device_opts_out() {
        let p = params();
        let st = DeviceState::off(p.z_lo - 0.1);
        let next = step_device(&st, &p, None, 0.0, 2.0);
        assert_eq!(next.mode, Mode::OptOut);
        assert_eq!(next.cycle_count, 1);
    }

    #[test]
    fn ambient_is_an_equilibrium() {
        let p = params();
        let st = DeviceState::off(p.x_amb);
        assert_eq!(step_device(&st, &p, None, 0.0, 2.0).soc, p.x_amb);
    }

    #[test]
    fn opt_out_recovers_at_setpoint() {
        let p = params();
        let mut st = DeviceState::off(p.z_set - 1e-4);
        st.mode = Mode::OptOut;
        let next = step_device(&st, &p, None, 0.0, 2.0);
        assert_eq!(next.mode, Mode::Off);
    }

    #[test]
    fn balancing_draw_matches_target() {
        let p = params();
        let w = WaterDrawProcess::balancing(&p, 0.6, 15.0, 180.0);
        assert!((w.mean_kw() + p.standby_loss_kw(p.z_set) - 0.6).abs() < 1e-12);
    }
}
