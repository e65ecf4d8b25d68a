//! Aggregate virtual-battery (VB) model of a charge-only packetized fleet.
//!
//! State `[x1, x2, x3, z_1..z_np]`: mean temperature, charging count,
//! opt-out count and a conveyor of packet timers. `z_i` holds the devices
//! whose packets were accepted `i` steps ago, so `z_np` is the cohort that
//! finishes in the current step. Counts are real-valued.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fleet::{request_probability, request_rate, DeviceParams, FleetConfig, SPECIFIC_HEAT, WATER_DENSITY};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VbError {
    #[error("state has {got} timer states, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input {u_mw} MW is below the down-ramp floor {floor_mw} MW")]
    DownRampViolation { u_mw: f64, floor_mw: f64 },
    #[error("input {u_mw} MW exceeds the request ceiling {ceiling_mw} MW")]
    InsufficientRequests { u_mw: f64, ceiling_mw: f64 },
    #[error("mean temperature {x1} lies outside the open deadband ({z_lo}, {z_hi}); the request rate is not differentiable there")]
    OutsideDeadband { x1: f64, z_lo: f64, z_hi: f64 },
    #[error("nominal point did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VbParams {
    pub n_devices: f64,
    /// Fleet rating `N * p_rate`, MW.
    pub p_fleet_mw: f64,
    pub tau_s: f64,
    pub x_amb: f64,
    pub tank_l: f64,
    pub specific_heat: f64,
    pub density: f64,
    /// Mean thermal draw per device, kW.
    pub q_kw: f64,
    /// Fraction of denied requests that become opt-outs per step.
    pub a1: f64,
    /// Fraction of opt-outs that return per step.
    pub a2: f64,
    /// Timer states (packet length in steps).
    pub n_p: usize,
    /// Input delay in steps, used by [`VbPlant`].
    pub t_d: usize,
    pub dt: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub z_set: f64,
    pub m_r_hz: f64,
}

impl Default for VbParams {
    fn default() -> Self {
        Self::from_fleet(&FleetConfig::default(), 150, 2.0)
    }
}

impl VbParams {
    /// Parameters matching an agent fleet with packets of `n_p` steps.
    pub fn from_fleet(cfg: &FleetConfig, n_p: usize, dt: f64) -> Self {
        let d: &DeviceParams = &cfg.device;
        Self {
            n_devices: cfg.n_devices as f64,
            p_fleet_mw: cfg.n_devices as f64 * d.p_rate_kw / 1000.0,
            tau_s: d.tau_s,
            x_amb: d.x_amb,
            tank_l: d.tank_l,
            specific_heat: SPECIFIC_HEAT,
            density: WATER_DENSITY,
            q_kw: cfg.water_draw.mean_kw(),
            a1: DEFAULT_A1,
            a2: dt / 600.0,
            n_p,
            t_d: 0,
            dt,
            z_lo: d.z_lo,
            z_hi: d.z_hi,
            z_set: d.z_set,
            m_r_hz: d.m_r_hz,
        }
    }

    pub fn validate(&self) -> Result<(), VbError> {
        if self.n_p == 0 {
            return Err(VbError::InvalidParams("n_p must be at least 1"));
        }
        if !(self.n_devices > 0.0 && self.p_fleet_mw > 0.0 && self.dt > 0.0 && self.tau_s > 0.0) {
            return Err(VbError::InvalidParams("N, P, dt and tau must be positive"));
        }
        if !(self.z_lo < self.z_set && self.z_set < self.z_hi) {
            return Err(VbError::InvalidParams("need z_lo < z_set < z_hi"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        3 + self.n_p
    }

    /// Power of one device, MW.
    pub fn p_device_mw(&self) -> f64 {
        self.p_fleet_mw / self.n_devices
    }

    fn heat_capacity(&self) -> f64 {
        self.specific_heat * self.density * self.tank_l
    }

    fn device_params(&self) -> DeviceParams {
        DeviceParams {
            z_lo: self.z_lo,
            z_hi: self.z_hi,
            z_set: self.z_set,
            tank_l: self.tank_l,
            tau_s: self.tau_s,
            p_rate_kw: self.p_device_mw() * 1000.0,
            m_r_hz: self.m_r_hz,
            x_amb: self.x_amb,
        }
    }

    /// Request probability per OFF device at mean temperature `x1`.
    pub fn p_req(&self, x1: f64) -> f64 {
        request_probability(x1, &self.device_params(), self.dt)
    }
}

/// Opt-out conversion rate of denied requests, fitted against the default
/// agent fleet.
pub const DEFAULT_A1: f64 = 0.0032;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbState {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub z: Vec<f64>,
}

impl VbState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + self.z.len());
        v.extend_from_slice(&[self.x1, self.x2, self.x3]);
        v.extend_from_slice(&self.z);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            x1: v[0],
            x2: v[1],
            x3: v[2],
            z: v[3..].to_vec(),
        }
    }

    fn z_np(&self) -> f64 {
        self.z.last().copied().unwrap_or(0.0)
    }

    /// Devices that stay on into the next step: charging and opted out minus
    /// the finishing cohort.
    pub fn x_on(&self) -> f64 {
        self.x2 + self.x3 - self.z_np()
    }
}

fn check_dim(st: &VbState, p: &VbParams) -> Result<(), VbError> {
    if st.z.len() != p.n_p {
        return Err(VbError::DimensionMismatch {
            expected: p.n_p,
            got: st.z.len(),
        });
    }
    Ok(())
}

/// Aggregate power, MW.
pub fn output(st: &VbState, p: &VbParams) -> f64 {
    p.p_device_mw() * (st.x2 + st.x3)
}

/// Down-ramp floor and request ceiling for the next input, MW.
pub fn feasible_input_bounds(st: &VbState, p: &VbParams) -> Result<(f64, f64), VbError> {
    check_dim(st, p)?;
    let pd = p.p_device_mw();
    let on = st.x_on();
    let lo = pd * on;
    let hi = lo + pd * p.p_req(st.x1) * (p.n_devices - on).max(0.0);
    Ok((lo, hi))
}

/// The state transition without admissibility checks.
pub fn transition(st: &VbState, u_mw: f64, p: &VbParams) -> VbState {
    let pd = p.p_device_mw();
    let n = p.n_devices;
    let accepted = u_mw / pd;
    let on = st.x_on();
    let preq = p.p_req(st.x1);
    let heat = p.dt / (p.heat_capacity()) * (pd * 1000.0 * (st.x2 + st.x3) / n - p.q_kw);
    let x1 = st.x1 * (1.0 - p.dt / p.tau_s) + p.dt * p.x_amb / p.tau_s + heat;
    let x2 = accepted - st.x3;
    let x3 = st.x3 * (1.0 - p.a2) + p.a1 * preq * (n - on) - p.a1 * (accepted - on);
    let mut z = Vec::with_capacity(st.z.len());
    z.push(accepted - on);
    z.extend_from_slice(&st.z[..st.z.len() - 1]);
    VbState { x1, x2, x3, z }
}

/// One VB step. Inputs outside [`feasible_input_bounds`] are rejected.
pub fn vb_step(st: &VbState, u_mw: f64, p: &VbParams) -> Result<VbState, VbError> {
    let (lo, hi) = feasible_input_bounds(st, p)?;
    let tol = 1e-9 * p.p_fleet_mw;
    if u_mw < lo - tol {
        return Err(VbError::DownRampViolation { u_mw, floor_mw: lo });
    }
    if u_mw > hi + tol {
        return Err(VbError::InsufficientRequests { u_mw, ceiling_mw: hi });
    }
    Ok(transition(st, u_mw, p))
}

/// Steady state under constant `u_mw`, and its output. Inputs the fleet cannot
/// sustain with its request rate are rejected.
///
/// The conveyor has a neutral direction, so the timers are pinned to the
/// uniform occupancy `z_i = x2 / n_p`. `x1` solves its affine balance
/// exactly and `x3` is found by damped fixed-point iteration.
pub fn nominal_point(p: &VbParams, u_mw: f64) -> Result<(VbState, f64), VbError> {
    p.validate()?;
    let pd = p.p_device_mw();
    let total = u_mw / pd;
    let x1 = p.x_amb + p.tau_s * (u_mw * 1000.0 / p.n_devices - p.q_kw) / p.heat_capacity();
    let np = p.n_p as f64;
    let preq = p.p_req(x1);
    let g = |x3: f64| {
        let x2 = total - x3;
        let on = total - x2 / np;
        x3 * (1.0 - p.a2) + p.a1 * preq * (p.n_devices - on) - p.a1 * (total - on)
    };
    const DAMPING: f64 = 1.0;
    let mut x3 = 0.0;
    for _ in 0..20_000 {
        let next = (1.0 - DAMPING) * x3 + DAMPING * g(x3);
        let done = (next - x3).abs() <= 1e-13 * total.abs().max(1.0);
        x3 = next;
        if done {
            break;
        }
    }
    let x2 = total - x3;
    let st = VbState {
        x1,
        x2,
        x3,
        z: vec![x2 / np; p.n_p],
    };
    let after = transition(&st, u_mw, p);
    let residual = st
        .to_vec()
        .iter()
        .zip(after.to_vec())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if !(residual < 1e-10 * total.abs().max(1.0)) {
        return Err(VbError::NoConvergence { residual });
    }
    // the fixed point exists algebraically even when too few devices request
    let (_, hi) = feasible_input_bounds(&st, p)?;
    if u_mw > hi + 1e-9 * p.p_fleet_mw || st.x3 < 0.0 {
        return Err(VbError::InsufficientRequests { u_mw, ceiling_mw: hi });
    }
    let y = output(&st, p);
    Ok((st, y))
}

/// Affine model `x+ = f0 + A (x - x0) + B (u - u0)`, `y = C x`, with `Cm x`
/// the down-ramp floor in MW.
#[derive(Debug, Clone, PartialEq)]
pub struct LinModel {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cm: Vec<f64>,
    pub x0: Vec<f64>,
    pub u0: f64,
    pub f0: Vec<f64>,
    pub y0: f64,
}

impl LinModel {
    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

/// Derivative of the per-step request probability with respect to `x1`.
fn p_req_derivative(x1: f64, p: &VbParams) -> f64 {
    let d = p.device_params();
    let mu = request_rate(x1, &d);
    let k = (p.z_set - p.z_lo) / (p.z_hi - p.z_set);
    let dmu = -p.m_r_hz * k * (p.z_hi - p.z_lo) / ((x1 - p.z_lo) * (x1 - p.z_lo));
    p.dt * dmu * (-mu * p.dt).exp()
}

/// Jacobian linearization about `(x0, u0)`.
pub fn linearize(x0: &VbState, u0: f64, p: &VbParams) -> Result<LinModel, VbError> {
    check_dim(x0, p)?;
    if !(x0.x1 > p.z_lo && x0.x1 < p.z_hi) {
        return Err(VbError::OutsideDeadband {
            x1: x0.x1,
            z_lo: p.z_lo,
            z_hi: p.z_hi,
        });
    }
    let k = p.state_dim();
    let np = p.n_p;
    let n = p.n_devices;
    let pd = p.p_device_mw();
    let preq = p.p_req(x0.x1);
    let dpreq = p_req_derivative(x0.x1, p);
    let on = x0.x_on();
    let last = k - 1;

    let mut a = Matrix::zeros(k, k);
    let heat = p.dt * pd * 1000.0 / (p.heat_capacity() * n);
    a[(0, 0)] = 1.0 - p.dt / p.tau_s;
    a[(0, 1)] = heat;
    a[(0, 2)] = heat;

    a[(1, 2)] = -1.0;

    let q = p.a1 * (1.0 - preq);
    a[(2, 0)] = p.a1 * dpreq * (n - on);
    a[(2, 1)] = q;
    a[(2, 2)] = (1.0 - p.a2) + q;
    a[(2, last)] += -q;

    a[(3, 1)] = -1.0;
    a[(3, 2)] = -1.0;
    a[(3, last)] += 1.0;
    for i in 1..np {
        a[(3 + i, 2 + i)] = 1.0;
    }

    let mut b = vec![0.0; k];
    b[1] = 1.0 / pd;
    b[2] = -p.a1 / pd;
    b[3] = 1.0 / pd;

    let mut c = vec![0.0; k];
    c[1] = pd;
    c[2] = pd;
    let mut cm = c.clone();
    cm[last] -= pd;

    let x0v = x0.to_vec();
    let f0 = transition(x0, u0, p).to_vec();
    let y0 = output(x0, p);
    Ok(LinModel {
        a,
        b,
        c,
        cm,
        x0: x0v,
        u0,
        f0,
        y0,
    })
}

/// The VB used as a plant: a FIFO of `t_d` inputs in front of [`vb_step`],
/// with each applied input clamped to the feasible band.
#[derive(Debug, Clone)]
pub struct VbPlant {
    params: VbParams,
    state: VbState,
    fifo: VecDeque<f64>,
}

impl VbPlant {
    pub fn new(params: VbParams, state: VbState) -> Result<Self, VbError> {
        params.validate()?;
        check_dim(&state, &params)?;
        let fill = output(&state, &params);
        let fifo = core::iter::repeat_n(fill, params.t_d).collect();
        Ok(Self { params, state, fifo })
    }

    pub fn state(&self) -> &VbState {
        &self.state
    }

    pub fn params(&self) -> &VbParams {
        &self.params
    }

    /// Queues `u_mw`, applies the input leaving the delay line and returns
    /// the output power during the step together with the applied input.
    pub fn step(&mut self, u_mw: f64) -> (f64, f64) {
        self.fifo.push_back(u_mw);
        let u = self.fifo.pop_front().unwrap_or(u_mw);
        let (lo, hi) = feasible_input_bounds(&self.state, &self.params).expect("plant state has checked dimensions");
        let applied = u.clamp(lo, hi.max(lo));
        self.state = transition(&self.state, applied, &self.params);
        (output(&self.state, &self.params), applied)
    }
}
