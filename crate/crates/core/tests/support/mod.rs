//! Oracles and fixtures shared by the test suites.
#![allow(dead_code)]

use pem_core::linalg::Matrix;
use pem_core::mpc::{MpcProblem, Norm};
use pem_core::scoring::{ScoreInputs, PJM_REQUIRED_SAMPLES};
use pem_core::vbmodel::{linearize, transition, VbParams, VbState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const R0: f64 = 3.7;
pub const REG: f64 = 1.0;
pub const LEN: usize = PJM_REQUIRED_SAMPLES + 40;

/// Straight transcription of the model equations, written against the
/// symbols rather than the library's helpers.
pub fn oracle_step(x: &[f64], u: f64, p: &VbParams) -> Vec<f64> {
    let n_p = p.n_p;
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let z = &x[3..];
    let big_n = p.n_devices;
    let p_dev = p.p_fleet_mw / big_n;
    let x_on = x2 + x3 - z[n_p - 1];

    let mu = if x1 >= p.z_hi {
        0.0
    } else if x1 <= p.z_lo {
        f64::INFINITY
    } else {
        p.m_r_hz * (p.z_hi - x1) / (x1 - p.z_lo) * (p.z_set - p.z_lo) / (p.z_hi - p.z_set)
    };
    let p_req = if mu.is_infinite() {
        1.0
    } else {
        1.0 - (-mu * p.dt).exp()
    };

    let cap = p.specific_heat * p.density * p.tank_l;
    let x1n = x1 + p.dt / p.tau_s * (p.x_amb - x1) + p.dt / cap * (1000.0 * p_dev * (x2 + x3) / big_n - p.q_kw);
    let n_acc = u / p_dev;
    let x2n = n_acc - x3;
    let x3n = x3 * (1.0 - p.a2) + p.a1 * p_req * (big_n - x_on) - p.a1 * (n_acc - x_on);
    let mut out = vec![x1n, x2n, x3n, n_acc - x_on];
    out.extend_from_slice(&z[..n_p - 1]);
    out
}

pub fn random_state(rng: &mut ChaCha8Rng, p: &VbParams) -> VbState {
    let z: Vec<f64> = (0..p.n_p).map(|_| rng.random_range(0.0..12.0)).collect();
    let x2 = z.iter().sum::<f64>() + rng.random_range(0.0..5.0);
    VbState {
        x1: rng.random_range(45.0..55.0),
        x2,
        x3: rng.random_range(0.0..80.0),
        z,
    }
}

/// Largest relative disagreement between the analytic Jacobian at `(x0, u0)`
/// and central differences, after discounting the rounding floor of each
/// difference quotient.
pub fn jacobian_error(x0: &VbState, u0: f64, p: &VbParams) -> f64 {
    let lin = linearize(x0, u0, p).unwrap();
    let base = x0.to_vec();
    let k = base.len();
    let f = |x: &[f64], u: f64| transition(&VbState::from_slice(x), u, p).to_vec();
    let mut worst = 0.0f64;
    for j in 0..=k {
        let scale = if j < k {
            base[j].abs().max(1.0)
        } else {
            u0.abs().max(1.0)
        };
        let h = 1e-6 * scale;
        let (plus, minus) = if j < k {
            let mut xp = base.clone();
            let mut xm = base.clone();
            xp[j] += h;
            xm[j] -= h;
            (f(&xp, u0), f(&xm, u0))
        } else {
            (f(&base, u0 + h), f(&base, u0 - h))
        };
        for i in 0..k {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            let an = if j < k { lin.a[(i, j)] } else { lin.b[i] };
            let noise = 8.0 * f64::EPSILON * plus[i].abs().max(minus[i].abs()) / (2.0 * h);
            let excess = ((fd - an).abs() - noise).max(0.0);
            if excess > 0.0 {
                worst = worst.max(excess / an.abs());
            }
        }
    }
    worst
}

/// Random instance in tracking-error form: free error `c`, constraint
/// right-hand side `h`.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> MpcProblem {
    let my = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            rng.random_range(0.5..1.5)
        } else if j < i {
            rng.random_range(-0.5..0.5)
        } else {
            0.0
        }
    });
    let mu = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -1.0
        } else if j < i {
            rng.random_range(-0.5..0.5)
        } else {
            0.0
        }
    });
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..n).map(|_| rng.random_range(-0.6..0.4)).collect();
    MpcProblem {
        my,
        gy: vec![0.0; n],
        mu,
        gu1: h,
        gu2: vec![0.0; n],
        r: c.iter().map(|v| -v).collect(),
        y0: vec![0.0; n],
        u0: 0.0,
    }
}

pub fn objective(prob: &MpcProblem, norm: Norm, du: &[f64]) -> Option<f64> {
    let h = prob.h();
    let con = prob.mu.mul_vec(du);
    if con.iter().zip(&h).any(|(c, h)| *c > h + 1e-12) {
        return None;
    }
    let e = prob.my.mul_vec(du);
    let c = prob.free_error();
    Some(
        e.iter()
            .zip(&c)
            .map(|(e, c)| match norm {
                Norm::L1 => (e + c).abs(),
                Norm::L2 => (e + c) * (e + c),
            })
            .sum(),
    )
}

/// Best feasible point on a lattice of `steps` points per axis around `center`.
pub fn lattice_min(prob: &MpcProblem, norm: Norm, center: &[f64], half: f64, steps: usize) -> (f64, Vec<f64>) {
    let n = center.len();
    let delta = 2.0 * half / (steps - 1) as f64;
    let mut best = (f64::INFINITY, center.to_vec());
    let mut idx = vec![0usize; n];
    let mut du = vec![0.0; n];
    loop {
        for i in 0..n {
            du[i] = center[i] - half + delta * idx[i] as f64;
        }
        if let Some(v) = objective(prob, norm, &du) {
            if v < best.0 {
                best = (v, du.clone());
            }
        }
        let mut i = 0;
        while i < n {
            idx[i] += 1;
            if idx[i] < steps {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// Exhaustive coarse search over a box, refined down to a 1e-3 lattice around
/// both the coarse winner and `hint`. For a convex problem a point that no
/// nearby lattice point improves on is globally optimal up to resolution.
pub fn brute_force(prob: &MpcProblem, norm: Norm, hint: &[f64]) -> f64 {
    let n = prob.horizon();
    let (mut best, coarse) = lattice_min(prob, norm, &vec![0.0; n], 3.0, 41);
    for start in [coarse, hint.to_vec()] {
        let mut center = start;
        for (half, steps) in [(0.3, 41), (0.03, 31), (0.003, 7)] {
            let (v, c) = lattice_min(prob, norm, &center, half, steps);
            if v < best {
                best = v;
            }
            center = c;
        }
    }
    best
}

/// Uniform noise in [-1, 1]; scaled to the fleet it stays inside the band.
pub fn signal(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..LEN).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

pub fn inputs(sig: &[f64], y: Vec<f64>) -> ScoreInputs {
    let r = sig.iter().map(|s| R0 + REG * s).collect();
    ScoreInputs::constant(r, y, R0, 0.25, REG, R0 + REG, R0 - REG)
}

/// With a constant basepoint and unit capacities the regulation signal in
/// score units equals `sig`; output `r0 + sig[k - shift]` is a delayed ideal
/// responder.
pub fn shifted(sig: &[f64], shift: usize) -> Vec<f64> {
    (0..sig.len())
        .map(|k| R0 + if k >= shift { sig[k - shift] } else { 0.0 })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Scan of every delay for one scoring sample, correlation branch only.
pub fn scan_delay(k: usize, ureg: &[f64], ures: &[f64]) -> usize {
    let a = &ureg[k..k + 31];
    let mut best = (0, f64::NEG_INFINITY);
    for m in 0..=30 {
        let rho = pearson(a, &ures[k + m..k + m + 31]).clamp(0.0, 1.0);
        let w = if m <= 1 { 1.0 } else { 1.0 - (m as f64 - 1.0) / 30.0 };
        let obj = (rho + w) / 3.0;
        if obj > best.1 {
            best = (m, obj);
        }
    }
    best.0
}

/// One period of the maximal-length sequence of x^5 + x^2 + 1 as +-1.
/// Every cyclic shift correlates with the original at exactly -1/30.
pub fn m_sequence() -> Vec<f64> {
    let mut bits = vec![0u8, 0, 0, 0, 1];
    while bits.len() < 31 {
        let n = bits.len() - 5;
        bits.push(bits[n + 2] ^ bits[n]);
    }
    bits.iter().map(|&b| if b == 1 { 1.0 } else { -1.0 }).collect()
}

pub fn white(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn ar_process(phi: &[f64], sigma: f64, seed: u64, n: usize) -> Vec<f64> {
    let e = white(seed, n + 1000);
    let mut x = vec![0.0; e.len()];
    for k in 0..e.len() {
        let mut v = sigma * e[k];
        for (i, p) in phi.iter().enumerate() {
            if k > i {
                v += p * x[k - 1 - i];
            }
        }
        x[k] = v;
    }
    x.split_off(1000)
}
