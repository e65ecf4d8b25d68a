//! Solves an [`MpcProblem`] in tracking-error coordinates.
//!
//! `M_y` is lower triangular with the nonzero diagonal `C B`, so the error
//! `e = M_y dU + c` (with `c = Y0 + G_y - R`) is a bijective change of
//! variables. The objective becomes `||e||_p^p` and the constraints
//! `W e <= b` with `W = M_u M_y^-1` and `b = G_u1 - G_u2 + W c`.

use alloc::vec;
use alloc::vec::Vec;

use super::lp::dual_simplex;
use super::qp::dual_active_set;
use super::{MpcError, MpcProblem, Norm};
use crate::linalg::{norm_inf, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

/// KKT residuals of a returned solution, evaluated in `dU` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Kkt {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl Kkt {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub du: Vec<f64>,
    /// `||Y0 + M_y dU + G_y - R||_p^p` plus the slack penalty.
    pub objective: f64,
    /// Multipliers of the down-ramp rows.
    pub lambda: Vec<f64>,
    /// Down-ramp slack; empty when the rows are hard.
    pub slack: Vec<f64>,
    pub status: SolveStatus,
    pub kkt: Kkt,
    pub iterations: usize,
}

pub fn solve(prob: &MpcProblem, norm: Norm) -> Result<Solution, MpcError> {
    solve_with(prob, norm, None, 10_000)
}

fn check(prob: &MpcProblem) -> Result<usize, MpcError> {
    let n = prob.horizon();
    let dims = [
        ("M_y rows", prob.my.rows()),
        ("M_y cols", prob.my.cols()),
        ("M_u rows", prob.mu.rows()),
        ("M_u cols", prob.mu.cols()),
        ("G_y", prob.gy.len()),
        ("G_u1", prob.gu1.len()),
        ("G_u2", prob.gu2.len()),
        ("Y0", prob.y0.len()),
    ];
    for (what, got) in dims {
        if got != n {
            return Err(MpcError::DimensionMismatch { what, expected: n, got });
        }
    }
    if n == 0 {
        return Err(MpcError::InvalidConfig("empty horizon"));
    }
    let scale = prob.my.max_abs();
    if (0..n).any(|i| !(prob.my[(i, i)].abs() > 1e-12 * scale)) || scale == 0.0 {
        return Err(MpcError::SingularOutputMap(prob.my[(0, 0)]));
    }
    Ok(n)
}

/// Solves `M_y' w = v` for lower-triangular `M_y`, using only `v[..=last]`.
fn solve_upper_transposed(my: &Matrix, v: &[f64], last: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in (0..=last).rev() {
        let mut acc = v[j];
        for l in j + 1..=last {
            acc -= my[(l, j)] * out[l];
        }
        out[j] = acc / my[(j, j)];
    }
}

/// Solves `M_y x = v` by forward substitution.
fn solve_lower(my: &Matrix, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let row = my.row(i);
        let acc: f64 = v[i] - row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum::<f64>();
        x[i] = acc / row[i];
    }
    x
}

type ErrorSpace = (Vec<f64>, Vec<f64>, Vec<f64>, SolveStatus, usize);

/// Solves `min ||e||_p^p` over `W e <= b` (optionally softened) and returns
/// `(e, slack, lambda, status, iterations)`.
fn solve_error_space(w: &Matrix, b: &[f64], norm: Norm, slack_penalty: Option<f64>, max_iter: usize) -> ErrorSpace {
    let n = b.len();
    if let Some(pen) = slack_penalty {
        // exact penalty: the hard solution is optimal whenever no multiplier exceeds pen
        let hard = solve_error_space(w, b, norm, None, max_iter);
        if hard.3 == SolveStatus::Optimal && hard.2.iter().all(|&l| l <= pen) {
            return (hard.0, vec![0.0; n], hard.2, hard.3, hard.4);
        }
    }
    match (norm, slack_penalty) {
        (Norm::L2, None) => {
            let out = dual_active_set(&vec![2.0; n], &vec![0.0; n], w, b, max_iter);
            (out.x, Vec::new(), out.lambda, out.status, out.iterations)
        }
        (Norm::L2, Some(pen)) => {
            // [e, s]: min e'e + pen (s + s^2 / 2), W e - s <= b, s >= 0
            let mut a = Matrix::zeros(2 * n, 2 * n);
            let mut rhs = b.to_vec();
            rhs.extend(core::iter::repeat_n(0.0, n));
            for i in 0..n {
                a.row_mut(i)[..n].copy_from_slice(w.row(i));
                a[(i, n + i)] = -1.0;
                a[(n + i, n + i)] = -1.0;
            }
            let hd: Vec<f64> = core::iter::repeat_n(2.0, n)
                .chain(core::iter::repeat_n(pen, n))
                .collect();
            let g: Vec<f64> = core::iter::repeat_n(0.0, n)
                .chain(core::iter::repeat_n(pen, n))
                .collect();
            let out = dual_active_set(&hd, &g, &a, &rhs, max_iter);
            let e = out.x[..n].to_vec();
            let s = out.x[n..].iter().map(|v| v.max(0.0)).collect();
            (e, s, out.lambda[..n].to_vec(), out.status, out.iterations)
        }
        (Norm::L1, pen) => {
            let cols = if pen.is_some() { 3 * n } else { 2 * n };
            let mut a = Matrix::zeros(n, cols);
            for i in 0..n {
                let row = a.row_mut(i);
                for (j, &v) in w.row(i).iter().enumerate() {
                    row[j] = v;
                    row[n + j] = -v;
                }
                if pen.is_some() {
                    row[2 * n + i] = -1.0;
                }
            }
            let mut cost = vec![1.0; 2 * n];
            if let Some(p) = pen {
                cost.extend(core::iter::repeat_n(p, n));
            }
            let out = dual_simplex(&cost, &a, b, max_iter);
            let e = (0..n).map(|i| out.x[i] - out.x[n + i]).collect();
            let s = if pen.is_some() {
                out.x[2 * n..].to_vec()
            } else {
                Vec::new()
            };
            (e, s, out.lambda, out.status, out.iterations)
        }
    }
}

pub fn solve_with(
    prob: &MpcProblem,
    norm: Norm,
    slack_penalty: Option<f64>,
    max_iter: usize,
) -> Result<Solution, MpcError> {
    let n = check(prob)?;
    let c = prob.free_error();
    let h = prob.h();

    let mut w = Matrix::zeros(n, n);
    let mut buf = vec![0.0; n];
    for i in 0..n {
        solve_upper_transposed(&prob.my, prob.mu.row(i), i, &mut buf);
        w.row_mut(i).copy_from_slice(&buf);
    }
    let wc = w.mul_vec(&c);
    let b: Vec<f64> = h.iter().zip(&wc).map(|(h, v)| h + v).collect();

    let (e, slack, lambda, status, iterations) = solve_error_space(&w, &b, norm, slack_penalty, max_iter);

    let rhs: Vec<f64> = e.iter().zip(&c).map(|(e, c)| e - c).collect();
    let du = solve_lower(&prob.my, &rhs);
    let penalty = slack_penalty.unwrap_or(0.0) * slack.iter().sum::<f64>();
    let objective = match norm {
        Norm::L1 => e.iter().map(|v| v.abs()).sum::<f64>(),
        Norm::L2 => e.iter().map(|v| v * v).sum::<f64>(),
    } + penalty;
    let kkt = kkt_residuals(prob, norm, &du, &lambda, &slack);
    Ok(Solution {
        du,
        objective,
        lambda,
        slack,
        status,
        kkt,
        iterations,
    })
}

/// Residuals of the optimality conditions of the original problem in `dU`.
pub(crate) fn kkt_residuals(prob: &MpcProblem, norm: Norm, du: &[f64], lambda: &[f64], slack: &[f64]) -> Kkt {
    let n = du.len();
    let h = prob.h();
    let e: Vec<f64> = prob
        .my
        .mul_vec(du)
        .iter()
        .zip(prob.free_error())
        .map(|(a, c)| a + c)
        .collect();
    let mut con = prob.mu.mul_vec(du);
    for i in 0..n {
        con[i] -= h[i] + slack.get(i).copied().unwrap_or(0.0);
    }
    let primal = con
        .iter()
        .chain(slack.iter().map(|s| -s).collect::<Vec<_>>().iter())
        .fold(0.0f64, |m, v| m.max(*v));
    let dual = lambda.iter().fold(0.0f64, |m, l| m.max(-l));
    let complementarity = lambda.iter().zip(&con).fold(0.0f64, |m, (l, c)| m.max((l * c).abs()));
    let mut v = prob.mu.tr_mul_vec(lambda);
    let stationarity = match norm {
        Norm::L2 => {
            let g = prob.my.tr_mul_vec(&e);
            v.iter_mut().zip(&g).for_each(|(v, g)| *v += 2.0 * g);
            norm_inf(&v)
        }
        Norm::L1 => {
            // subgradient sigma with M_y' sigma + M_u' lambda = 0 must lie in d|e|
            v.iter_mut().for_each(|x| *x = -*x);
            let mut sigma = vec![0.0; n];
            solve_upper_transposed(&prob.my, &v, n - 1, &mut sigma);
            let tol = 1e-9 * (1.0 + norm_inf(&e));
            sigma
                .iter()
                .zip(&e)
                .map(|(s, e)| {
                    if e.abs() > tol {
                        (s - e.signum()).abs()
                    } else {
                        (s.abs() - 1.0).max(0.0)
                    }
                })
                .fold(0.0, f64::max)
        }
    };
    Kkt {
        stationarity,
        primal,
        dual,
        complementarity,
    }
}
