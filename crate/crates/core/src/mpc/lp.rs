//! Dense dual simplex for `min c'x s.t. A x <= b, x >= 0` with `c >= 0`.
//!
//! With nonnegative costs the all-slack basis is dual feasible, so no phase
//! one is needed: rows with negative right-hand side leave the basis until
//! the basic solution is primal feasible.

use alloc::vec;
use alloc::vec::Vec;

use super::SolveStatus;
use crate::linalg::Matrix;

pub(crate) struct LpOutput {
    pub x: Vec<f64>,
    /// Nonnegative multipliers of the `A x <= b` rows.
    pub lambda: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
}

pub(crate) fn dual_simplex(cost: &[f64], a: &Matrix, b: &[f64], max_iter: usize) -> LpOutput {
    let m = a.rows();
    let nx = a.cols();
    let width = nx + m;
    debug_assert!(cost.iter().all(|&c| c >= 0.0));

    let mut t = vec![0.0; m * width];
    for i in 0..m {
        t[i * width..i * width + nx].copy_from_slice(a.row(i));
        t[i * width + nx + i] = 1.0;
    }
    let mut beta = b.to_vec();
    let mut d: Vec<f64> = cost.iter().copied().chain(core::iter::repeat_n(0.0, m)).collect();
    let mut basis: Vec<usize> = (nx..width).collect();
    let scale = b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let feas_tol = 1e-11 * scale;
    let piv_tol = 1e-11;

    let mut iterations = 0;
    let status = loop {
        let mut leave = None;
        let mut worst = -feas_tol;
        for (i, &v) in beta.iter().enumerate() {
            if v < worst {
                worst = v;
                leave = Some(i);
            }
        }
        let Some(r) = leave else {
            break SolveStatus::Optimal;
        };
        if iterations >= max_iter {
            break SolveStatus::IterationLimit;
        }
        iterations += 1;

        let row = &t[r * width..(r + 1) * width];
        let mut enter = None;
        let mut best = f64::INFINITY;
        let mut best_piv = 0.0;
        for (jx, &v) in row.iter().enumerate() {
            if v < -piv_tol {
                let ratio = d[jx].max(0.0) / -v;
                if ratio < best - 1e-14 || (ratio <= best + 1e-14 && -v > best_piv) {
                    best = ratio;
                    best_piv = -v;
                    enter = Some(jx);
                }
            }
        }
        let Some(jx) = enter else {
            break SolveStatus::Infeasible;
        };

        let piv = t[r * width + jx];
        for v in &mut t[r * width..(r + 1) * width] {
            *v /= piv;
        }
        beta[r] /= piv;
        let (pivot_row, br) = (t[r * width..(r + 1) * width].to_vec(), beta[r]);
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = t[i * width + jx];
            if f != 0.0 {
                let ri = &mut t[i * width..(i + 1) * width];
                ri.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                ri[jx] = 0.0;
                beta[i] -= f * br;
            }
        }
        let f = d[jx];
        d.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
        d[jx] = 0.0;
        basis[r] = jx;
    };

    let mut x = vec![0.0; nx];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < nx {
            x[bj] = beta[i].max(0.0);
        }
    }
    LpOutput {
        x,
        lambda: d[nx..].iter().map(|v| v.max(0.0)).collect(),
        status,
        iterations,
    }
}
