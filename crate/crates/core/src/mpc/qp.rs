//! Goldfarb-Idnani dual active-set method for strictly convex QPs with a
//! diagonal Hessian:
//!
//! ```text
//! minimize 1/2 x' H x + g' x   s.t.  A x <= b
//! ```
//!
//! The method starts at the unconstrained minimum and adds violated
//! constraints one at a time while keeping dual feasibility. `J = L^-T Q`
//! and the upper-triangular `R` are maintained with Givens rotations.

use alloc::vec;
use alloc::vec::Vec;

use super::SolveStatus;
use crate::linalg::{dot, Matrix};

pub(crate) struct QpOutput {
    pub x: Vec<f64>,
    /// One multiplier per constraint row, zero for inactive rows.
    pub lambda: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Column-major square scratch matrix.
struct ColMajor {
    n: usize,
    data: Vec<f64>,
}

impl ColMajor {
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    /// Columns `(j, j + 1)` rotated by `(c, s)`:
    /// `j <- c j + s (j+1)`, `j+1 <- -s j + c (j+1)`.
    fn rotate(&mut self, j: usize, c: f64, s: f64, rows: core::ops::Range<usize>) {
        let n = self.n;
        let (left, right) = self.data.split_at_mut((j + 1) * n);
        let a = &mut left[j * n..];
        let b = &mut right[..n];
        for i in rows {
            let (x, y) = (a[i], b[i]);
            a[i] = c * x + s * y;
            b[i] = -s * x + c * y;
        }
    }
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

pub(crate) fn dual_active_set(h_diag: &[f64], g: &[f64], a: &Matrix, b: &[f64], max_iter: usize) -> QpOutput {
    let n = g.len();
    let m = a.rows();
    debug_assert_eq!(a.cols(), n);

    let mut x: Vec<f64> = g.iter().zip(h_diag).map(|(g, h)| -g / h).collect();
    let mut j = ColMajor {
        n,
        data: vec![0.0; n * n],
    };
    for k in 0..n {
        j.data[k * n + k] = 1.0 / h_diag[k].sqrt();
    }
    // R stored column-major, upper triangular in its leading q x q block
    let mut r = ColMajor {
        n,
        data: vec![0.0; n * n],
    };
    let mut active: Vec<usize> = Vec::with_capacity(n);
    let mut u: Vec<f64> = Vec::with_capacity(n + 1);
    let mut is_active = vec![false; m];
    let mut d = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut rr = vec![0.0; n];
    let mut iterations = 0;

    let row_norms: Vec<f64> = (0..m).map(|i| dot(a.row(i), a.row(i)).sqrt()).collect();
    let slack = |x: &[f64], i: usize| b[i] - dot(a.row(i), x);

    let finish = |x: Vec<f64>, active: &[usize], u: &[f64], status, iterations| {
        let mut lambda = vec![0.0; m];
        for (&i, &ui) in active.iter().zip(u) {
            lambda[i] = ui;
        }
        QpOutput {
            x,
            lambda,
            status,
            iterations,
        }
    };

    loop {
        // most violated inactive constraint, scaled by its row norm
        let mut p = None;
        let mut worst = 0.0;
        for i in 0..m {
            if is_active[i] || row_norms[i] == 0.0 {
                continue;
            }
            let s = slack(&x, i) / row_norms[i];
            let tol = 1e-11 * (1.0 + b[i].abs() / row_norms[i]);
            if s < -tol && s < worst {
                worst = s;
                p = Some(i);
            }
        }
        let Some(p) = p else {
            return finish(x, &active, &u, SolveStatus::Optimal, iterations);
        };
        let ap = a.row(p);
        u.push(0.0);

        loop {
            iterations += 1;
            if iterations > max_iter {
                u.pop();
                return finish(x, &active, &u, SolveStatus::IterationLimit, iterations);
            }
            let q = active.len();
            // d = J' n_p with n_p = -a_p
            for k in 0..n {
                d[k] = -dot(j.col(k), ap);
            }
            z.iter_mut().for_each(|v| *v = 0.0);
            for k in q..n {
                let dk = d[k];
                if dk != 0.0 {
                    z.iter_mut().zip(j.col(k)).for_each(|(z, jk)| *z += dk * jk);
                }
            }
            // R r = d[..q]
            for i in (0..q).rev() {
                let mut acc = d[i];
                for c in i + 1..q {
                    acc -= r.data[c * n + i] * rr[c];
                }
                rr[i] = acc / r.data[i * n + i];
            }

            // dual step: first active multiplier to hit zero
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for i in 0..q {
                if rr[i] > 1e-14 {
                    let t = u[i] / rr[i];
                    if t < t1 {
                        t1 = t;
                        drop = Some(i);
                    }
                }
            }
            // primal step: distance to constraint p along z
            let zn = -dot(&z, ap);
            let sp = slack(&x, p);
            let t2 = if zn > 1e-14 * row_norms[p] * row_norms[p] {
                -sp / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                u.pop();
                return finish(x, &active, &u, SolveStatus::Infeasible, iterations);
            }

            if t2.is_finite() {
                x.iter_mut().zip(&z).for_each(|(x, z)| *x += t * z);
            }
            for i in 0..q {
                u[i] -= t * rr[i];
            }
            u[q] += t;

            if t2 <= t1 {
                // add p: rotate d[q+1..] into d[q], mirror on J
                for k in (q + 1..n).rev() {
                    if d[k] == 0.0 {
                        continue;
                    }
                    let (c, s, h) = givens(d[k - 1], d[k]);
                    d[k - 1] = h;
                    d[k] = 0.0;
                    j.rotate(k - 1, c, s, 0..n);
                }
                for i in 0..=q {
                    r.data[q * n + i] = d[i];
                }
                active.push(p);
                is_active[p] = true;
                break;
            }

            // drop constraint l and retriangularize R
            let l = drop.expect("finite dual step has an index");
            let removed = active.remove(l);
            is_active[removed] = false;
            u.remove(l);
            for c in l..q - 1 {
                for i in 0..n {
                    r.data[c * n + i] = r.data[(c + 1) * n + i];
                }
            }
            for i in 0..n {
                r.data[(q - 1) * n + i] = 0.0;
            }
            for c in l..q - 1 {
                let (cs, sn, h) = givens(r.data[c * n + c], r.data[c * n + c + 1]);
                r.data[c * n + c] = h;
                r.data[c * n + c + 1] = 0.0;
                for cc in c + 1..q - 1 {
                    let (x0, x1) = (r.data[cc * n + c], r.data[cc * n + c + 1]);
                    r.data[cc * n + c] = cs * x0 + sn * x1;
                    r.data[cc * n + c + 1] = -sn * x0 + cs * x1;
                }
                j.rotate(c, cs, sn, 0..n);
            }
        }
    }
}
