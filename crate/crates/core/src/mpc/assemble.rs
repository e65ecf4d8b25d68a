use alloc::vec;
use alloc::vec::Vec;

use super::MpcError;
use crate::linalg::{dot, Matrix, SparseRows};
use crate::vbmodel::LinModel;

/// Dense horizon matrices of the tracking problem
///
/// ```text
/// minimize  || Y0 + M_y dU + G_y - R ||_p^p
/// s.t.      M_u dU <= G_u1 - G_u2
/// ```
///
/// Row `i` of the constraint says the input applied at step `k + i` is not
/// below the predicted down-ramp floor `Cm x[k + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub my: Matrix,
    pub gy: Vec<f64>,
    pub mu: Matrix,
    pub gu1: Vec<f64>,
    pub gu2: Vec<f64>,
    pub r: Vec<f64>,
    pub y0: Vec<f64>,
    /// Linearization input, MW.
    pub u0: f64,
}

impl MpcProblem {
    pub fn horizon(&self) -> usize {
        self.r.len()
    }

    /// `G_u1 - G_u2`.
    pub fn h(&self) -> Vec<f64> {
        self.gu1.iter().zip(&self.gu2).map(|(a, b)| a - b).collect()
    }

    /// `Y0 + G_y - R`: the tracking error at `dU = 0`.
    pub fn free_error(&self) -> Vec<f64> {
        (0..self.horizon())
            .map(|i| self.y0[i] + self.gy[i] - self.r[i])
            .collect()
    }
}

pub fn assemble(lin: &LinModel, r: &[f64], horizon: usize) -> Result<MpcProblem, MpcError> {
    let k = lin.dim();
    if r.len() != horizon {
        return Err(MpcError::DimensionMismatch {
            what: "reference window",
            expected: horizon,
            got: r.len(),
        });
    }
    for (what, got) in [
        ("A", lin.a.rows()),
        ("C", lin.c.len()),
        ("Cm", lin.cm.len()),
        ("x0", lin.x0.len()),
        ("f0", lin.f0.len()),
    ] {
        if got != k || (what == "A" && lin.a.cols() != k) {
            return Err(MpcError::DimensionMismatch { what, expected: k, got });
        }
    }
    let n = horizon;
    let a = SparseRows::from_dense(&lin.a);

    // Markov parameters C A^i B and Cm A^i B
    let mut cab = vec![0.0; n];
    let mut cmab = vec![0.0; n];
    let mut v = lin.b.clone();
    let mut tmp = vec![0.0; k];
    for i in 0..n {
        cab[i] = dot(&lin.c, &v);
        cmab[i] = dot(&lin.cm, &v);
        a.mul_vec_into(&v, &mut tmp);
        core::mem::swap(&mut v, &mut tmp);
    }

    // partial sums S_i = sum_{j<=i} A^j (f0 - x0)
    let mut gy = vec![0.0; n];
    let mut gu2 = vec![0.0; n];
    let mut w: Vec<f64> = lin.f0.iter().zip(&lin.x0).map(|(f, x)| f - x).collect();
    let mut s = w.clone();
    for i in 0..n {
        if i > 0 {
            a.mul_vec_into(&w, &mut tmp);
            core::mem::swap(&mut w, &mut tmp);
            s.iter_mut().zip(&w).for_each(|(s, w)| *s += w);
        }
        gy[i] = dot(&lin.c, &s);
        if i + 1 < n {
            gu2[i + 1] = dot(&lin.cm, &s);
        }
    }

    let my = Matrix::from_fn(n, n, |i, j| if j <= i { cab[i - j] } else { 0.0 });
    let mu = Matrix::from_fn(n, n, |i, j| {
        if j == i {
            -1.0
        } else if j < i {
            cmab[i - 1 - j]
        } else {
            0.0
        }
    });
    let floor0 = dot(&lin.cm, &lin.x0);
    Ok(MpcProblem {
        my,
        gy,
        mu,
        gu1: vec![lin.u0 - floor0; n],
        gu2,
        r: r.to_vec(),
        y0: vec![lin.y0; n],
        u0: lin.u0,
    })
}
