use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::stats::{acf_values, durbin_levinson};
use super::{Series, SignalError};

/// Autoregressive model `r[k] = mu + sum_i phi[i] * r[k-1-i] + a[k]` with
/// `Var(a) = sigma2`. Moving-average terms are not modelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub phi: Vec<f64>,
    /// Intercept of the recursion (not the process mean, see [`ArModel::process_mean`]).
    pub mu: f64,
    pub sigma2: f64,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn process_mean(&self) -> f64 {
        self.mu / (1.0 - self.phi.iter().sum::<f64>())
    }

    /// Roots of the lag polynomial `1 - phi_1 z - ... - phi_g z^g`, as
    /// `(re, im)` pairs. A zero leading coefficient drops the infinite roots.
    pub fn lag_polynomial_roots(&self) -> Vec<(f64, f64)> {
        characteristic_roots(&self.phi)
            .into_iter()
            .filter(|l| l.norm() > 0.0)
            .map(|l| {
                let z = l.inv();
                (z.re, z.im)
            })
            .collect()
    }

    /// True when every characteristic root lies strictly inside the unit circle.
    pub fn is_stationary(&self) -> bool {
        characteristic_roots(&self.phi).iter().all(|l| l.norm() < 1.0 - 1e-12)
    }

    /// Impulse-response (psi) weights `psi_0..psi_{n-1}` of the MA(inf) form.
    pub fn psi_weights(&self, n: usize) -> Vec<f64> {
        let mut psi = vec![0.0; n];
        if n == 0 {
            return psi;
        }
        psi[0] = 1.0;
        for j in 1..n {
            psi[j] = self
                .phi
                .iter()
                .enumerate()
                .filter(|(i, _)| *i < j)
                .map(|(i, p)| p * psi[j - 1 - i])
                .sum();
        }
        psi
    }
}

/// Roots of `lambda^g - phi_1 lambda^{g-1} - ... - phi_g` by Durand-Kerner.
fn characteristic_roots(phi: &[f64]) -> Vec<Complex64> {
    let g = phi.len();
    // trailing zero coefficients give exact zero roots
    let deg = phi.iter().rposition(|&p| p != 0.0).map_or(0, |i| i + 1);
    let mut roots = vec![Complex64::new(0.0, 0.0); g - deg];
    if deg == 0 {
        return roots;
    }
    // monic coefficients c[0] = 1, c[i] = -phi_i
    let coeffs: Vec<f64> = core::iter::once(1.0).chain(phi[..deg].iter().map(|p| -p)).collect();
    let eval = |z: Complex64| coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let radius = 1.0 + phi[..deg].iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg).map(|i| seed.powu(i as u32) * radius).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(1e-12, 0.0);
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 {
            break;
        }
    }
    roots.extend(z);
    roots
}

/// Yule-Walker AR(`order`) fit from the biased sample autocorrelation.
pub fn fit_ar(s: &Series, order: usize) -> Result<ArModel, SignalError> {
    let x = s.values();
    if order == 0 || x.len() <= 2 * order {
        return Err(SignalError::TooShort {
            len: x.len(),
            needed: 2 * order.max(1) + 1,
        });
    }
    let rho = acf_values(x, order)?;
    let (_, phi) = durbin_levinson(&rho, order)?;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let gamma0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let explained: f64 = phi.iter().zip(&rho[1..]).map(|(p, r)| p * r).sum();
    let model = ArModel {
        mu: mean * (1.0 - phi.iter().sum::<f64>()),
        sigma2: (gamma0 * (1.0 - explained)).max(0.0),
        phi,
    };
    if !model.is_stationary() {
        return Err(SignalError::NonStationary {
            roots: model
                .lag_polynomial_roots()
                .into_iter()
                .filter(|(re, im)| Complex64::new(*re, *im).norm() <= 1.0)
                .collect(),
        });
    }
    Ok(model)
}

/// Iterated conditional-mean forecast of the next `steps` samples after
/// `history`, with future innovations set to zero.
pub fn forecast(model: &ArModel, history: &[f64], steps: usize) -> Result<Vec<f64>, SignalError> {
    let g = model.order();
    if history.len() < g {
        return Err(SignalError::InsufficientHistory {
            needed: g,
            got: history.len(),
        });
    }
    let mut window: Vec<f64> = history[history.len() - g..].to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        // window is oldest-first; phi[0] multiplies the newest sample
        let next = model.mu
            + model
                .phi
                .iter()
                .zip(window.iter().rev())
                .map(|(p, r)| p * r)
                .sum::<f64>();
        out.push(next);
        if g > 0 {
            window.remove(0);
            window.push(next);
        }
    }
    Ok(out)
}

/// Mean forecast with its one-standard-deviation band.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// [`forecast`] plus the iterated innovation standard deviation per step.
pub fn forecast_with_bands(model: &ArModel, history: &[f64], steps: usize) -> Result<Forecast, SignalError> {
    let mean = forecast(model, history, steps)?;
    let psi = model.psi_weights(steps);
    let mut acc = 0.0;
    let std = psi
        .iter()
        .map(|p| {
            acc += p * p;
            (model.sigma2 * acc).sqrt()
        })
        .collect();
    Ok(Forecast { mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_forecast_the_intercept() {
        let m = ArModel {
            phi: vec![0.0, 0.0, 0.0],
            mu: 0.3,
            sigma2: 1.0,
        };
        let f = forecast(&m, &[1.0, -1.0, 0.5], 5).unwrap();
        assert!(f.iter().all(|&v| v == 0.3));
        assert!(forecast(&m, &[1.0], 0).is_err());
        assert!(forecast(&m, &[1.0, 2.0, 3.0], 0).unwrap().is_empty());
    }

    #[test]
    fn roots_of_known_polynomial() {
        // (1 - 0.5 z)(1 - 0.25 z) = 1 - 0.75 z + 0.125 z^2
        let m = ArModel {
            phi: vec![0.75, -0.125],
            mu: 0.0,
            sigma2: 1.0,
        };
        let mut roots: Vec<f64> = m.lag_polynomial_roots().iter().map(|r| r.0).collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((roots[0] - 2.0).abs() < 1e-9 && (roots[1] - 4.0).abs() < 1e-9);
        assert!(m.is_stationary());
        let unit_root = ArModel {
            phi: vec![1.0],
            mu: 0.0,
            sigma2: 1.0,
        };
        assert!(!unit_root.is_stationary());
    }

    #[test]
    fn bands_grow_with_horizon() {
        let m = ArModel {
            phi: vec![0.8],
            mu: 0.0,
            sigma2: 1.0,
        };
        let f = forecast_with_bands(&m, &[1.0], 3).unwrap();
        assert!((f.std[0] - 1.0).abs() < 1e-12);
        assert!((f.std[1] - (1.0f64 + 0.64).sqrt()).abs() < 1e-12);
        assert!((f.mean[1] - 0.64).abs() < 1e-12);
    }
}
