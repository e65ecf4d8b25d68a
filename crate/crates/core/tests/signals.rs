use pem_core::linalg::{solve_dense, Matrix};
use pem_core::signals::{
    acf, fit_ar, forecast, pacf, scale_to_power, variability_profile, ArModel, Bucket, RegDSynth, Series, SignalError,
    Unit,
};
use proptest::prelude::*;
use support::{ar_process, white};

mod support;

const N: usize = 100_000;

fn series(v: Vec<f64>) -> Series {
    Series::normalized(v, 2.0).unwrap()
}

/// Direct double loop over sample pairs.
fn acf_oracle(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mut mean = 0.0;
    for v in x {
        mean += v;
    }
    mean /= n as f64;
    let cov = |lag: usize| {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (x[i] - mean) * (x[i + lag] - mean);
        }
        s / n as f64
    };
    let c0 = cov(0);
    (0..=max_lag).map(|l| cov(l) / c0).collect()
}

/// Last coefficient of the order-`l` Yule-Walker system, by dense solve.
fn pacf_oracle(rho: &[f64], l: usize) -> f64 {
    let r = Matrix::from_fn(l, l, |i, j| rho[i.abs_diff(j)]);
    solve_dense(&r, &rho[1..=l]).unwrap()[l - 1]
}

#[test]
fn scale_to_power_maps_the_regulation_band() {
    let s = series(vec![1.0, -1.0, 0.0]);
    let p = scale_to_power(&s, 3.7, 1.0);
    assert_eq!(p.values(), &[4.7, 2.7, 3.7]);
    assert_eq!(p.unit(), Unit::MegaWatt);
}

#[test]
fn white_noise_acf_matches_the_direct_sum() {
    let x = white(11, N);
    let a = acf(&series(x.clone()), 20).unwrap();
    let o = acf_oracle(&x, 20);
    assert_eq!(a[0], 1.0);
    for l in 1..=20 {
        assert!((a[l] - o[l]).abs() < 1e-12, "lag {l}");
        assert!(a[l].abs() < 0.02, "lag {l}: {}", a[l]);
    }
}

#[test]
fn ar1_acf_decays_geometrically() {
    let x = ar_process(&[0.8], 1.0, 12, N);
    let a = acf(&series(x.clone()), 10).unwrap();
    let o = acf_oracle(&x, 10);
    for l in 0..=10 {
        assert!((a[l] - o[l]).abs() < 1e-12);
        assert!((a[l] - 0.8f64.powi(l as i32)).abs() < 0.03, "lag {l}: {}", a[l]);
    }
}

#[test]
fn ar1_pacf_cuts_off_after_lag_one() {
    let x = ar_process(&[0.8], 1.0, 13, N);
    let s = series(x);
    let rho = acf(&s, 10).unwrap();
    let p = pacf(&s, 10).unwrap();
    assert_eq!(p[1], rho[1]);
    for l in 2..=10 {
        assert!((p[l] - pacf_oracle(&rho, l)).abs() < 1e-9, "lag {l}");
        assert!(p[l].abs() < 0.03, "lag {l}: {}", p[l]);
    }
}

#[test]
fn ar3_pacf_matches_third_coefficient_then_vanishes() {
    let x = ar_process(&[0.5, 0.3, -0.2], 1.0, 14, N);
    let s = series(x);
    let rho = acf(&s, 6).unwrap();
    let p = pacf(&s, 6).unwrap();
    for l in 1..=6 {
        assert!((p[l] - pacf_oracle(&rho, l)).abs() < 1e-9, "lag {l}");
    }
    assert!((p[3] + 0.2).abs() < 0.02, "{}", p[3]);
    assert!(p[4].abs() < 0.02, "{}", p[4]);
}

#[test]
fn yule_walker_recovers_ar3_coefficients() {
    let truth = [0.5, 0.3, -0.2];
    let m = fit_ar(&series(ar_process(&truth, 1.0, 15, N)), 3).unwrap();
    for (f, t) in m.phi.iter().zip(truth) {
        assert!((f - t).abs() < 0.02, "{:?}", m.phi);
    }
    assert!(m.is_stationary());
}

#[test]
fn white_noise_fits_near_zero_coefficients() {
    let m = fit_ar(&series(white(16, N)), 3).unwrap();
    assert!(m.phi.iter().all(|p| p.abs() < 0.02), "{:?}", m.phi);
}

#[test]
fn constant_series_is_rejected() {
    let s = series(vec![0.25; 100]);
    assert_eq!(acf(&s, 3), Err(SignalError::Constant));
    assert!(fit_ar(&s, 3).is_err());
}

#[test]
fn forecast_edge_cases() {
    let m = ArModel {
        phi: vec![0.0, 0.0, 0.0],
        mu: 0.3,
        sigma2: 1.0,
    };
    assert!(forecast(&m, &[1.0, 2.0, 3.0], 0).unwrap().is_empty());
    assert_eq!(forecast(&m, &[1.0, 2.0, 3.0], 5).unwrap(), vec![0.3; 5]);
    assert!(matches!(
        forecast(&m, &[1.0], 1),
        Err(SignalError::InsufficientHistory { needed: 3, got: 1 })
    ));
}

#[test]
fn one_step_residual_variance_matches_innovations() {
    let sigma = 0.7;
    let x = ar_process(&[0.5, 0.3, -0.2], sigma, 17, N);
    let train = series(x[..N / 2].to_vec());
    let m = fit_ar(&train, 3).unwrap();
    let test = &x[N / 2..];
    let mut sum = 0.0;
    let mut n = 0.0;
    for k in 3..test.len() {
        let f = forecast(&m, &test[k - 3..k], 1).unwrap()[0];
        sum += (test[k] - f) * (test[k] - f);
        n += 1.0;
    }
    let var = sum / n;
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.1, "{var}");
}

#[test]
fn one_minute_forecast_error_is_below_fifteen_percent_of_range() {
    let g = RegDSynth::default();
    let m = fit_ar(&g.generate(99, 0, 10_800, 2.0), 3).unwrap();
    let held_out = g.generate(7, 0, 10_800, 2.0);
    let v = held_out.values();
    let (mut err, mut n) = (0.0, 0.0);
    let mut k = 30;
    while k + 30 < v.len() {
        let f = forecast(&m, &v[..=k], 30).unwrap();
        err += (f[29] - v[k + 30]).abs();
        n += 1.0;
        k += 7;
    }
    let rel = err / n / 2.0;
    assert!(rel < 0.15, "{rel}");
}

#[test]
fn variability_profile_fixtures() {
    let hours = 3;
    let len = hours * 1800;
    let constant = Series::new(vec![0.5; len], 2.0, 0, Unit::Normalized).unwrap();
    assert!(variability_profile(&constant, Bucket::MinuteOfHour)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));

    let noise = white(18, len);
    let spiky: Vec<f64> = (0..len)
        .map(|k| if (k * 2) % 3600 < 60 { noise[k] } else { 0.0 })
        .collect();
    let p = variability_profile(
        &Series::new(spiky, 2.0, 0, Unit::Normalized).unwrap(),
        Bucket::MinuteOfHour,
    )
    .unwrap();
    let peak = p
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, v)| if v > b.1 { (i, v) } else { b });
    assert_eq!(peak.0, 0);
    assert!(p[1..].iter().all(|&v| v == 0.0));

    let flat_len = 7 * 24 * 1800;
    let flat = variability_profile(
        &Series::new(white(19, flat_len), 2.0, 0, Unit::Normalized).unwrap(),
        Bucket::HourOfDay,
    )
    .unwrap();
    let mean = flat.iter().sum::<f64>() / flat.len() as f64;
    assert!(flat.iter().all(|v| (v / mean - 1.0).abs() < 0.1), "{flat:?}");
}

#[test]
fn short_span_is_rejected() {
    let s = Series::new(white(20, 100), 2.0, 0, Unit::Normalized).unwrap();
    assert!(variability_profile(&s, Bucket::HourOfDay).is_err());
}

#[test]
fn statistics_are_deterministic() {
    let s = series(ar_process(&[0.6], 1.0, 21, 5000));
    assert_eq!(acf(&s, 10).unwrap(), acf(&s, 10).unwrap());
    assert_eq!(fit_ar(&s, 3).unwrap(), fit_ar(&s, 3).unwrap());
}

proptest! {
    #[test]
    fn scale_to_power_is_affine(v in prop::collection::vec(-1.0f64..1.0, 1..50), bias in 0.0f64..10.0, amp in 0.0f64..5.0, alpha in -2.0f64..2.0) {
        let s = series(v.clone());
        let scaled = series(v.iter().map(|x| alpha * x).collect());
        let a = scale_to_power(&scaled, bias, amp);
        let b = scale_to_power(&s, bias, alpha * amp);
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn acf_is_bounded(v in prop::collection::vec(-5.0f64..5.0, 8..200)) {
        prop_assume!(v.iter().any(|x| *x != v[0]));
        let a = acf(&series(v.clone()), 5).unwrap();
        prop_assert_eq!(a[0], 1.0);
        prop_assert!(a.iter().all(|r| r.abs() <= 1.0 + 1e-12));
        let p = pacf(&series(v), 1).unwrap();
        prop_assert_eq!(p[1], a[1]);
    }
}
