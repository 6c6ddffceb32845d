use std::f64::consts::PI;

use proptest::prelude::*;
use stable_diff::diff::spectral::{butterworth_gain, dft, idft};
use stable_diff::diff::{
    differentiate, DiffConfig, DiffRequest, FdScheme, SavGolConfig, SpectralConfig, TvConfig,
};
use stable_diff::grid::{make_uniform_grid, sample_function, Field};

fn linear_methods() -> Vec<DiffConfig> {
    vec![
        DiffConfig::FiniteDiff { scheme: FdScheme::Central },
        DiffConfig::FiniteDiff { scheme: FdScheme::Forward },
        DiffConfig::SavGol(SavGolConfig { window_half: 6, poly_order: 4 }),
        DiffConfig::Spectral(SpectralConfig { retained: 12, steepness: 4, detrend: false }),
        DiffConfig::Spectral(SpectralConfig { retained: 12, steepness: 4, detrend: true }),
    ]
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_derivative(coeffs: &[f64], x: f64, order: usize) -> f64 {
    let mut c = coeffs.to_vec();
    for _ in 0..order {
        c = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
    }
    poly(&c, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_methods_are_linear(
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        f in proptest::collection::vec(-1.0..1.0f64, 64),
        g in proptest::collection::vec(-1.0..1.0f64, 64),
        order in 1usize..=2,
    ) {
        let grid = make_uniform_grid(&[(0.0, 2.0, 64)]).unwrap();
        let ff = Field::new(grid.clone(), f.clone()).unwrap();
        let gf = Field::new(grid.clone(), g.clone()).unwrap();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let cf = Field::new(grid, combo).unwrap();
        let req = DiffRequest::new(0, order);
        for cfg in linear_methods() {
            let df = differentiate(&ff, req, &cfg).unwrap();
            let dg = differentiate(&gf, req, &cfg).unwrap();
            let dc = differentiate(&cf, req, &cfg).unwrap();
            let scale = dc.derivative.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..64 {
                if !dc.valid_mask[i] {
                    continue;
                }
                let expect = a * df.derivative.values()[i] + b * dg.derivative.values()[i];
                let got = dc.derivative.values()[i];
                prop_assert!((got - expect).abs() <= 1e-9 * scale, "{:?} node {}: {} vs {}", cfg, i, got, expect);
            }
        }
    }

    #[test]
    fn savgol_reproduces_polynomials(
        coeffs in proptest::collection::vec(-2.0..2.0f64, 1..=5),
        m in 4usize..12,
        order in 1usize..=2,
    ) {
        let grid = make_uniform_grid(&[(-1.0, 2.0, 80)]).unwrap();
        let data = sample_function(&grid, |c| poly(&coeffs, c[0])).unwrap();
        let cfg = DiffConfig::SavGol(SavGolConfig { window_half: m, poly_order: 4 });
        let res = differentiate(&data, DiffRequest::new(0, order), &cfg).unwrap();
        for i in 0..grid.len() {
            let on_band = i < m || i >= grid.len() - m;
            prop_assert_eq!(res.valid_mask[i], !on_band);
            if res.valid_mask[i] {
                let x = grid.coords(i)[0];
                let want = poly_derivative(&coeffs, x, order);
                prop_assert!((res.derivative.values()[i] - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn central_fd_exact_on_quadratics(
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        c in -5.0..5.0f64,
        n in 5usize..60,
    ) {
        let grid = make_uniform_grid(&[(-1.0, 1.5, n)]).unwrap();
        let data = sample_function(&grid, |x| a + b * x[0] + c * x[0] * x[0]).unwrap();
        let cfg = DiffConfig::FiniteDiff { scheme: FdScheme::Central };
        let d1 = differentiate(&data, DiffRequest::new(0, 1), &cfg).unwrap();
        let d2 = differentiate(&data, DiffRequest::new(0, 2), &cfg).unwrap();
        for i in 0..n {
            let interior = i > 0 && i < n - 1;
            prop_assert_eq!(d1.valid_mask[i], interior);
            if interior {
                let x = grid.coords(i)[0];
                prop_assert!((d1.derivative.values()[i] - (b + 2.0 * c * x)).abs() <= 1e-10 * (1.0 + b.abs() + c.abs()));
                // the second-difference stencil divides cancellation error by h^2
                prop_assert!((d2.derivative.values()[i] - 2.0 * c).abs() <= 1e-10 * (n * n) as f64);
            }
        }
    }

    #[test]
    fn spectral_exact_on_periodic_band(
        amps in proptest::collection::vec(-1.0..1.0f64, 6),
        order in 1usize..=2,
    ) {
        // frequencies 1..=6 with retained 60 and s = 8: gain differs from 1 by < 1e-15
        let n = 128;
        let period = 3.0;
        let grid = make_uniform_grid(&[(0.0, period * (n as f64 - 1.0) / n as f64, n)]).unwrap();
        let w = 2.0 * PI / period;
        let data = sample_function(&grid, |c| {
            amps.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * w * c[0] + k as f64).sin()).sum()
        }).unwrap();
        let cfg = DiffConfig::Spectral(SpectralConfig { retained: 60, steepness: 8, detrend: false });
        let res = differentiate(&data, DiffRequest::new(0, order), &cfg).unwrap();
        for i in 0..n {
            let t = grid.coords(i)[0];
            let want: f64 = amps.iter().enumerate().map(|(k, a)| {
                let kw = (k + 1) as f64 * w;
                let phase = kw * t + k as f64;
                if order == 1 { a * kw * phase.cos() } else { -a * kw * kw * phase.sin() }
            }).sum();
            prop_assert!((res.derivative.values()[i] - want).abs() <= 1e-8);
        }
    }

    #[test]
    fn dft_round_trip(values in proptest::collection::vec(-10.0..10.0f64, 1..200)) {
        let back = idft(&dft(&values).unwrap()).unwrap();
        for (a, b) in values.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn butterworth_gain_is_monotone(retained in 1usize..50, steepness in 1u32..9) {
        let n = 101;
        let cfg = SpectralConfig { retained, steepness, detrend: false };
        let gains: Vec<f64> = (0..=50).map(|k| butterworth_gain(k, n, &cfg)).collect();
        prop_assert_eq!(gains[0], 1.0);
        for w in gains.windows(2) {
            prop_assert!(w[1] <= w[0] && w[1] > 0.0);
        }
    }

    #[test]
    fn filtered_spectrum_never_gains_energy(
        values in proptest::collection::vec(-1.0..1.0f64, 32..96),
        retained in 1usize..15,
    ) {
        let n = values.len();
        let grid = make_uniform_grid(&[(0.0, 1.0, n)]).unwrap();
        let data = Field::new(grid.clone(), values).unwrap();
        let filtered = DiffConfig::Spectral(SpectralConfig { retained, steepness: 2, detrend: false });
        let unfiltered = DiffConfig::Spectral(SpectralConfig { retained: (n - 1) / 2, steepness: 64, detrend: false });
        let energy = |cfg: &DiffConfig| -> f64 {
            differentiate(&data, DiffRequest::new(0, 1), cfg).unwrap().derivative.values().iter().map(|v| v * v).sum()
        };
        prop_assert!(energy(&filtered) <= energy(&unfiltered) * (1.0 + 1e-12));
    }

    #[test]
    fn tv_exact_on_affine_data(
        a in -3.0..3.0f64,
        slope in -3.0..3.0f64,
        n in 5usize..80,
        mu in 1.0..500.0f64,
    ) {
        let grid = make_uniform_grid(&[(0.0, 1.0, n)]).unwrap();
        let data = sample_function(&grid, |c| a + slope * c[0]).unwrap();
        let cfg = DiffConfig::TotalVariation(TvConfig { mu, iterations: 20, epsilon: 1e-6 });
        let res = differentiate(&data, DiffRequest::new(0, 1), &cfg).unwrap();
        prop_assert!(res.valid_mask.iter().all(|&m| m));
        for v in res.derivative.values() {
            prop_assert!((v - slope).abs() <= 1e-6);
        }
    }
}

#[test]
fn spectral_is_bit_deterministic() {
    let grid = make_uniform_grid(&[(0.0, 1.0, 257)]).unwrap();
    let data = sample_function(&grid, |c| (7.0 * c[0]).sin() + c[0] * c[0]).unwrap();
    let cfg = DiffConfig::Spectral(SpectralConfig { retained: 30, steepness: 4, detrend: true });
    let a = differentiate(&data, DiffRequest::new(0, 2), &cfg).unwrap();
    let b = differentiate(&data, DiffRequest::new(0, 2), &cfg).unwrap();
    assert_eq!(a, b);
}
