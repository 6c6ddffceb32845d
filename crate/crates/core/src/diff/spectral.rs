//! Fourier-domain differentiation with Butterworth low-pass damping.
//!
//! The forward transform carries the `1/N` factor:
//! `c_k = (1/N) sum_n u_n exp(-2 pi i n k / N)`, and the inverse is the plain
//! sum. A line of `N` samples with spacing `h` is treated as one period of
//! length `T = N h`. Component `k` of the derivative spectrum is
//! `G(k/N) (2 pi i k / T)^order c_k`, with the conjugate factor on bin `N - k`.
//! The Nyquist bin of even-length lines is dropped.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{DiffRequest, DiffResult};
use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    /// Cutoff expressed as a frequency count: `omega_cutoff = retained / N`.
    #[serde(default = "default_retained")]
    pub retained: usize,
    /// Butterworth steepness `s`.
    #[serde(default = "default_steepness")]
    pub steepness: u32,
    /// Remove the line through the end points before transforming.
    #[serde(default)]
    pub detrend: bool,
}

fn default_retained() -> usize {
    10
}

fn default_steepness() -> u32 {
    4
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { retained: default_retained(), steepness: default_steepness(), detrend: false }
    }
}

impl SpectralConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 8 {
            return Err(Error::InvalidConfig(format!(
                "spectral differentiation needs at least 8 samples per line, got {n}"
            )));
        }
        let max = (n - 1) / 2;
        if self.retained == 0 || self.retained > max {
            return Err(Error::InvalidConfig(format!(
                "retained frequency count must be in 1..={max} for {n} samples, got {}",
                self.retained
            )));
        }
        if self.steepness < 1 {
            return Err(Error::InvalidConfig("Butterworth steepness must be >= 1".into()));
        }
        Ok(())
    }
}

/// `G(k/N) = 1 / (1 + ((k/N) / (retained/N))^(2s))`.
pub fn butterworth_gain(k: usize, n: usize, cfg: &SpectralConfig) -> f64 {
    let omega = k as f64 / n as f64;
    let cutoff = cfg.retained as f64 / n as f64;
    1.0 / (1.0 + (omega / cutoff).powi(2 * cfg.steepness as i32))
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let n = values.len() as f64;
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf.iter_mut().for_each(|c| *c /= n);
        buf
    }

    fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }
}

/// Forward transform with the `1/N` normalisation (fast path for every `N`).
pub fn dft(values: &[f64]) -> Result<Vec<Complex64>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("cannot transform an empty signal".into()));
    }
    Ok(Plans::new(values.len()).forward(values))
}

/// Direct `O(N^2)` evaluation of the same transform.
pub fn dft_direct(values: &[f64]) -> Result<Vec<Complex64>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("cannot transform an empty signal".into()));
    }
    let n = values.len();
    Ok((0..n)
        .map(|k| {
            values
                .iter()
                .enumerate()
                .map(|(j, &u)| {
                    let phase = -TAU * ((j * k) % n) as f64 / n as f64;
                    Complex64::from_polar(u, phase)
                })
                .sum::<Complex64>()
                / n as f64
        })
        .collect())
}

/// Inverse transform of the spectrum of a real signal.
pub fn idft(coeffs: &[Complex64]) -> Result<Vec<f64>> {
    if coeffs.is_empty() {
        return Err(Error::InvalidConfig("cannot transform an empty spectrum".into()));
    }
    let n = coeffs.len();
    let scale = coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let deviation = (0..n)
        .map(|k| (coeffs[k] - coeffs[(n - k) % n].conj()).norm())
        .fold(0.0, f64::max);
    if deviation > 1e-9 * scale {
        return Err(Error::AsymmetricSpectrum(deviation));
    }
    Ok(Plans::new(n).inverse_real(coeffs))
}

fn differentiate_line(
    plans: &Plans,
    line: &[f64],
    step: f64,
    order: usize,
    cfg: &SpectralConfig,
) -> Vec<f64> {
    let n = line.len();
    let (work, slope) = if cfg.detrend {
        let span = (n - 1) as f64;
        let (a, b) = (line[0], line[n - 1]);
        let detrended: Vec<f64> =
            line.iter().enumerate().map(|(i, &u)| u - (a + (b - a) * i as f64 / span)).collect();
        (detrended, (b - a) / (span * step))
    } else {
        (line.to_vec(), 0.0)
    };
    let spec = plans.forward(&work);
    let period = n as f64 * step;
    let mut deriv = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=(n - 1) / 2 {
        let w = Complex64::new(0.0, TAU * k as f64 / period);
        let factor = w.powu(order as u32) * butterworth_gain(k, n, cfg);
        deriv[k] = factor * spec[k];
        deriv[n - k] = factor.conj() * spec[n - k];
    }
    let mut out = plans.inverse_real(&deriv);
    if order == 1 && slope != 0.0 {
        out.iter_mut().for_each(|v| *v += slope);
    }
    out
}

pub fn spectral_differentiate(
    data: &Field,
    req: DiffRequest,
    cfg: &SpectralConfig,
) -> Result<DiffResult> {
    req.validate(data.grid())?;
    let axis = data.grid().axis(req.axis);
    cfg.validate(axis.n)?;
    let plans = Plans::new(axis.n);
    let step = axis.step();
    let (values, valid_mask) = data.map_lines(req.axis, |line| {
        Ok((differentiate_line(&plans, line, step, req.order, cfg), vec![true; line.len()]))
    })?;
    Ok(DiffResult {
        derivative: Field::new(data.grid().clone(), values)?,
        valid_mask,
        reapplied: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_uniform_grid, sample_function, Grid};

    fn periodic_grid(n: usize, period: f64) -> Grid {
        make_uniform_grid(&[(0.0, period * (n - 1) as f64 / n as f64, n)]).unwrap()
    }

    #[test]
    fn dc_only_signal() {
        let c = dft(&[3.5; 12]).unwrap();
        assert!((c[0].re - 3.5).abs() < 1e-12 && c[0].im.abs() < 1e-12);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn cosine_splits_between_conjugate_bins() {
        let n = 20;
        let u: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).cos()).collect();
        let c = dft(&u).unwrap();
        for (k, z) in c.iter().enumerate() {
            let expected = if k == 1 || k == n - 1 { 0.5 } else { 0.0 };
            assert!((z.re - expected).abs() < 1e-12 && z.im.abs() < 1e-12, "bin {k}");
        }
    }

    #[test]
    fn fast_matches_direct_and_round_trips() {
        for n in [16usize, 100, 101] {
            let u: Vec<f64> = (0..n).map(|j| ((j * 7919) % 113) as f64 / 13.0 - 4.0).collect();
            let fast = dft(&u).unwrap();
            let slow = dft_direct(&u).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-12);
            }
            let back = idft(&fast).unwrap();
            for (a, b) in back.iter().zip(&u) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn inverse_special_cases() {
        let zeros = vec![Complex64::new(0.0, 0.0); 9];
        assert!(idft(&zeros).unwrap().iter().all(|&v| v == 0.0));
        let mut dc = zeros.clone();
        dc[0] = Complex64::new(5.0, 0.0);
        assert!(idft(&dc).unwrap().iter().all(|v| (v - 5.0).abs() < 1e-12));
        let mut bad = zeros;
        bad[1] = Complex64::new(1.0, 0.0);
        assert!(matches!(idft(&bad), Err(Error::AsymmetricSpectrum(_))));
        assert!(dft(&[]).is_err());
    }

    #[test]
    fn gain_values() {
        let cfg = SpectralConfig { retained: 8, steepness: 4, detrend: false };
        assert_eq!(butterworth_gain(8, 100, &cfg), 0.5);
        assert_eq!(butterworth_gain(0, 100, &cfg), 1.0);
        assert!((butterworth_gain(16, 100, &cfg) - 1.0 / 257.0).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=50 {
            let g = butterworth_gain(k, 100, &cfg);
            assert!(g <= prev && g > 0.0);
            prev = g;
        }
    }

    #[test]
    fn unfiltered_sine_derivative() {
        let period = 2.0;
        let g = periodic_grid(128, period);
        let f = sample_function(&g, |c| (TAU * c[0] / period).sin()).unwrap();
        let cfg = SpectralConfig { retained: 63, steepness: 4, detrend: false };
        let r = spectral_differentiate(&f, DiffRequest::new(0, 1), &cfg).unwrap();
        for i in 0..g.len() {
            let t = g.coords(i)[0];
            let exact = TAU / period * (TAU * t / period).cos();
            assert!((r.derivative.values()[i] - exact).abs() <= 1e-8);
        }
        assert!(r.valid_mask.iter().all(|&m| m));
    }

    #[test]
    fn high_frequency_component_suppressed() {
        let period = 1.0;
        let g = periodic_grid(256, period);
        let f = sample_function(&g, |c| {
            (TAU * c[0] / period).sin() + 0.01 * (20.0 * TAU * c[0] / period).sin()
        })
        .unwrap();
        let cfg = SpectralConfig { retained: 3, steepness: 4, detrend: false };
        let r = spectral_differentiate(&f, DiffRequest::new(0, 1), &cfg).unwrap();
        let amp = TAU / period;
        let worst = (0..g.len())
            .map(|i| (r.derivative.values()[i] - amp * (TAU * g.coords(i)[0] / period).cos()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.02 * amp, "max error {worst}");
    }

    #[test]
    fn second_order_by_squared_factor() {
        let period = 3.0;
        let g = periodic_grid(90, period);
        let w = 2.0 * TAU / period;
        let f = sample_function(&g, |c| (w * c[0]).cos()).unwrap();
        let cfg = SpectralConfig { retained: 40, steepness: 12, detrend: false };
        let r = spectral_differentiate(&f, DiffRequest::new(0, 2), &cfg).unwrap();
        for i in 0..g.len() {
            let exact = -w * w * (w * g.coords(i)[0]).cos();
            assert!((r.derivative.values()[i] - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn detrend_restores_slope() {
        let g = make_uniform_grid(&[(0.0, 1.0, 64)]).unwrap();
        let f = sample_function(&g, |c| 3.0 * c[0] - 1.0).unwrap();
        let cfg = SpectralConfig { retained: 20, steepness: 4, detrend: true };
        let r = spectral_differentiate(&f, DiffRequest::new(0, 1), &cfg).unwrap();
        assert!(r.derivative.values().iter().all(|v| (v - 3.0).abs() < 1e-10));
        let r2 = spectral_differentiate(&f, DiffRequest::new(0, 2), &cfg).unwrap();
        assert!(r2.derivative.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn retained_out_of_range() {
        let g = make_uniform_grid(&[(0.0, 1.0, 16)]).unwrap();
        let f = Field::zeros(g);
        for retained in [0usize, 8] {
            let cfg = SpectralConfig { retained, steepness: 2, detrend: false };
            assert!(spectral_differentiate(&f, DiffRequest::new(0, 1), &cfg).is_err());
        }
        let short = Field::zeros(make_uniform_grid(&[(0.0, 1.0, 7)]).unwrap());
        let cfg = SpectralConfig { retained: 2, steepness: 2, detrend: false };
        assert!(spectral_differentiate(&short, DiffRequest::new(0, 1), &cfg).is_err());
    }
}
