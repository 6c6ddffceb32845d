//! Savitzky-Golay differentiation with a Chebyshev basis.
//!
//! Every window of `2M + 1` samples is mapped affinely onto `[-1, 1]` and fit
//! in the least-squares sense by a series `sum_k a_k T_k(x)`, `k = 0..=n`. The
//! fitted series is differentiated analytically at the window centre using
//! `T_k' = k U_{k-1}` (first order) or the Chebyshev derivative-coefficient
//! recurrence applied twice (second order), then scaled by the chain-rule
//! factor of the affine map.
//!
//! On a uniform grid the fit is the same linear functional of the window
//! samples at every node, so the derivative is applied as a precomputed
//! kernel. [`fit_window`] exposes the per-window fit itself.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DiffRequest, DiffResult};
use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChebyshevKind {
    /// `T_m`
    First,
    /// `U_m`
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavGolConfig {
    /// `M`: the window holds `2M + 1` samples.
    #[serde(default = "default_window_half")]
    pub window_half: usize,
    /// Highest Chebyshev degree in the fit.
    #[serde(default = "default_poly_order")]
    pub poly_order: usize,
}

fn default_window_half() -> usize {
    10
}

fn default_poly_order() -> usize {
    4
}

impl Default for SavGolConfig {
    fn default() -> Self {
        Self { window_half: default_window_half(), poly_order: default_poly_order() }
    }
}

impl SavGolConfig {
    pub fn window_len(&self) -> usize {
        2 * self.window_half + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_half < 1 {
            return Err(Error::InvalidConfig("Savitzky-Golay window_half must be >= 1".into()));
        }
        if self.poly_order == 0 || self.poly_order >= self.window_len() {
            return Err(Error::InvalidConfig(format!(
                "Savitzky-Golay poly_order must satisfy 0 < n < 2M+1 = {}, got {}",
                self.window_len(),
                self.poly_order
            )));
        }
        Ok(())
    }
}

/// Chebyshev polynomial of the first or second kind by the three-term recurrence.
pub fn chebyshev_eval(kind: ChebyshevKind, m: i64, x: f64) -> Result<f64> {
    if m < 0 {
        return Err(Error::InvalidConfig(format!("Chebyshev degree must be >= 0, got {m}")));
    }
    let mut prev = 1.0;
    let mut cur = match kind {
        ChebyshevKind::First => x,
        ChebyshevKind::Second => 2.0 * x,
    };
    if m == 0 {
        return Ok(prev);
    }
    for _ in 1..m {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `T_0(x) ..= T_n(x)`.
fn chebyshev_row(n: usize, x: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(n + 1);
    row.push(1.0);
    if n >= 1 {
        row.push(x);
    }
    for k in 2..=n {
        row.push(2.0 * x * row[k - 1] - row[k - 2]);
    }
    row
}

/// Coefficients of the derivative of a Chebyshev series, in the same basis.
pub fn chebyshev_derivative_coeffs(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 1];
    for k in (1..n).rev() {
        d[k - 1] = d[k + 1] + 2.0 * k as f64 * coeffs[k];
    }
    d[0] *= 0.5;
    d.truncate(n - 1);
    d
}

/// Evaluates `sum_k c_k T_k(x)`.
pub fn chebyshev_series(coeffs: &[f64], x: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    chebyshev_row(coeffs.len() - 1, x)
        .iter()
        .zip(coeffs)
        .map(|(t, c)| t * c)
        .sum()
}

/// Derivative of `sum_k c_k T_k` at `x` through `T_k' = k U_{k-1}`.
pub fn chebyshev_series_derivative(coeffs: &[f64], x: f64) -> f64 {
    let mut u_prev = 0.0; // U_{-1}
    let mut u = 1.0; // U_0
    let mut acc = 0.0;
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        acc += c * k as f64 * u;
        let next = 2.0 * x * u - u_prev;
        u_prev = u;
        u = next;
    }
    acc
}

fn map_to_unit(coords: &[f64]) -> Result<Vec<f64>> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::InvalidConfig("window needs at least two coordinates".into()));
    }
    let (lo, hi) = (coords[0], coords[n - 1]);
    let step = (hi - lo) / (n - 1) as f64;
    for (i, w) in coords.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::InvalidConfig("window coordinates must increase".into()));
        }
        let expected = lo + (i + 1) as f64 * step;
        if (w[1] - expected).abs() > 1e-9 * step.abs().max(expected.abs()) {
            return Err(Error::InvalidConfig("window coordinates must be uniform".into()));
        }
    }
    Ok(coords.iter().map(|c| (2.0 * c - (lo + hi)) / (hi - lo)).collect())
}

/// Least-squares Chebyshev coefficients `a_0 ..= a_n` for one window.
pub fn fit_window(samples: &[f64], coords: &[f64], n: usize) -> Result<Vec<f64>> {
    if samples.len() != coords.len() {
        return Err(Error::InvalidConfig(format!(
            "{} samples for {} coordinates",
            samples.len(),
            coords.len()
        )));
    }
    if n >= samples.len() {
        return Err(Error::InvalidConfig(format!(
            "polynomial degree {n} needs more than {} samples",
            samples.len()
        )));
    }
    let x = map_to_unit(coords)?;
    let design = DMatrix::from_fn(x.len(), n + 1, |i, k| chebyshev_row(n, x[i])[k]);
    let qr = design.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(Error::RankDeficient);
    }
    let rhs = qr.q().transpose() * DVector::from_column_slice(samples);
    let alpha = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient)?;
    Ok(alpha.iter().copied().collect())
}

/// Centre-derivative weights in unit coordinates: `d^order/dx^order` of the
/// least-squares fit at `x = 0`, as a linear functional of the window samples.
fn centre_kernel(cfg: &SavGolConfig, order: usize) -> Result<Vec<f64>> {
    let m = cfg.window_half as f64;
    let len = cfg.window_len();
    let n = cfg.poly_order;
    let design = DMatrix::from_fn(len, n + 1, |i, k| {
        chebyshev_row(n, (i as f64 - m) / m)[k]
    });
    // Functional on the coefficient vector.
    let functional: Vec<f64> = (0..=n)
        .map(|k| {
            let mut unit = vec![0.0; n + 1];
            unit[k] = 1.0;
            match order {
                1 => chebyshev_series_derivative(&unit, 0.0),
                _ => chebyshev_series(
                    &chebyshev_derivative_coeffs(&chebyshev_derivative_coeffs(&unit)),
                    0.0,
                ),
            }
        })
        .collect();
    let qr = design.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(Error::RankDeficient);
    }
    // alpha = R^-1 Q^T u, so e^T alpha = (Q R^-T e)^T u.
    let y = r
        .transpose()
        .solve_lower_triangular(&DVector::from_vec(functional))
        .ok_or(Error::RankDeficient)?;
    let w = qr.q() * y;
    Ok(w.iter().copied().collect())
}

pub fn savgol_differentiate(data: &Field, req: DiffRequest, cfg: &SavGolConfig) -> Result<DiffResult> {
    req.validate(data.grid())?;
    cfg.validate()?;
    let axis = data.grid().axis(req.axis);
    if axis.n < cfg.window_len() {
        return Err(Error::InvalidConfig(format!(
            "Savitzky-Golay window of {} samples exceeds the {} nodes along `{}`",
            cfg.window_len(),
            axis.n,
            axis.name
        )));
    }
    let kernel = centre_kernel(cfg, req.order)?;
    // x = (t - t_i) / (M h)
    let factor = (1.0 / (cfg.window_half as f64 * axis.step())).powi(req.order as i32);
    let m = cfg.window_half;
    let (values, valid_mask) = data.map_lines(req.axis, |line| {
        let len = line.len();
        let mut d = vec![0.0; len];
        let mut valid = vec![false; len];
        for i in m..len - m {
            let window = &line[i - m..=i + m];
            d[i] = factor * kernel.iter().zip(window).map(|(w, u)| w * u).sum::<f64>();
            valid[i] = true;
        }
        // Boundary bands carry the nearest interior value.
        let (first, last) = (d[m], d[len - 1 - m]);
        d[..m].fill(first);
        d[len - m..].fill(last);
        Ok((d, valid))
    })?;
    Ok(DiffResult {
        derivative: Field::new(data.grid().clone(), values)?,
        valid_mask,
        reapplied: false,
    })
}
