//! Total-variation regularised differentiation of 1-D lines.
//!
//! The derivative `g` minimises
//!
//! ```text
//! sum_i sqrt((g[i+1] - g[i])^2 + eps^2) + mu/2 * sum_i ((K g)[i] - u[i])^2
//! ```
//!
//! where `K` is trapezoidal integration anchored at `u[0]`. Minimisation uses
//! lagged diffusivity: the TV weights are frozen at the previous iterate and
//! the resulting quadratic problem is solved exactly.
//!
//! `K` is dense, but `K = h L A` with `L` the cumulative-sum matrix and `A`
//! the two-point average, and `(L^T L)^-1` is tridiagonal. Introducing
//! `q = L^T (K' g - r)` turns the normal equations into a banded saddle-point
//! system in `(g, q)` that is solved in linear time.

use serde::{Deserialize, Serialize};

use super::{fd, DiffRequest, DiffResult, FdScheme};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::linalg::BandMatrix;

/// Allowed relative objective increase per iteration before the solver is
/// considered faulty.
const MONOTONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvConfig {
    /// Fidelity weight.
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Smoothing of `|.|` at zero.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_mu() -> f64 {
    100.0
}
fn default_iterations() -> usize {
    50
}
fn default_epsilon() -> f64 {
    1e-6
}

impl Default for TvConfig {
    fn default() -> Self {
        Self { mu: default_mu(), iterations: default_iterations(), epsilon: default_epsilon() }
    }
}

impl TvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("TV mu must be > 0, got {}", self.mu)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "TV epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("TV iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Trapezoidal antiderivative with `(K g)[0] = u0`.
pub fn cumulative_integral(g: &[f64], step: f64, u0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    let mut acc = u0;
    for (i, &v) in g.iter().enumerate() {
        if i > 0 {
            acc += step * 0.5 * (g[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

fn tv_term(g: &[f64], eps: f64) -> f64 {
    g.windows(2).map(|w| ((w[1] - w[0]).powi(2) + eps * eps).sqrt()).sum()
}

fn fidelity_term(g: &[f64], data: &[f64], step: f64) -> f64 {
    cumulative_integral(g, step, data[0])
        .iter()
        .zip(data)
        .map(|(k, u)| (k - u).powi(2))
        .sum()
}

/// Value of the regularised functional for candidate derivative `g`.
pub fn tv_objective(g: &[f64], data: &[f64], step: f64, cfg: &TvConfig) -> Result<f64> {
    if g.len() != data.len() || g.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "derivative length {} does not match data length {}",
            g.len(),
            data.len()
        )));
    }
    Ok(tv_term(g, cfg.epsilon) + 0.5 * cfg.mu * fidelity_term(g, data, step))
}

/// One lagged-diffusivity step: minimises the quadratic TV majoriser at `g`.
fn lagged_step(g: &[f64], data: &[f64], step: f64, cfg: &TvConfig) -> Result<Vec<f64>> {
    let n = g.len();
    let m = n - 1;
    let weights: Vec<f64> = g
        .windows(2)
        .map(|w| 1.0 / ((w[1] - w[0]).powi(2) + cfg.epsilon * cfg.epsilon).sqrt())
        .collect();
    let (mu, h) = (cfg.mu, step);
    let gi = |j: usize| 2 * j;
    let qi = |i: usize| 2 * i + 1;
    let mut a = BandMatrix::zeros(n + m, 2, 2);
    let mut rhs = vec![0.0; n + m];

    // D^T W D
    for (i, &w) in weights.iter().enumerate() {
        a.add(gi(i), gi(i), w);
        a.add(gi(i + 1), gi(i + 1), w);
        a.add(gi(i), gi(i + 1), -w);
        a.add(gi(i + 1), gi(i), -w);
    }
    // Coupling mu h A^T q and mu h A g, with (A g)_i = (g_i + g_{i+1}) / 2.
    let c = 0.5 * mu * h;
    for i in 0..m {
        for j in [i, i + 1] {
            a.add(gi(j), qi(i), c);
            a.add(qi(i), gi(j), c);
        }
    }
    // -mu (E E^T) q = mu E r
    let u0 = data[0];
    for i in 0..m {
        a.add(qi(i), qi(i), -mu * if i == 0 { 1.0 } else { 2.0 });
        if i + 1 < m {
            a.add(qi(i), qi(i + 1), mu);
            a.add(qi(i + 1), qi(i), mu);
        }
        let r_i = data[i + 1] - u0;
        let r_prev = if i == 0 { 0.0 } else { data[i] - u0 };
        rhs[qi(i)] = mu * (r_i - r_prev);
    }
    let x = a.solve(&rhs)?;
    Ok((0..n).map(|j| x[gi(j)]).collect())
}

/// TV derivative of one line and the objective value after every iteration
/// (index 0 is the finite-difference starting point).
pub fn tv_line(data: &[f64], step: f64, cfg: &TvConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    if data.len() < 3 {
        return Err(Error::InvalidConfig("TV differentiation needs at least 3 samples".into()));
    }
    let (mut g, _) = fd::fd_line(data, step, 1, FdScheme::Central);
    let mut trace = vec![tv_objective(&g, data, step, cfg)?];
    for iteration in 1..=cfg.iterations {
        let next = lagged_step(&g, data, step, cfg)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        let value = tv_objective(&next, data, step, cfg)?;
        let previous = *trace.last().unwrap();
        if value > previous + MONOTONE_TOL * previous.abs().max(1.0) {
            return Err(Error::ObjectiveIncreased { iteration, previous, current: value });
        }
        trace.push(value);
        g = next;
    }
    Ok((g, trace))
}

fn tv_pass(data: &Field, axis: usize, cfg: &TvConfig) -> Result<Field> {
    let step = data.grid().step(axis);
    let (values, _) = data.map_lines(axis, |line| {
        let (g, _) = tv_line(line, step, cfg)?;
        Ok((g, vec![true; line.len()]))
    })?;
    Field::new(data.grid().clone(), values)
}

/// First derivatives come straight from the solver; second derivatives apply
/// it again to the first-derivative estimate.
pub fn tv_differentiate(data: &Field, req: DiffRequest, cfg: &TvConfig) -> Result<DiffResult> {
    req.validate(data.grid())?;
    cfg.validate()?;
    let mut derivative = tv_pass(data, req.axis, cfg)?;
    if req.order == 2 {
        derivative = tv_pass(&derivative, req.axis, cfg)?;
    }
    let len = derivative.len();
    Ok(DiffResult { derivative, valid_mask: vec![true; len], reapplied: req.order == 2 })
}
