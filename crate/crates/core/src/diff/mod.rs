//! The shared differentiation contract and the method dispatcher.
//!
//! Each method lives in its own submodule and produces a [`DiffResult`]: the
//! derivative field plus a per-node validity mask. Nodes where a method
//! cannot produce interior-quality values (stencil or window boundaries) are
//! reported as invalid rather than extrapolated.

pub mod ann;
pub mod fd;
pub mod savgol;
pub mod spectral;
pub mod tv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub use ann::AnnConfig;
pub use fd::FdScheme;
pub use savgol::SavGolConfig;
pub use spectral::SpectralConfig;
pub use tv::TvConfig;

/// Which partial derivative to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffRequest {
    pub axis: usize,
    pub order: usize,
}

impl DiffRequest {
    pub fn new(axis: usize, order: usize) -> Self {
        Self { axis, order }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.axis >= grid.ndim() {
            return Err(Error::InvalidConfig(format!(
                "axis {} out of range for a {}-D grid",
                self.axis,
                grid.ndim()
            )));
        }
        if !(1..=2).contains(&self.order) {
            return Err(Error::InvalidConfig(format!(
                "derivative order must be 1 or 2, got {}",
                self.order
            )));
        }
        Ok(())
    }
}

/// Method selection with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffConfig {
    FiniteDiff {
        #[serde(default)]
        scheme: FdScheme,
    },
    #[serde(rename = "savgol", alias = "sav_gol")]
    SavGol(SavGolConfig),
    Spectral(SpectralConfig),
    #[serde(alias = "ann")]
    AnnSmooth(AnnConfig),
    #[serde(alias = "tv")]
    TotalVariation(TvConfig),
}

impl DiffConfig {
    pub fn name(&self) -> &'static str {
        match self {
            DiffConfig::FiniteDiff { .. } => "finite_diff",
            DiffConfig::SavGol(_) => "savgol",
            DiffConfig::Spectral(_) => "spectral",
            DiffConfig::AnnSmooth(_) => "ann_smooth",
            DiffConfig::TotalVariation(_) => "total_variation",
        }
    }

    /// Compact human-readable parameter summary, e.g. `M=10,n=4`.
    pub fn params_label(&self) -> String {
        match self {
            DiffConfig::FiniteDiff { scheme } => format!("scheme={}", scheme.as_str()),
            DiffConfig::SavGol(c) => format!("M={},n={}", c.window_half, c.poly_order),
            DiffConfig::Spectral(c) => format!(
                "retained={},s={}{}",
                c.retained,
                c.steepness,
                if c.detrend { ",detrend" } else { "" }
            ),
            DiffConfig::AnnSmooth(c) => format!(
                "epochs={},hidden={:?},lr={},seed={}",
                c.epochs, c.hidden_sizes, c.learning_rate, c.seed
            ),
            DiffConfig::TotalVariation(c) => {
                format!("mu={},iters={},eps={}", c.mu, c.iterations, c.epsilon)
            }
        }
    }
}

/// Derivative estimate with its validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffResult {
    pub derivative: Field,
    pub valid_mask: Vec<bool>,
    /// The requested order was obtained by applying a first-order method twice.
    pub reapplied: bool,
}

impl DiffResult {
    pub fn valid_count(&self) -> usize {
        self.valid_mask.iter().filter(|&&m| m).count()
    }
}

/// Estimates one partial derivative of `data`.
pub fn differentiate(data: &Field, req: DiffRequest, cfg: &DiffConfig) -> Result<DiffResult> {
    req.validate(data.grid())?;
    match cfg {
        DiffConfig::FiniteDiff { scheme } => fd::fd_differentiate(data, req, *scheme),
        DiffConfig::SavGol(c) => savgol::savgol_differentiate(data, req, c),
        DiffConfig::Spectral(c) => spectral::spectral_differentiate(data, req, c),
        DiffConfig::AnnSmooth(c) => ann::ann_differentiate(data, req, c),
        DiffConfig::TotalVariation(c) => tv::tv_differentiate(data, req, c),
    }
}

/// Estimates several derivatives of the same field, sharing any expensive
/// preprocessing (the network fit of the ANN method is trained once).
pub fn differentiate_many(
    data: &Field,
    reqs: &[DiffRequest],
    cfg: &DiffConfig,
) -> Result<Vec<DiffResult>> {
    for req in reqs {
        req.validate(data.grid())?;
    }
    match cfg {
        DiffConfig::AnnSmooth(c) => {
            let smooth = ann::ann_smooth(data, c)?.smoothed;
            reqs.iter()
                .map(|&req| fd::fd_differentiate(&smooth, req, FdScheme::Central))
                .collect()
        }
        _ => reqs.iter().map(|&req| differentiate(data, req, cfg)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_uniform_grid, sample_function};

    #[test]
    fn order_three_rejected_for_every_method() {
        let g = make_uniform_grid(&[(0.0, 1.0, 64)]).unwrap();
        let f = sample_function(&g, |c| c[0]).unwrap();
        let cfgs = [
            DiffConfig::FiniteDiff { scheme: FdScheme::Central },
            DiffConfig::SavGol(SavGolConfig::default()),
            DiffConfig::Spectral(SpectralConfig::default()),
            DiffConfig::AnnSmooth(AnnConfig { epochs: 1, ..AnnConfig::default() }),
            DiffConfig::TotalVariation(TvConfig::default()),
        ];
        for cfg in &cfgs {
            assert!(differentiate(&f, DiffRequest::new(0, 3), cfg).is_err(), "{}", cfg.name());
            assert!(differentiate(&f, DiffRequest::new(1, 1), cfg).is_err());
        }
    }

    #[test]
    fn central_fd_on_linear_data() {
        let g = make_uniform_grid(&[(0.0, 1.0, 11)]).unwrap();
        let f = sample_function(&g, |c| c[0]).unwrap();
        let r = differentiate(
            &f,
            DiffRequest::new(0, 1),
            &DiffConfig::FiniteDiff { scheme: FdScheme::Central },
        )
        .unwrap();
        for (v, m) in r.derivative.values().iter().zip(&r.valid_mask) {
            if *m {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_on_constant() {
        let g = make_uniform_grid(&[(0.0, 1.0, 64)]).unwrap();
        let f = sample_function(&g, |_| 4.2).unwrap();
        let r = differentiate(&f, DiffRequest::new(0, 1), &DiffConfig::Spectral(SpectralConfig::default()))
            .unwrap();
        assert!(r.derivative.values().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn config_parses_from_tagged_toml() {
        let cfg: DiffConfig = toml::from_str("method = \"savgol\"\nwindow_half = 7\npoly_order = 4\n").unwrap();
        assert_eq!(cfg, DiffConfig::SavGol(SavGolConfig { window_half: 7, poly_order: 4 }));
        let cfg: DiffConfig = toml::from_str("method = \"finite_diff\"").unwrap();
        assert_eq!(cfg, DiffConfig::FiniteDiff { scheme: FdScheme::Central });
    }
}
