//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::BenchmarkKind;
use crate::diff::DiffConfig;
use crate::discovery::EvolutionParams;
use crate::error::{Error, Result};
use crate::grid::{make_uniform_grid, Grid};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "STABLE_DIFF_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Stlsq,
    Evolutionary,
}

/// Where library feature columns come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// Clean states as features, only the target derivative is estimated
    /// from noisy data.
    Clean,
    /// Everything derived from the noisy fields.
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub backend: Option<Backend>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Polynomial degree of the state library (linear2d).
    #[serde(default = "default_degree")]
    pub degree: u32,
    /// Explicit right-hand term ids; replaces the benchmark's default pool.
    pub terms: Option<Vec<String>>,
    pub features: Option<FeatureSource>,
    #[serde(default)]
    pub evolution: EvolutionParams,
}

fn default_threshold() -> f64 {
    0.1
}
fn default_max_iter() -> usize {
    10
}
fn default_degree() -> u32 {
    2
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            backend: None,
            threshold: default_threshold(),
            max_iter: default_max_iter(),
            degree: default_degree(),
            terms: None,
            features: None,
            evolution: EvolutionParams::default(),
        }
    }
}

impl DiscoveryConfig {
    pub fn backend_for(&self, kind: BenchmarkKind) -> Backend {
        self.backend.unwrap_or(match kind {
            BenchmarkKind::Linear2d => Backend::Stlsq,
            _ => Backend::Evolutionary,
        })
    }

    pub fn features_for(&self, kind: BenchmarkKind) -> FeatureSource {
        self.features.unwrap_or(match kind {
            BenchmarkKind::Linear2d => FeatureSource::Clean,
            _ => FeatureSource::Noisy,
        })
    }

    /// Default right-hand terms per benchmark.
    pub fn term_ids(&self, kind: BenchmarkKind) -> Vec<String> {
        if let Some(t) = &self.terms {
            return t.clone();
        }
        match kind {
            BenchmarkKind::Linear2d => crate::discovery::polynomial_terms(&["x", "y"], self.degree)
                .iter()
                .map(|t| t.id())
                .collect(),
            BenchmarkKind::Oscillator => vec!["u".into(), "u_t".into()],
            BenchmarkKind::Wave => {
                ["u", "u_t", "u_x", "u_xx", "u*u_x"].iter().map(|s| s.to_string()).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisExtent {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkKind,
    /// Overrides the benchmark's default grid, one entry per axis.
    pub grid: Option<Vec<AxisExtent>>,
    /// Overrides default initial conditions (linear2d, oscillator).
    pub initial_conditions: Option<[f64; 2]>,
    /// Method tables; each may carry a `sweep` table of parameter lists.
    pub methods: Vec<toml::Table>,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    pub runs: Option<usize>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

fn default_kappas() -> Vec<f64> {
    vec![0.0, 0.01, 0.03, 0.05, 0.1]
}

/// One method-parameter cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCell {
    pub config: DiffConfig,
    /// `window_half=25`, empty when the entry has no sweep.
    pub sweep_label: String,
    /// Value of the first swept parameter, when numeric.
    pub sweep_value: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn runs(&self) -> usize {
        self.runs.unwrap_or(match self.benchmark {
            BenchmarkKind::Linear2d => 25,
            _ => 10,
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        match &self.grid {
            None => Ok(self.benchmark.default_grid()),
            Some(axes) => {
                let ext: Vec<_> = axes.iter().map(|a| (a.start, a.stop, a.n)).collect();
                make_uniform_grid(&ext)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if self.kappas.is_empty() {
            return Err(Error::InvalidConfig("at least one noise level is required".into()));
        }
        if let Some(k) = self.kappas.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(Error::InvalidConfig(format!("noise level must be >= 0, got {k}")));
        }
        if self.runs() == 0 {
            return Err(Error::InvalidConfig("runs must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        self.grid()?;
        self.discovery.evolution.validate()?;
        self.method_cells()?;
        Ok(())
    }

    /// Expands every method table into its sweep cells, in file order; the
    /// swept keys vary as a Cartesian product in key order.
    pub fn method_cells(&self) -> Result<Vec<MethodCell>> {
        let mut cells = Vec::new();
        for table in &self.methods {
            cells.extend(expand_method(table)?);
        }
        Ok(cells)
    }
}

fn expand_method(table: &toml::Table) -> Result<Vec<MethodCell>> {
    let mut base = table.clone();
    let sweep = match base.remove("sweep") {
        None => toml::Table::new(),
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(Error::InvalidConfig("`sweep` must be a table of lists".into())),
    };
    let mut combos: Vec<Vec<(String, toml::Value)>> = vec![vec![]];
    for (key, values) in &sweep {
        let toml::Value::Array(values) = values else {
            return Err(Error::InvalidConfig(format!("sweep `{key}` must be a list")));
        };
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!("sweep `{key}` is empty")));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|combo| {
            let mut t = base.clone();
            for (k, v) in &combo {
                t.insert(k.clone(), v.clone());
            }
            let config: DiffConfig = toml::Value::Table(t)
                .try_into()
                .map_err(|e| Error::InvalidConfig(format!("bad method table: {e}")))?;
            let sweep_label =
                combo.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",");
            let sweep_value = combo.first().and_then(|(_, v)| match v {
                toml::Value::Integer(i) => Some(*i as f64),
                toml::Value::Float(f) => Some(*f),
                _ => None,
            });
            Ok(MethodCell { config, sweep_label, sweep_value })
        })
        .collect()
}

/// Worker count: explicit value, else the environment variable, else the
/// number of available cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(w) = explicit {
        return if w == 0 { Err(Error::InvalidConfig("workers must be >= 1".into())) } else { Ok(w) };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::SavGolConfig;

    const SAMPLE: &str = r#"
benchmark = "oscillator"
kappas = [0.0, 0.1]
runs = 3
base_seed = 7

[[methods]]
method = "finite_diff"

[[methods]]
method = "savgol"
poly_order = 3
sweep = { window_half = [10, 20, 30] }

[discovery.evolution]
population = 12
"#;

    #[test]
    fn sweep_expansion() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let cells = cfg.method_cells().unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].sweep_label, "");
        assert_eq!(cells[2].config, DiffConfig::SavGol(SavGolConfig { window_half: 20, poly_order: 3 }));
        assert_eq!(cells[2].sweep_label, "window_half=20");
        assert_eq!(cells[3].sweep_value, Some(30.0));
        assert_eq!(cfg.discovery.evolution.population, 12);
        assert_eq!(cfg.discovery.backend_for(cfg.benchmark), Backend::Evolutionary);
        assert_eq!(cfg.grid().unwrap().len(), 1000);
    }

    #[test]
    fn cartesian_sweeps() {
        let text = r#"
benchmark = "wave"
[[methods]]
method = "spectral"
sweep = { retained = [5, 10], steepness = [2, 4, 8] }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.method_cells().unwrap().len(), 6);
        assert_eq!(cfg.runs(), 10);
        assert_eq!(cfg.kappas, vec![0.0, 0.01, 0.03, 0.05, 0.1]);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            "benchmark = \"heat\"\nmethods = [{method = \"spectral\"}]",
            "benchmark = \"wave\"\nmethods = []",
            "benchmark = \"wave\"\nkappas = [-1.0]\nmethods = [{method = \"spectral\"}]",
            "benchmark = \"wave\"\nruns = 0\nmethods = [{method = \"spectral\"}]",
            "benchmark = \"wave\"\nmethods = [{method = \"spline\"}]",
            "benchmark = \"wave\"\nmethods = [{method = \"savgol\", sweep = { window_half = [] }}]",
            "benchmark = \"wave\"\ncolour = 1\nmethods = [{method = \"spectral\"}]",
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn explicit_workers() {
        assert_eq!(resolve_workers(Some(3)).unwrap(), 3);
        assert!(resolve_workers(Some(0)).is_err());
    }
}
