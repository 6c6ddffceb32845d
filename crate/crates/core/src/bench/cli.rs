//! Command-line front end. Every flag maps onto a key of the matching TOML
//! table, so a `--config` file and flags can be mixed; flags win.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::{AxisExtent, Backend, DiscoveryConfig, ExperimentConfig};
use super::report::{emit_report, emit_summary, read_records};
use super::runner::{discover_equation, run_experiment};
use crate::datasets::{make_linear2d, make_oscillator, make_wave, BenchmarkKind};
use crate::diff::{differentiate, DiffConfig, DiffRequest};
use crate::discovery::{ModelDocument, Quantities, TermSpec, MODEL_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::grid::{make_uniform_grid, masked_mse, Field};
use crate::noise::{contaminate_stream, NoiseSpec};

#[derive(Debug, Parser)]
#[command(name = "stable-diff", version, about = "Noise-robust differentiation and equation discovery benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a benchmark's clean fields and analytic derivatives as CSV.
    Generate(GenerateArgs),
    /// Add relative Gaussian noise to a field.
    Contaminate(ContaminateArgs),
    /// Differentiate a field.
    Diff(DiffArgs),
    /// Discover the benchmark's equation(s) from field CSVs.
    Discover(DiscoverArgs),
    /// Run a full experiment from a config file.
    Sweep(SweepArgs),
    /// Rebuild summary.json and plotdata/ from records.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    benchmark: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Axis extent `start:stop:n`, repeated per axis.
    #[arg(long = "grid", value_parser = parse_extent)]
    grid: Vec<AxisExtent>,
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    initial_conditions: Option<Vec<f64>>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ContaminateArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

#[derive(Debug, Args)]
struct DiffArgs {
    input: PathBuf,
    output: PathBuf,
    /// finite_diff, savgol, spectral, ann_smooth or total_variation.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    /// Axis name or index.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    window_half: Option<usize>,
    #[arg(long)]
    poly_order: Option<usize>,
    #[arg(long)]
    retained: Option<usize>,
    #[arg(long)]
    steepness: Option<u32>,
    #[arg(long)]
    detrend: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    hidden_sizes: Option<Vec<usize>>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Analytic derivative to report the masked MSE against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Where to write the validity mask (1 valid, 0 invalid) as a field CSV.
    #[arg(long)]
    mask_out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiscoverArgs {
    #[arg(long)]
    benchmark: Option<String>,
    /// Directory of `<quantity>.csv` files, e.g. from `generate` and `diff`.
    /// A `<quantity>.mask.csv` next to a file restricts its valid nodes.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    degree: Option<u32>,
    /// Comma-separated right-hand term ids.
    #[arg(long, value_delimiter = ',')]
    terms: Option<Vec<String>>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long)]
    min_relative_gain: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `workers` and the environment default.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    records: PathBuf,
    /// Defaults to the directory holding the records file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_extent(s: &str) -> std::result::Result<AxisExtent, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:n, got `{s}`"));
    }
    let f = |p: &str| p.parse::<f64>().map_err(|_| format!("bad number `{p}`"));
    let n = parts[2].parse::<usize>().map_err(|_| format!("bad node count `{}`", parts[2]))?;
    Ok(AxisExtent { start: f(parts[0])?, stop: f(parts[1])?, n })
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code: 0 success, 1 runtime error, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_table(path: Option<&PathBuf>) -> Result<toml::Table> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<toml::Table>().map_err(|e| Error::Parse(e.to_string()))
        }
    }
}

fn set<V: Into<toml::Value>>(t: &mut toml::Table, key: &str, v: Option<V>) {
    if let Some(v) = v {
        t.insert(key.to_string(), v.into());
    }
}

fn from_table<T: serde::de::DeserializeOwned>(t: toml::Table, what: &str) -> Result<T> {
    toml::Value::Table(t).try_into().map_err(|e| Error::InvalidConfig(format!("{what}: {e}")))
}

fn take_str(t: &mut toml::Table, key: &str) -> Result<Option<String>> {
    match t.remove(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s)),
        Some(v) => Err(Error::InvalidConfig(format!("`{key}` must be a string, got {v}"))),
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Contaminate(a) => {
            let field = Field::load_csv(&a.input)?;
            let noisy = contaminate_stream(&field, NoiseSpec::new(a.kappa, a.seed)?, a.stream)?;
            noisy.save_csv(&a.output)
        }
        Command::Diff(a) => diff(a),
        Command::Discover(a) => discover(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => {
            let records = read_records(fs::File::open(&a.records)?)?;
            let dir = a.out.unwrap_or_else(|| {
                a.records.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
            });
            let summary = emit_summary(&records, &dir)?;
            println!("{} records, {} cells -> {}", records.len(), summary.cells.len(), dir.display());
            Ok(())
        }
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut t = load_table(a.config.as_ref())?;
    set(&mut t, "benchmark", a.benchmark);
    if !a.grid.is_empty() {
        let axes = a.grid.iter().map(|e| toml::Value::try_from(e).expect("extents serialize")).collect();
        t.insert("grid".into(), toml::Value::Array(axes));
    }
    if let Some(ic) = a.initial_conditions {
        t.insert("initial_conditions".into(), toml::Value::Array(ic.into_iter().map(Into::into).collect()));
    }
    set(&mut t, "out", a.out.map(|p| p.display().to_string()));

    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct GenerateConfig {
        benchmark: BenchmarkKind,
        grid: Option<Vec<AxisExtent>>,
        initial_conditions: Option<[f64; 2]>,
        out: PathBuf,
    }
    let cfg: GenerateConfig = from_table(t, "generate")?;
    let grid = match &cfg.grid {
        None => cfg.benchmark.default_grid(),
        Some(axes) => make_uniform_grid(&axes.iter().map(|e| (e.start, e.stop, e.n)).collect::<Vec<_>>())?,
    };
    let bench = match (cfg.benchmark, cfg.initial_conditions) {
        (BenchmarkKind::Linear2d, Some([x, y])) => make_linear2d(&grid, x, y)?,
        (BenchmarkKind::Oscillator, Some([u, v])) => make_oscillator(&grid, u, v)?,
        (BenchmarkKind::Wave, Some(_)) => {
            return Err(Error::InvalidConfig("the wave benchmark takes no initial conditions".into()))
        }
        (BenchmarkKind::Wave, None) => make_wave(&grid)?,
        (kind, None) => kind.build(&grid)?,
    };
    fs::create_dir_all(&cfg.out)?;
    for (name, f) in bench.fields.iter().chain(&bench.truth_derivs) {
        f.save_csv(cfg.out.join(format!("{name}.csv")))?;
    }
    let refs = serde_json::to_string_pretty(&bench.references)?;
    fs::write(cfg.out.join("reference.json"), refs + "\n")?;
    println!(
        "{}: wrote {} files to {}",
        bench.kind,
        bench.fields.len() + bench.truth_derivs.len(),
        cfg.out.display()
    );
    Ok(())
}

fn diff(a: DiffArgs) -> Result<()> {
    let mut t = load_table(a.config.as_ref())?;
    let order = match t.remove("order") {
        None => None,
        Some(toml::Value::Integer(i)) if i >= 0 => Some(i as usize),
        Some(v) => return Err(Error::InvalidConfig(format!("`order` must be a non-negative integer, got {v}"))),
    };
    let order = a.order.or(order).unwrap_or(1);
    let axis = a.axis.clone().or(take_str(&mut t, "axis")?).unwrap_or_else(|| "0".into());
    set(&mut t, "method", a.method);
    set(&mut t, "scheme", a.scheme);
    set(&mut t, "window_half", a.window_half.map(|v| v as i64));
    set(&mut t, "poly_order", a.poly_order.map(|v| v as i64));
    set(&mut t, "retained", a.retained.map(|v| v as i64));
    set(&mut t, "steepness", a.steepness.map(i64::from));
    if a.detrend {
        t.insert("detrend".into(), true.into());
    }
    set(&mut t, "epochs", a.epochs.map(|v| v as i64));
    if let Some(h) = a.hidden_sizes {
        t.insert("hidden_sizes".into(), toml::Value::Array(h.into_iter().map(|v| (v as i64).into()).collect()));
    }
    set(&mut t, "learning_rate", a.learning_rate);
    set(&mut t, "seed", a.seed.map(|v| v as i64));
    set(&mut t, "mu", a.mu);
    set(&mut t, "iterations", a.iterations.map(|v| v as i64));
    set(&mut t, "epsilon", a.epsilon);
    if !t.contains_key("method") {
        return Err(Error::InvalidConfig("no method given (use --method or a config file)".into()));
    }
    let cfg: DiffConfig = from_table(t, "method")?;

    let field = Field::load_csv(&a.input)?;
    let axis_index = match axis.parse::<usize>() {
        Ok(i) => i,
        Err(_) => field
            .grid()
            .axis_index(&axis)
            .ok_or_else(|| Error::InvalidConfig(format!("the grid has no axis `{axis}`")))?,
    };
    let result = differentiate(&field, DiffRequest::new(axis_index, order), &cfg)?;
    result.derivative.save_csv(&a.output)?;
    if let Some(p) = &a.mask_out {
        let m = result.valid_mask.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        Field::new(field.grid().clone(), m)?.save_csv(p)?;
    }
    if let Some(p) = &a.truth {
        let truth = Field::load_csv(p)?;
        let mse = masked_mse(&result.derivative, &truth, &result.valid_mask)?;
        println!("mse={mse} valid={}/{}", result.valid_count(), field.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct DiscoveredEquation {
    reference_lhs: String,
    model: ModelDocument,
    structure_match: bool,
    correct_share: f64,
    front: Vec<ModelDocument>,
}

#[derive(Serialize)]
struct DiscoverOutput {
    schema_version: u32,
    benchmark: BenchmarkKind,
    backend: Backend,
    equations: Vec<DiscoveredEquation>,
}

fn load_quantities(dir: &Path) -> Result<Quantities> {
    let mut q = Quantities::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    for path in &entries {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if stem.ends_with(".mask") {
            continue;
        }
        let field = Field::load_csv(path)?;
        let mask_path = dir.join(format!("{stem}.mask.csv"));
        let mask = if mask_path.exists() {
            Field::load_csv(&mask_path)?.values().iter().map(|&v| v != 0.0).collect()
        } else {
            vec![true; field.len()]
        };
        q.insert(stem, field.into_values(), mask)?;
    }
    Ok(q)
}

fn discover(a: DiscoverArgs) -> Result<()> {
    let mut t = load_table(a.config.as_ref())?;
    let benchmark =
        a.benchmark.or(take_str(&mut t, "benchmark")?).ok_or_else(|| {
            Error::InvalidConfig("no benchmark given (use --benchmark or a config file)".into())
        })?;
    let kind: BenchmarkKind = benchmark.parse()?;
    let input_dir = a
        .input_dir
        .map(|p| p.display().to_string())
        .or(take_str(&mut t, "input_dir")?)
        .ok_or_else(|| Error::InvalidConfig("no input directory given".into()))?;
    let out = a.out.map(|p| p.display().to_string()).or(take_str(&mut t, "out")?);
    set(&mut t, "backend", a.backend);
    set(&mut t, "threshold", a.threshold);
    set(&mut t, "max_iter", a.max_iter.map(|v| v as i64));
    set(&mut t, "degree", a.degree.map(i64::from));
    if let Some(terms) = a.terms {
        t.insert("terms".into(), toml::Value::Array(terms.into_iter().map(Into::into).collect()));
    }
    let has_evolution_flags = a.population.is_some()
        || a.generations.is_some()
        || a.mutation_rate.is_some()
        || a.min_relative_gain.is_some()
        || a.seed.is_some();
    if has_evolution_flags {
        let evo = t
            .entry("evolution")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(evo) = evo else {
            return Err(Error::InvalidConfig("`evolution` must be a table".into()));
        };
        set(evo, "population", a.population.map(|v| v as i64));
        set(evo, "generations", a.generations.map(|v| v as i64));
        set(evo, "mutation_rate", a.mutation_rate);
        set(evo, "min_relative_gain", a.min_relative_gain);
        set(evo, "seed", a.seed.map(|v| v as i64));
    }
    let cfg: DiscoveryConfig = from_table(t, "discovery")?;

    let q = load_quantities(Path::new(&input_dir))?;
    let rhs: Vec<TermSpec> = cfg.term_ids(kind).iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let backend = cfg.backend_for(kind);
    let references = kind.build(&kind.default_grid())?.references;
    let equations = references
        .iter()
        .map(|r| {
            let o = discover_equation(&q, &rhs, r, backend, cfg.threshold, cfg.max_iter, &cfg.evolution)?;
            Ok(DiscoveredEquation {
                reference_lhs: r.lhs.clone(),
                model: o.model.to_document(),
                structure_match: o.structure_match,
                correct_share: o.correct_share,
                front: o.front.individuals.iter().map(|m| m.to_document()).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let doc = DiscoverOutput { schema_version: MODEL_SCHEMA_VERSION, benchmark: kind, backend, equations };
    let json = serde_json::to_string_pretty(&doc)? + "\n";
    match out {
        Some(p) => fs::write(p, json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    let out = a
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let report = run_experiment(&cfg, a.workers)?;
    let summary = emit_report(&report.records, &out)?;
    let failed = report.records.iter().filter(|r| !r.is_ok()).count();
    println!(
        "{}: {} records ({} failed), {} cells -> {}",
        report.benchmark,
        report.records.len(),
        failed,
        summary.cells.len(),
        out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["stable-diff", "frobnicate"]), 2);
        assert_eq!(run(["stable-diff", "diff", "--bogus", "a", "b"]), 2);
        assert_eq!(run(["stable-diff"]), 2);
        assert_eq!(run(["stable-diff", "--help"]), 0);
    }

    #[test]
    fn runtime_errors_exit_1() {
        assert_eq!(run(["stable-diff", "report", "/nonexistent/records.csv"]), 1);
        assert_eq!(run(["stable-diff", "diff", "/nonexistent.csv", "/tmp/x.csv", "--method", "spectral"]), 1);
    }

    #[test]
    fn extent_parsing() {
        assert_eq!(parse_extent("0:1:11").unwrap(), AxisExtent { start: 0.0, stop: 1.0, n: 11 });
        assert!(parse_extent("0:1").is_err());
        assert!(parse_extent("0:1:x").is_err());
    }
}
