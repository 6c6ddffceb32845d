//! Record persistence and aggregate reports.
//!
//! Output layout:
//! * `records.csv` - one row per (method cell, noise level, run, equation);
//! * `summary.json` - per-cell aggregates recomputable from the records;
//! * `plotdata/` - sweep curves and coefficient box statistics as CSV.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discovery::{CoefficientStats, EquationModel};
use crate::error::{Error, Result};
use crate::stats;

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Record {
    pub schema_version: u32,
    pub benchmark: String,
    pub param_index: usize,
    pub method: String,
    pub params: String,
    pub sweep: String,
    pub sweep_value: Option<f64>,
    pub kappa_index: usize,
    pub kappa: f64,
    pub run: usize,
    pub seed: u64,
    /// `ok` or `error`.
    pub status: String,
    pub error: String,
    /// Left-hand side of the equation this row describes.
    pub equation: String,
    pub mse_order1: Option<f64>,
    pub mse_order2: Option<f64>,
    /// Derivative error of this equation's left-hand side.
    pub target_mse: Option<f64>,
    pub model: String,
    /// `term=coefficient` pairs over the whole library, `;`-separated.
    pub coefficients: String,
    pub complexity: Option<usize>,
    pub fitness: Option<f64>,
    pub process_error: Option<f64>,
    pub structure_match: Option<bool>,
    pub correct_share: Option<f64>,
    pub front_size: Option<usize>,
}

impl Record {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn coefficient_values(&self) -> Result<Vec<(String, f64)>> {
        parse_coefficients(&self.coefficients)
    }
}

pub fn format_coefficients(model: &EquationModel) -> String {
    model
        .terms
        .iter()
        .zip(&model.coefficients)
        .map(|(t, c)| format!("{t}={c}"))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_coefficients(s: &str) -> Result<Vec<(String, f64)>> {
    if s.is_empty() {
        return Ok(vec![]);
    }
    s.split(';')
        .map(|pair| {
            let (k, v) = pair
                .rsplit_once('=')
                .ok_or_else(|| Error::Parse(format!("bad coefficient entry `{pair}`")))?;
            let v = v.parse::<f64>().map_err(|_| Error::Parse(format!("bad coefficient `{v}`")))?;
            Ok((k.to_string(), v))
        })
        .collect()
}

pub fn write_records<W: Write>(records: &[Record], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    // Header written explicitly so an empty record list still gets one.
    out.write_record(RECORD_COLUMNS)?;
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<Record>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RECORD_COLUMNS.iter().copied()) {
        return Err(Error::Parse("records file has an unexpected header".into()));
    }
    let records: Vec<Record> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if let Some(r) = records.iter().find(|r| r.schema_version != RECORD_SCHEMA_VERSION) {
        return Err(Error::Parse(format!("unsupported record schema version {}", r.schema_version)));
    }
    Ok(records)
}

const RECORD_COLUMNS: [&str; 25] = [
    "schema_version",
    "benchmark",
    "param_index",
    "method",
    "params",
    "sweep",
    "sweep_value",
    "kappa_index",
    "kappa",
    "run",
    "seed",
    "status",
    "error",
    "equation",
    "mse_order1",
    "mse_order2",
    "target_mse",
    "model",
    "coefficients",
    "complexity",
    "fitness",
    "process_error",
    "structure_match",
    "correct_share",
    "front_size",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub param_index: usize,
    pub method: String,
    pub params: String,
    pub sweep: String,
    pub sweep_value: Option<f64>,
    pub kappa_index: usize,
    pub kappa: f64,
    pub equation: String,
    pub runs: usize,
    pub failed: usize,
    pub structure_match_rate: Option<f64>,
    pub median_correct_share: Option<f64>,
    pub mean_correct_share: Option<f64>,
    pub median_target_mse: Option<f64>,
    pub median_mse_order1: Option<f64>,
    pub median_mse_order2: Option<f64>,
    pub median_fitness: Option<f64>,
    pub median_process_error: Option<f64>,
    pub coefficients: BTreeMap<String, CoefficientStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub benchmark: Option<String>,
    pub cells: Vec<CellSummary>,
}

fn median_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().filter(|x| !x.is_nan()).collect();
    (!v.is_empty()).then(|| stats::median(&v))
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().filter(|x| !x.is_nan()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregates per (method cell, noise level, equation), in first-seen order.
pub fn summarize(records: &[Record]) -> Result<Summary> {
    let mut order: Vec<(usize, usize, String)> = Vec::new();
    let mut groups: BTreeMap<(usize, usize, String), Vec<&Record>> = BTreeMap::new();
    for r in records {
        let key = (r.param_index, r.kappa_index, r.equation.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let cells = order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let first = rows[0];
            let ok: Vec<&Record> = rows.iter().copied().filter(|r| r.is_ok()).collect();
            let mut coefs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in &ok {
                for (term, c) in r.coefficient_values()? {
                    coefs.entry(term).or_default().push(c);
                }
            }
            let coefficients = coefs
                .into_iter()
                .map(|(t, v)| CoefficientStats::from_values(&v).map(|s| (t, s)))
                .collect::<Result<_>>()?;
            let matches: Vec<f64> =
                ok.iter().filter_map(|r| r.structure_match).map(|m| if m { 1.0 } else { 0.0 }).collect();
            Ok(CellSummary {
                param_index: first.param_index,
                method: first.method.clone(),
                params: first.params.clone(),
                sweep: first.sweep.clone(),
                sweep_value: first.sweep_value,
                kappa_index: first.kappa_index,
                kappa: first.kappa,
                equation: first.equation.clone(),
                runs: rows.len(),
                failed: rows.len() - ok.len(),
                structure_match_rate: (!matches.is_empty())
                    .then(|| matches.iter().sum::<f64>() / matches.len() as f64),
                median_correct_share: median_of(ok.iter().map(|r| r.correct_share)),
                mean_correct_share: mean_of(ok.iter().map(|r| r.correct_share)),
                median_target_mse: median_of(ok.iter().map(|r| r.target_mse)),
                median_mse_order1: median_of(ok.iter().map(|r| r.mse_order1)),
                median_mse_order2: median_of(ok.iter().map(|r| r.mse_order2)),
                median_fitness: median_of(ok.iter().map(|r| r.fitness)),
                median_process_error: median_of(ok.iter().map(|r| r.process_error)),
                coefficients,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        benchmark: records.first().map(|r| r.benchmark.clone()),
        cells,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_plotdata(summary: &Summary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut sweeps: BTreeMap<(String, String), Vec<&CellSummary>> = BTreeMap::new();
    let mut coefs: BTreeMap<String, Vec<&CellSummary>> = BTreeMap::new();
    for c in &summary.cells {
        sweeps.entry((c.method.clone(), c.equation.clone())).or_default().push(c);
        coefs.entry(c.equation.clone()).or_default().push(c);
    }
    for ((method, equation), cells) in sweeps {
        let mut w = csv::Writer::from_path(dir.join(format!("sweep_{method}_{equation}.csv")))?;
        w.write_record([
            "kappa",
            "param_index",
            "params",
            "sweep_value",
            "median_correct_share",
            "mean_correct_share",
            "structure_match_rate",
            "median_target_mse",
            "median_fitness",
            "median_process_error",
        ])?;
        for c in cells {
            w.write_record([
                c.kappa.to_string(),
                c.param_index.to_string(),
                c.params.clone(),
                opt(c.sweep_value),
                opt(c.median_correct_share),
                opt(c.mean_correct_share),
                opt(c.structure_match_rate),
                opt(c.median_target_mse),
                opt(c.median_fitness),
                opt(c.median_process_error),
            ])?;
        }
        w.flush()?;
    }
    for (equation, cells) in coefs {
        let mut w = csv::Writer::from_path(dir.join(format!("coefficients_{equation}.csv")))?;
        w.write_record(["method", "params", "kappa", "term", "median", "q25", "q75", "min", "max"])?;
        for c in cells {
            for (term, s) in &c.coefficients {
                w.write_record([
                    c.method.clone(),
                    c.params.clone(),
                    c.kappa.to_string(),
                    term.clone(),
                    s.median.to_string(),
                    s.q25.to_string(),
                    s.q75.to_string(),
                    s.min.to_string(),
                    s.max.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// Writes `records.csv`, `summary.json` and `plotdata/` into `dir`.
pub fn emit_report(records: &[Record], dir: &Path) -> Result<Summary> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::InvalidConfig(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    write_records(records, fs::File::create(dir.join("records.csv"))?)?;
    emit_summary(records, dir)
}

/// `summary.json` and `plotdata/` only, e.g. from records read back from disk.
pub fn emit_summary(records: &[Record], dir: &Path) -> Result<Summary> {
    let summary = summarize(records)?;
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    write_plotdata(&summary, &dir.join("plotdata"))?;
    Ok(summary)
}
