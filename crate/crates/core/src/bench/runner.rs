//! Sweep execution: one task per (method cell, noise level, run).

use std::panic::{catch_unwind, AssertUnwindSafe};

use log::debug;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{resolve_workers, Backend, ExperimentConfig, FeatureSource, MethodCell};
use super::report::{Record, RECORD_SCHEMA_VERSION};
use crate::datasets::{Benchmark, BenchmarkKind, ReferenceEquation};
use crate::diff::{differentiate_many, DiffResult};
use crate::discovery::{
    build_library, evolutionary_discover, pareto_correct_share, stlsq, structure_match,
    EquationModel, EvolutionParams, ParetoFront, Quantities, TermPool, TermSpec,
};
use crate::error::{Error, Result};
use crate::grid::{masked_mse, Field};
use crate::noise::{contaminate_stream, NoiseSpec};

/// All records of one sweep, in cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub benchmark: BenchmarkKind,
    pub records: Vec<Record>,
}

/// Stable 64-bit seed from a canonical description of the cell.
pub fn cell_seed(
    base_seed: u64,
    benchmark: BenchmarkKind,
    method: &str,
    param_index: usize,
    kappa_index: usize,
    run: usize,
) -> u64 {
    let key = format!("{base_seed}|{benchmark}|{method}|{param_index}|{kappa_index}|{run}");
    let digest = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn derived_seed(seed: u64, purpose: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}|{purpose}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn build_benchmark(cfg: &ExperimentConfig) -> Result<Benchmark> {
    let grid = cfg.grid()?;
    match (cfg.benchmark, cfg.initial_conditions) {
        (BenchmarkKind::Linear2d, Some([a, b])) => crate::datasets::make_linear2d(&grid, a, b),
        (BenchmarkKind::Oscillator, Some([a, b])) => crate::datasets::make_oscillator(&grid, a, b),
        (BenchmarkKind::Wave, Some(_)) => {
            Err(Error::InvalidConfig("the wave benchmark takes no initial conditions".into()))
        }
        (kind, None) => kind.build(&grid),
    }
}

/// What discovery produced for one equation.
#[derive(Debug, Clone)]
pub struct EquationOutcome {
    pub model: EquationModel,
    pub front: ParetoFront,
    pub structure_match: bool,
    pub correct_share: f64,
}

/// Runs the configured backend for `reference` on `q`.
pub fn discover_equation(
    q: &Quantities,
    rhs_terms: &[TermSpec],
    reference: &ReferenceEquation,
    backend: Backend,
    threshold: f64,
    max_iter: usize,
    evolution: &EvolutionParams,
) -> Result<EquationOutcome> {
    let lhs: TermSpec = reference.lhs.parse()?;
    let lib = build_library(q, rhs_terms, &lhs)?;
    let (model, front) = match backend {
        Backend::Stlsq => {
            let m = stlsq(&lib, threshold, max_iter)?;
            (m.clone(), ParetoFront { individuals: vec![m] })
        }
        Backend::Evolutionary => {
            let pool = TermPool::from_library(&lib)?;
            let front = evolutionary_discover(&pool, evolution)?;
            // Prefer the best correctly structured member; else the best overall.
            let pick = front
                .individuals
                .iter()
                .filter(|m| structure_match(m, reference))
                .min_by(|a, b| a.residual_mse.total_cmp(&b.residual_mse))
                .or_else(|| front.best())
                .cloned()
                .ok_or_else(|| Error::Library("evolutionary search returned an empty front".into()))?;
            (pick, front)
        }
    };
    let correct_share = pareto_correct_share(&front, reference)?;
    Ok(EquationOutcome { structure_match: structure_match(&model, reference), model, front, correct_share })
}

struct Task<'a> {
    cell: &'a MethodCell,
    param_index: usize,
    kappa_index: usize,
    kappa: f64,
    run: usize,
}

fn clean_quantities(bench: &Benchmark) -> Result<Quantities> {
    let mut q = Quantities::new();
    for (name, f) in bench.fields.iter().chain(&bench.truth_derivs) {
        q.insert_field(name, f)?;
    }
    Ok(q)
}

fn run_task(
    cfg: &ExperimentConfig,
    bench: &Benchmark,
    clean_q: &Quantities,
    task: &Task<'_>,
) -> Vec<Record> {
    let method = task.cell.config.name();
    let seed = cell_seed(cfg.base_seed, cfg.benchmark, method, task.param_index, task.kappa_index, task.run);
    let base = Record {
        schema_version: RECORD_SCHEMA_VERSION,
        benchmark: cfg.benchmark.to_string(),
        param_index: task.param_index,
        method: method.to_string(),
        params: task.cell.config.params_label(),
        sweep: task.cell.sweep_label.clone(),
        sweep_value: task.cell.sweep_value,
        kappa_index: task.kappa_index,
        kappa: task.kappa,
        run: task.run,
        seed,
        ..Record::default()
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| evaluate_task(cfg, bench, clean_q, task, seed)));
    let result = match outcome {
        Ok(r) => r,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            Err(Error::Library(format!("cell panicked: {msg}")))
        }
    };
    match result {
        Ok(rows) => rows
            .into_iter()
            .map(|row| Record { status: "ok".into(), ..row.merge_into(base.clone()) })
            .collect(),
        Err(e) => bench
            .references
            .iter()
            .map(|r| Record {
                status: "error".into(),
                error: e.to_string(),
                equation: r.lhs.clone(),
                ..base.clone()
            })
            .collect(),
    }
}

/// Per-equation results before they are stamped with the cell identity.
struct Row {
    equation: String,
    mse_order1: Option<f64>,
    mse_order2: Option<f64>,
    target_mse: Option<f64>,
    outcome: EquationOutcome,
    process_error: f64,
}

impl Row {
    fn merge_into(self, base: Record) -> Record {
        let o = self.outcome;
        Record {
            equation: self.equation,
            mse_order1: self.mse_order1,
            mse_order2: self.mse_order2,
            target_mse: self.target_mse,
            model: o.model.equation_string(),
            coefficients: super::report::format_coefficients(&o.model),
            complexity: Some(o.model.complexity),
            fitness: Some(o.model.residual_mse),
            process_error: Some(self.process_error),
            structure_match: Some(o.structure_match),
            correct_share: Some(o.correct_share),
            front_size: Some(o.front.len()),
            ..base
        }
    }
}

fn evaluate_task(
    cfg: &ExperimentConfig,
    bench: &Benchmark,
    clean_q: &Quantities,
    task: &Task<'_>,
    seed: u64,
) -> Result<Vec<Row>> {
    let spec = NoiseSpec::new(task.kappa, seed)?;
    let noisy: Vec<(String, Field)> = bench
        .fields
        .iter()
        .enumerate()
        .map(|(stream, (name, f))| Ok((name.clone(), contaminate_stream(f, spec, stream as u64)?)))
        .collect::<Result<_>>()?;

    let mut estimates: Vec<(String, DiffResult)> = Vec::new();
    let required = bench.required_derivatives();
    for (name, field) in &noisy {
        let wanted: Vec<_> = required.iter().filter(|r| &r.variable == name).collect();
        if wanted.is_empty() {
            continue;
        }
        let reqs: Vec<_> = wanted.iter().map(|r| r.request).collect();
        let results = differentiate_many(field, &reqs, &task.cell.config)?;
        for (r, res) in wanted.iter().zip(results) {
            estimates.push((r.id.clone(), res));
        }
    }

    let mut mse_by_order: [Vec<f64>; 2] = [vec![], vec![]];
    let mut mse_by_id = Vec::new();
    for r in &required {
        let id = &r.id;
        let est = &estimates.iter().find(|(e, _)| e == id).expect("every required id was estimated").1;
        let truth = bench.truth(id).ok_or_else(|| Error::Library(format!("no truth for `{id}`")))?;
        let m = if est.valid_count() == 0 {
            f64::NAN
        } else {
            masked_mse(&est.derivative, truth, &est.valid_mask)?
        };
        mse_by_order[r.request.order - 1].push(m);
        mse_by_id.push((id.clone(), m));
    }
    let mean = |v: &Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    let mut q = Quantities::new();
    let states: &[(String, Field)] = match cfg.discovery.features_for(cfg.benchmark) {
        FeatureSource::Clean => &bench.fields,
        FeatureSource::Noisy => &noisy,
    };
    for (name, f) in states {
        q.insert_field(name, f)?;
    }
    for (id, est) in &estimates {
        q.insert_estimate(id, est)?;
    }
    let rhs: Vec<TermSpec> = cfg
        .discovery
        .term_ids(cfg.benchmark)
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let evolution = EvolutionParams {
        seed: derived_seed(seed, "evolution"),
        ..cfg.discovery.evolution
    };
    let backend = cfg.discovery.backend_for(cfg.benchmark);
    bench
        .references
        .iter()
        .map(|reference| {
            let outcome = discover_equation(
                &q,
                &rhs,
                reference,
                backend,
                cfg.discovery.threshold,
                cfg.discovery.max_iter,
                &evolution,
            )?;
            let process_error = outcome.model.residual_on(clean_q)?;
            let target_mse = mse_by_id.iter().find(|(id, _)| id == &reference.lhs).map(|(_, m)| *m);
            Ok(Row {
                equation: reference.lhs.clone(),
                mse_order1: mean(&mse_by_order[0]),
                mse_order2: mean(&mse_by_order[1]),
                target_mse,
                outcome,
                process_error,
            })
        })
        .collect()
}

/// Runs every (method cell, noise level, run) combination on a bounded
/// pool. Records come back in task order regardless of worker count; a
/// failing cell yields error records and never stops the others.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let workers = resolve_workers(workers.or(cfg.workers))?;
    let bench = build_benchmark(cfg)?;
    let clean_q = clean_quantities(&bench)?;
    let cells = cfg.method_cells()?;
    let mut tasks = Vec::new();
    for (param_index, cell) in cells.iter().enumerate() {
        for (kappa_index, &kappa) in cfg.kappas.iter().enumerate() {
            for run in 0..cfg.runs() {
                tasks.push(Task { cell, param_index, kappa_index, kappa, run });
            }
        }
    }
    debug!("running {} tasks on {workers} workers", tasks.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Library(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<Vec<Record>> =
        pool.install(|| tasks.par_iter().map(|t| run_task(cfg, &bench, &clean_q, t)).collect());
    Ok(ExperimentReport { benchmark: cfg.benchmark, records: nested.into_iter().flatten().collect() })
}
