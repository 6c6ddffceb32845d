//! A small noise-by-method sweep on the oscillator, written out as a report.
//! Pass an output directory, or it goes to the system temp dir.

use stable_diff::bench::{emit_report, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
benchmark = "oscillator"
kappas = [0.0, 0.03, 0.1]
runs = 4
base_seed = 17

[[methods]]
method = "finite_diff"

[[methods]]
method = "savgol"
sweep = { window_half = [25, 100] }

[[methods]]
method = "spectral"
detrend = true
retained = 20

[discovery.evolution]
population = 20
generations = 40
"#;

fn main() -> stable_diff::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("stable-diff-sweep"));
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let report = run_experiment(&cfg, None)?;
    let summary = emit_report(&report.records, &out)?;
    println!("{:<12} {:<24} {:>6} {:>8} {:>12}", "method", "params", "kappa", "match", "target mse");
    for c in &summary.cells {
        println!(
            "{:<12} {:<24} {:>6} {:>8.2} {:>12.3e}",
            c.method,
            c.params,
            c.kappa,
            c.structure_match_rate.unwrap_or(f64::NAN),
            c.median_target_mse.unwrap_or(f64::NAN)
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
