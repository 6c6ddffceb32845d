//! Sparse regression on the damped linear system, first with exact
//! derivatives and then with spectral estimates from noisy data.

use stable_diff::datasets::BenchmarkKind;
use stable_diff::diff::{differentiate, DiffConfig, DiffRequest, SpectralConfig};
use stable_diff::discovery::{build_library, polynomial_terms, stlsq, Quantities};
use stable_diff::noise::{contaminate_stream, NoiseSpec};

fn main() -> stable_diff::Result<()> {
    let kind = BenchmarkKind::Linear2d;
    let b = kind.build(&kind.default_grid())?;
    let terms = polynomial_terms(&["x", "y"], 3);
    println!("library: {} terms", terms.len());

    let mut exact = Quantities::new();
    for (name, f) in b.fields.iter().chain(&b.truth_derivs) {
        exact.insert_field(name, f)?;
    }
    let spectral = DiffConfig::Spectral(SpectralConfig { retained: 40, steepness: 4, detrend: true });
    let mut noisy = Quantities::new();
    for (stream, (name, f)) in b.fields.iter().enumerate() {
        let f = contaminate_stream(f, NoiseSpec::new(0.03, 5)?, stream as u64)?;
        noisy.insert_field(name, &f)?;
        noisy.insert_estimate(&format!("{name}_t"), &differentiate(&f, DiffRequest::new(0, 1), &spectral)?)?;
    }

    for (label, q) in [("exact", &exact), ("noisy, spectral", &noisy)] {
        println!("{label}:");
        for lhs in ["x_t", "y_t"] {
            let lib = build_library(q, &terms, &lhs.parse()?)?;
            println!("  {}", stlsq(&lib, 0.05, 10)?.equation_string());
        }
    }
    Ok(())
}
