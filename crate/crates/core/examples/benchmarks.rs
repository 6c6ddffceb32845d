//! The three reference systems and how well their governing equations hold
//! on the sampled ground truth.

use stable_diff::datasets::BenchmarkKind;

fn main() -> stable_diff::Result<()> {
    for kind in [BenchmarkKind::Linear2d, BenchmarkKind::Oscillator, BenchmarkKind::Wave] {
        let b = kind.build(&kind.default_grid())?;
        let fields: Vec<&str> = b.fields.iter().map(|(n, _)| n.as_str()).collect();
        let derivs: Vec<&str> = b.truth_derivs.iter().map(|(n, _)| n.as_str()).collect();
        println!("{kind}: {} nodes, fields {fields:?}, exact derivatives {derivs:?}", b.grid.len());
        for eq in &b.references {
            let rhs: Vec<String> = eq.rhs.iter().map(|(t, c)| format!("{c} {t}")).collect();
            println!("  {} = {}  residual {:.2e}", eq.lhs, rhs.join(" + "), b.reference_residual(eq)?);
        }
    }
    Ok(())
}
