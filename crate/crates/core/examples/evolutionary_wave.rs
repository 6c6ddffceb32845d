//! Multi-objective structure search on the wave benchmark, checked against
//! exhaustive enumeration.

use stable_diff::datasets::BenchmarkKind;
use stable_diff::discovery::{brute_force_front, build_library, evolutionary_discover, EvolutionParams, Quantities, TermPool, TermSpec};

fn main() -> stable_diff::Result<()> {
    let kind = BenchmarkKind::Wave;
    let b = kind.build(&kind.default_grid())?;
    let mut q = Quantities::new();
    for (name, f) in b.fields.iter().chain(&b.truth_derivs) {
        q.insert_field(name, f)?;
    }
    let terms: Vec<TermSpec> = ["u", "u_t", "u_x", "u_xx", "u*u_x"].iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let lib = build_library(&q, &terms, &"u_tt".parse()?)?;
    let pool = TermPool::from_library(&lib)?;

    let params = EvolutionParams { seed: 3, ..EvolutionParams::default() };
    let front = evolutionary_discover(&pool, &params)?;
    println!("evolved front:");
    for m in &front.individuals {
        println!("  complexity {} mse {:.3e}  {}", m.complexity, m.residual_mse, m.equation_string());
    }
    let oracle = brute_force_front(&pool, params.min_relative_gain)?;
    println!("matches exhaustive front: {}", front.structures() == oracle.structures());
    Ok(())
}
