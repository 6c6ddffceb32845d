//! Multiplicative noise: the realised standard deviation tracks kappa |u|.

use stable_diff::grid::{make_uniform_grid, sample_function};
use stable_diff::noise::{contaminate, NoiseSpec};

fn main() -> stable_diff::Result<()> {
    let grid = make_uniform_grid(&[(0.0, 1.0, 20_000)])?;
    let u = sample_function(&grid, |x| 1.0 + 4.0 * x[0])?;
    for kappa in [0.0, 0.01, 0.05, 0.1] {
        let noisy = contaminate(&u, NoiseSpec::new(kappa, 42)?)?;
        let rel: Vec<f64> = noisy.values().iter().zip(u.values()).map(|(n, c)| (n - c) / c).collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rel.len() as f64).sqrt();
        println!("kappa {kappa:<5} relative error mean {mean:+.4} sd {sd:.4}");
    }
    let a = contaminate(&u, NoiseSpec::new(0.05, 9)?)?;
    let b = contaminate(&u, NoiseSpec::new(0.05, 9)?)?;
    println!("same seed reproduces: {}", a == b);
    Ok(())
}
