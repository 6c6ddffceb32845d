//! Total-variation regularised differentiation of a noisy kinked signal.

use stable_diff::diff::fd::fd_line;
use stable_diff::diff::tv::tv_line;
use stable_diff::diff::{FdScheme, TvConfig};
use stable_diff::noise::gaussian_sequence;

fn main() -> stable_diff::Result<()> {
    let n = 300;
    let step = 1.0 / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    let slope: Vec<f64> = xs.iter().map(|&x| if x < 0.4 { 0.0 } else { 2.0 }).collect();
    let noise = gaussian_sequence(11, 0, n);
    let data: Vec<f64> = xs.iter().zip(&noise).map(|(&x, e)| 2.0 * (x - 0.4).max(0.0) + 0.02 * e).collect();

    let err = |g: &[f64]| g.iter().zip(&slope).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
    let (fd, _) = fd_line(&data, step, 1, FdScheme::Central);
    println!("raw differences mse {:.3e}", err(&fd[1..n - 1]));
    for mu in [1.0, 10.0, 100.0, 1000.0, 10000.0] {
        let cfg = TvConfig { mu, ..TvConfig::default() };
        let (g, trace) = tv_line(&data, step, &cfg)?;
        println!(
            "mu {mu:>7}: mse {:.3e}, objective {:.4e} -> {:.4e} over {} iterations",
            err(&g),
            trace[0],
            trace[trace.len() - 1],
            trace.len() - 1
        );
    }
    Ok(())
}
