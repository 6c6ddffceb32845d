//! Central differences on a noisy sine: refining the grid makes the
//! derivative worse, not better.

use std::f64::consts::PI;

use stable_diff::diff::{differentiate, DiffConfig, DiffRequest, FdScheme};
use stable_diff::grid::{make_uniform_grid, masked_mse, sample_function};
use stable_diff::noise::{contaminate, NoiseSpec};

fn main() -> stable_diff::Result<()> {
    let cfg = DiffConfig::FiniteDiff { scheme: FdScheme::Central };
    println!("{:>6} {:>12} {:>12}", "nodes", "clean mse", "noisy mse");
    for n in [26, 51, 101, 201, 501, 1001, 2001] {
        let grid = make_uniform_grid(&[(0.0, 2.0 * PI, n)])?;
        let u = sample_function(&grid, |x| x[0].sin())?;
        let du = sample_function(&grid, |x| x[0].cos())?;
        let noisy = contaminate(&u, NoiseSpec::new(0.05, 1)?)?;
        let clean = differentiate(&u, DiffRequest::new(0, 1), &cfg)?;
        let rough = differentiate(&noisy, DiffRequest::new(0, 1), &cfg)?;
        println!(
            "{n:>6} {:>12.3e} {:>12.3e}",
            masked_mse(&clean.derivative, &du, &clean.valid_mask)?,
            masked_mse(&rough.derivative, &du, &rough.valid_mask)?
        );
    }
    Ok(())
}
