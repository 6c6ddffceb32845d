//! Window-size sweep for the Chebyshev-basis Savitzky-Golay differentiator.

use std::f64::consts::PI;

use stable_diff::diff::{differentiate, DiffConfig, DiffRequest, SavGolConfig};
use stable_diff::grid::{make_uniform_grid, masked_mse, sample_function};
use stable_diff::noise::{contaminate, NoiseSpec};

fn main() -> stable_diff::Result<()> {
    let grid = make_uniform_grid(&[(0.0, 4.0 * PI, 1000)])?;
    let u = sample_function(&grid, |x| x[0].sin())?;
    let ddu = sample_function(&grid, |x| -x[0].sin())?;
    let noisy = contaminate(&u, NoiseSpec::new(0.05, 7)?)?;
    println!("{:>6} {:>7} {:>12} {:>12}", "M", "valid", "u' mse", "u'' mse");
    for window_half in [5, 10, 20, 40, 80, 160] {
        let cfg = DiffConfig::SavGol(SavGolConfig { window_half, poly_order: 4 });
        let d1 = differentiate(&noisy, DiffRequest::new(0, 1), &cfg)?;
        let d2 = differentiate(&noisy, DiffRequest::new(0, 2), &cfg)?;
        let du = sample_function(&grid, |x| x[0].cos())?;
        println!(
            "{window_half:>6} {:>7} {:>12.3e} {:>12.3e}",
            d1.valid_count(),
            masked_mse(&d1.derivative, &du, &d1.valid_mask)?,
            masked_mse(&d2.derivative, &ddu, &d2.valid_mask)?
        );
    }
    Ok(())
}
