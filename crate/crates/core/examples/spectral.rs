//! Butterworth-filtered spectral derivative on non-periodic data, with and
//! without removing the endpoint line first.

use stable_diff::diff::spectral::butterworth_gain;
use stable_diff::diff::{differentiate, DiffConfig, DiffRequest, SpectralConfig};
use stable_diff::grid::{make_uniform_grid, mse, sample_function};
use stable_diff::noise::{contaminate, NoiseSpec};

fn main() -> stable_diff::Result<()> {
    let grid = make_uniform_grid(&[(0.0, 10.0, 1000)])?;
    let u = sample_function(&grid, |x| (-0.2 * x[0]).exp() * (2.0 * x[0]).cos())?;
    let du = sample_function(&grid, |x| {
        let t = x[0];
        (-0.2 * t).exp() * (-0.2 * (2.0 * t).cos() - 2.0 * (2.0 * t).sin())
    })?;
    let noisy = contaminate(&u, NoiseSpec::new(0.03, 3)?)?;

    println!("{:>9} {:>14} {:>14}", "retained", "plain mse", "detrended mse");
    for retained in [5, 10, 20, 40, 80, 160] {
        let mut row = Vec::new();
        for detrend in [false, true] {
            let cfg = DiffConfig::Spectral(SpectralConfig { retained, steepness: 4, detrend });
            row.push(mse(&differentiate(&noisy, DiffRequest::new(0, 1), &cfg)?.derivative, &du)?);
        }
        println!("{retained:>9} {:>14.3e} {:>14.3e}", row[0], row[1]);
    }

    let cfg = SpectralConfig { retained: 20, steepness: 4, detrend: true };
    let gains: Vec<String> = [0, 10, 20, 30, 40, 80].iter().map(|&k| format!("{k}:{:.3}", butterworth_gain(k, 1000, &cfg))).collect();
    println!("gain at retained 20: {}", gains.join(" "));
    Ok(())
}
