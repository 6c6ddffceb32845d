//! Fits a small tanh network to noisy samples and differentiates the fit.

use std::f64::consts::PI;

use stable_diff::diff::ann::{ann_differentiate, ann_smooth};
use stable_diff::diff::fd::fd_differentiate;
use stable_diff::diff::{AnnConfig, DiffRequest, FdScheme};
use stable_diff::grid::{make_uniform_grid, masked_mse, mse, sample_function};
use stable_diff::noise::{contaminate, NoiseSpec};

fn main() -> stable_diff::Result<()> {
    let grid = make_uniform_grid(&[(0.0, 2.0 * PI, 400)])?;
    let u = sample_function(&grid, |x| x[0].sin())?;
    let du = sample_function(&grid, |x| x[0].cos())?;
    let noisy = contaminate(&u, NoiseSpec::new(0.1, 2)?)?;

    let cfg = AnnConfig { hidden_sizes: vec![16, 16], epochs: 10_000, learning_rate: 0.01, seed: 0 };
    let fit = ann_smooth(&noisy, &cfg)?;
    for epoch in [0, 100, 1000, 5000, fit.loss_trace.len() - 1] {
        println!("epoch {epoch:>5}: loss {:.4e}", fit.loss_trace[epoch]);
    }
    println!("smoothed vs clean mse {:.3e}", mse(&fit.smoothed, &u)?);

    let req = DiffRequest::new(0, 1);
    let ann = ann_differentiate(&noisy, req, &cfg)?;
    let fd = fd_differentiate(&noisy, req, FdScheme::Central)?;
    println!("derivative mse: network {:.3e}, raw differences {:.3e}",
        masked_mse(&ann.derivative, &du, &ann.valid_mask)?,
        masked_mse(&fd.derivative, &du, &fd.valid_mask)?);
    Ok(())
}
