//! Finite-difference baseline.

use serde::{Deserialize, Serialize};

use super::{DiffRequest, DiffResult};
use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    /// `(u(x + h) - u(x)) / h`
    Forward,
    /// `(u(x + h) - u(x - h)) / 2h`
    #[default]
    Central,
}

impl FdScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            FdScheme::Forward => "forward",
            FdScheme::Central => "central",
        }
    }
}

/// First or second derivative of one uniformly sampled line. Boundary nodes
/// get a one-sided fallback value and are flagged invalid.
pub fn fd_line(u: &[f64], step: f64, order: usize, scheme: FdScheme) -> (Vec<f64>, Vec<bool>) {
    let n = u.len();
    let mut d = vec![0.0; n];
    let mut valid = vec![true; n];
    match (order, scheme) {
        (1, FdScheme::Forward) => {
            for i in 0..n - 1 {
                d[i] = (u[i + 1] - u[i]) / step;
            }
            d[n - 1] = (u[n - 1] - u[n - 2]) / step;
            valid[n - 1] = false;
        }
        (1, FdScheme::Central) => {
            for i in 1..n - 1 {
                d[i] = (u[i + 1] - u[i - 1]) / (2.0 * step);
            }
            d[0] = (u[1] - u[0]) / step;
            d[n - 1] = (u[n - 1] - u[n - 2]) / step;
            valid[0] = false;
            valid[n - 1] = false;
        }
        _ => {
            // Second order always uses the three-point centred stencil.
            let h2 = step * step;
            for i in 1..n - 1 {
                d[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
            }
            d[0] = d[1];
            d[n - 1] = d[n - 2];
            valid[0] = false;
            valid[n - 1] = false;
        }
    }
    (d, valid)
}

pub fn fd_differentiate(data: &Field, req: DiffRequest, scheme: FdScheme) -> Result<DiffResult> {
    req.validate(data.grid())?;
    let axis = data.grid().axis(req.axis);
    if axis.n < 3 {
        return Err(Error::InvalidConfig(format!(
            "finite differences need at least 3 nodes along `{}`",
            axis.name
        )));
    }
    let step = axis.step();
    let (values, valid_mask) =
        data.map_lines(req.axis, |line| Ok(fd_line(line, step, req.order, scheme)))?;
    Ok(DiffResult {
        derivative: Field::new(data.grid().clone(), values)?,
        valid_mask,
        reapplied: false,
    })
}
