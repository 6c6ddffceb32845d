//! Numerical differentiation of noisy gridded data and sparse equation
//! discovery from the resulting derivative estimates.

pub mod bench;
pub mod datasets;
pub mod diff;
pub mod discovery;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod noise;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{make_uniform_grid, Axis, Field, Grid};
