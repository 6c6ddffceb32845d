//! Uniform sampling lattices and the real-valued fields defined on them.
//!
//! Nodes are stored row-major with the first axis varying slowest, so a 2-D
//! `(t, x)` field keeps every time slice contiguous.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Default axis names by position: time first, then space.
const DEFAULT_AXIS_NAMES: [&str; 2] = ["t", "x"];

/// One uniformly sampled coordinate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Axis {
    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step()
    }

    /// Physical length used as the period by spectral methods: `n * step`.
    pub fn period(&self) -> f64 {
        self.n as f64 * self.step()
    }

    fn validate(&self) -> Result<()> {
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "axis `{}` has non-finite bounds",
                self.name
            )));
        }
        if self.n < 3 {
            return Err(Error::InvalidGrid(format!(
                "axis `{}` needs at least 3 nodes, got {}",
                self.name, self.n
            )));
        }
        if self.stop <= self.start {
            return Err(Error::InvalidGrid(format!(
                "axis `{}` has stop {} <= start {}",
                self.name, self.stop, self.start
            )));
        }
        Ok(())
    }
}

/// Rectilinear uniform grid of one or two axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

/// Builds a grid from `(start, stop, n)` triples, naming axes `t`, `x`.
pub fn make_uniform_grid(extents: &[(f64, f64, usize)]) -> Result<Grid> {
    if extents.is_empty() || extents.len() > DEFAULT_AXIS_NAMES.len() {
        return Err(Error::InvalidGrid(format!(
            "expected 1 or 2 axes, got {}",
            extents.len()
        )));
    }
    let axes = extents
        .iter()
        .zip(DEFAULT_AXIS_NAMES)
        .map(|(&(start, stop, n), name)| Axis {
            name: name.to_string(),
            start,
            stop,
            n,
        })
        .collect();
    Grid::new(axes)
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "expected 1 or 2 axes, got {}",
                axes.len()
            )));
        }
        for axis in &axes {
            axis.validate()?;
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidGrid(format!("duplicate axis name `{}`", a.name)));
            }
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, axis: usize) -> f64 {
        self.axes[axis].step()
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    /// Distance in the flat index between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.n).product()
    }

    /// Per-axis indices of flat node `flat`.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.ndim()];
        for (a, slot) in idx.iter_mut().enumerate().rev() {
            let n = self.axes[a].n;
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .zip(&self.axes)
            .map(|(i, a)| a.node(i))
            .collect()
    }

    /// Flat offsets of the first node of every 1-D line running along `axis`.
    pub fn line_starts(&self, axis: usize) -> Vec<usize> {
        let stride = self.stride(axis);
        let n = self.axes[axis].n;
        (0..self.len())
            .filter(|&flat| (flat / stride) % n == 0)
            .collect()
    }
}

/// Samples on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Copies the 1-D line along `axis` that starts at flat offset `start`.
    pub fn line(&self, axis: usize, start: usize) -> Vec<f64> {
        let stride = self.grid.stride(axis);
        (0..self.grid.axis(axis).n)
            .map(|i| self.values[start + i * stride])
            .collect()
    }

    /// Applies a 1-D transform to every line along `axis` and scatters the
    /// results (values and validity flags) back into node order.
    pub fn map_lines<F>(&self, axis: usize, mut f: F) -> Result<(Vec<f64>, Vec<bool>)>
    where
        F: FnMut(&[f64]) -> Result<(Vec<f64>, Vec<bool>)>,
    {
        let stride = self.grid.stride(axis);
        let n = self.grid.axis(axis).n;
        let mut out = vec![0.0; self.len()];
        let mut mask = vec![false; self.len()];
        for start in self.grid.line_starts(axis) {
            let (vals, valid) = f(&self.line(axis, start))?;
            debug_assert_eq!(vals.len(), n);
            for i in 0..n {
                out[start + i * stride] = vals[i];
                mask[start + i * stride] = valid[i];
            }
        }
        Ok((out, mask))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<&str> = self.grid.axes.iter().map(|a| a.name.as_str()).collect();
        header.push("value");
        writeln!(w, "{}", header.join(","))?;
        for (flat, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> =
                self.grid.coords(flat).iter().map(|c| format!("{c:.16e}")).collect();
            row.push(format!("{v:.16e}"));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses the CSV layout written by [`Field::write_csv`], reconstructing the grid
    /// from the node coordinates.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field CSV".into()))??;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if names.len() < 2 || names.len() > 3 || names.last().map(String::as_str) != Some("value") {
            return Err(Error::Parse(format!("bad field CSV header `{header}`")));
        }
        let ndim = names.len() - 1;
        let mut coords: Vec<Vec<f64>> = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Result<Vec<f64>> = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: `{}`: {e}", lineno + 2, s.trim()))
                    })
                })
                .collect();
            let cells = cells?;
            if cells.len() != ndim + 1 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 2,
                    ndim + 1,
                    cells.len()
                )));
            }
            values.push(cells[ndim]);
            coords.push(cells[..ndim].to_vec());
        }
        if coords.is_empty() {
            return Err(Error::Parse("field CSV has no rows".into()));
        }
        // Row-major: the last axis cycles fastest.
        let mut counts = vec![0usize; ndim];
        counts[ndim - 1] = coords
            .iter()
            .take_while(|c| c[..ndim - 1] == coords[0][..ndim - 1])
            .count();
        if ndim == 2 {
            counts[0] = coords.len() / counts[1];
        }
        let stride_last = 1;
        let mut axes = Vec::with_capacity(ndim);
        for a in 0..ndim {
            let stride = if a == ndim - 1 { stride_last } else { counts[1] };
            let n = counts[a];
            if n < 1 {
                return Err(Error::Parse("field CSV has an empty axis".into()));
            }
            axes.push(Axis {
                name: names[a].clone(),
                start: coords[0][a],
                stop: coords[(n - 1) * stride][a],
                n,
            });
        }
        let grid = Grid::new(axes)?;
        if grid.len() != coords.len() {
            return Err(Error::Parse(format!(
                "field CSV rows ({}) do not form a complete grid",
                coords.len()
            )));
        }
        for (flat, c) in coords.iter().enumerate() {
            let expected = grid.coords(flat);
            for (a, (&got, &want)) in c.iter().zip(&expected).enumerate() {
                let tol = 1e-9 * grid.step(a).abs().max(want.abs());
                if (got - want).abs() > tol {
                    return Err(Error::Parse(format!(
                        "node {flat}: coordinate {got} is off the uniform grid (expected {want})"
                    )));
                }
            }
        }
        Field::new(grid, values)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Evaluates `f` at every node coordinate.
pub fn sample_function<F>(grid: &Grid, f: F) -> Result<Field>
where
    F: Fn(&[f64]) -> f64,
{
    let mut values = Vec::with_capacity(grid.len());
    for flat in 0..grid.len() {
        let c = grid.coords(flat);
        let v = f(&c);
        if !v.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sampled function is non-finite ({v}) at node {flat}, coordinates {c:?}"
            )));
        }
        values.push(v);
    }
    Field::new(grid.clone(), values)
}

/// Mean squared difference between two fields on the same grid.
pub fn mse(a: &Field, b: &Field) -> Result<f64> {
    a.ensure_same_grid(b)?;
    Ok(mse_slices(a.values(), b.values()))
}

/// Mean squared difference restricted to nodes where `mask` is true.
pub fn masked_mse(a: &Field, b: &Field, mask: &[bool]) -> Result<f64> {
    a.ensure_same_grid(b)?;
    let (sum, count) = a
        .values()
        .iter()
        .zip(b.values())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), ((x, y), _)| (s + (x - y).powi(2), c + 1));
    if count == 0 {
        return Err(Error::InvalidConfig("mask selects no nodes".into()));
    }
    Ok(sum / count as f64)
}

pub(crate) fn mse_slices(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(1) as f64;
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n
}
