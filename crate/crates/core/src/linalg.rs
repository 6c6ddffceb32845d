//! Small linear-algebra helpers: a banded LU solver and a rank-tolerant
//! least-squares fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Square band matrix with `lower` sub- and `upper` super-diagonals.
///
/// Each row keeps `lower` extra slots on the right to absorb fill-in from
/// partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    rows: Vec<Vec<f64>>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        Self { n, lower, upper, rows: vec![vec![0.0; width]; n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        j + self.lower - i
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.lower >= i && j <= i + self.upper,
            "entry ({i}, {j}) lies outside the band"
        );
        let s = self.slot(i, j);
        self.rows[i][s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper + self.lower {
            return 0.0;
        }
        self.rows[i][self.slot(i, j)]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting; consumes the matrix.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let (kl, ku) = (self.lower, self.upper);
        let reach = kl + ku; // furthest column a row can touch after pivoting
        let mut b = rhs.to_vec();
        let scale = self
            .rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::Singular);
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let pivot = (k..=last_row)
                .max_by(|&a, &c| self.get(a, k).abs().total_cmp(&self.get(c, k).abs()))
                .unwrap();
            if self.get(pivot, k).abs() <= f64::EPSILON * scale * 1e-6 {
                return Err(Error::Singular);
            }
            let last_col = (k + reach).min(n - 1);
            if pivot != k {
                for j in k..=last_col {
                    let (sp, sk) = (self.slot(pivot, j), self.slot(k, j));
                    let tmp = self.rows[pivot][sp];
                    self.rows[pivot][sp] = self.rows[k][sk];
                    self.rows[k][sk] = tmp;
                }
                b.swap(pivot, k);
            }
            let diag = self.get(k, k);
            for i in k + 1..=last_row {
                let factor = self.get(i, k) / diag;
                if factor == 0.0 {
                    continue;
                }
                for j in k..=last_col {
                    let v = self.get(k, j);
                    if v != 0.0 {
                        let s = self.slot(i, j);
                        self.rows[i][s] -= factor * v;
                    }
                }
                b[i] -= factor * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let s: f64 = (k + 1..=last_col).map(|j| self.get(k, j) * x[j]).sum();
            x[k] = (b[k] - s) / self.get(k, k);
        }
        Ok(x)
    }
}

/// Least-squares solution of `a x ~ b` with column scaling and an SVD
/// pseudo-inverse; directions with relative singular value below `1e-12` are
/// dropped, so collinear columns produce the minimum-norm solution.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidConfig(format!(
            "design has {} rows but target has {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let norms: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 { n } else { 1.0 }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= norms[j];
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = if smax > 0.0 { smax * 1e-12 } else { 1e-300 };
    let mut x = svd.solve(b, eps).map_err(|_| Error::RankDeficient)?;
    for (j, v) in x.iter_mut().enumerate() {
        *v /= norms[j];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_solve_matches_dense() {
        let n = 40;
        let mut band = BandMatrix::zeros(n, 2, 2);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                // Small diagonal forces pivoting.
                let v = if i == j { 0.01 * ((i % 3) as f64) } else { 1.0 + ((i * 7 + j * 3) % 5) as f64 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = band.clone().solve(&rhs).unwrap();
        let ax = band.mul_vec(&x);
        for (a, b) in ax.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-9);
        }
        let xd = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for (a, b) in x.iter().zip(xd.iter()) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn singular_band_detected() {
        let band = BandMatrix::zeros(5, 1, 1);
        assert!(matches!(band.solve(&[1.0; 5]), Err(Error::Singular)));
    }

    #[test]
    fn least_squares_collinear_columns() {
        let a = DMatrix::from_fn(20, 2, |i, j| (i as f64 + 1.0) * if j == 0 { 1.0 } else { 3.0 });
        let b = DVector::from_fn(20, |i, _| 2.0 * (i as f64 + 1.0));
        let x = least_squares(&a, &b).unwrap();
        let r = &a * &x - &b;
        assert!(r.norm() < 1e-9);
    }
}
