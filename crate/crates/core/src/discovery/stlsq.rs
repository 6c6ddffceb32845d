use nalgebra::{DMatrix, DVector};

use super::{CandidateLibrary, EquationModel};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Least-squares fit restricted to `active` columns; returns full-length
/// coefficients and the mean squared residual.
pub(crate) fn fit_subset(
    matrix: &DMatrix<f64>,
    target: &DVector<f64>,
    active: &[usize],
) -> Result<(Vec<f64>, f64)> {
    let mut coefs = vec![0.0; matrix.ncols()];
    let rows = matrix.nrows();
    if active.is_empty() {
        return Ok((coefs, target.norm_squared() / rows as f64));
    }
    let sub = matrix.select_columns(active);
    let x = least_squares(&sub, target)?;
    let residual = (&sub * &x - target).norm_squared() / rows as f64;
    for (k, &j) in active.iter().enumerate() {
        coefs[j] = x[k];
    }
    Ok((coefs, residual))
}

/// Sequentially thresholded least squares: fit, drop every coefficient with
/// magnitude below `threshold`, refit on the survivors, until no coefficient
/// is dropped or `max_iter` rounds have run. If every term is dropped the
/// result is an empty model (complexity 0) rather than an error.
pub fn stlsq(lib: &CandidateLibrary, threshold: f64, max_iter: usize) -> Result<EquationModel> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::InvalidConfig(format!("threshold must be finite and >= 0, got {threshold}")));
    }
    if lib.nrows() < lib.ncols() {
        return Err(Error::Library(format!(
            "library has {} rows for {} columns",
            lib.nrows(),
            lib.ncols()
        )));
    }
    // Coefficients equal to the threshold up to round-off survive, so a true
    // value of exactly `threshold` is not lost to refit noise.
    let cut = threshold * (1.0 - 1e-9);
    let mut active: Vec<usize> = (0..lib.ncols()).collect();
    let (mut coefs, mut residual) = fit_subset(&lib.matrix, &lib.target, &active)?;
    for _ in 0..max_iter.max(1) {
        let keep: Vec<usize> = active.iter().copied().filter(|&j| coefs[j].abs() >= cut).collect();
        if keep.len() == active.len() {
            break;
        }
        active = keep;
        (coefs, residual) = fit_subset(&lib.matrix, &lib.target, &active)?;
        if active.is_empty() {
            break;
        }
    }
    // Anything still below threshold after the last round is dropped without a refit.
    for c in coefs.iter_mut() {
        if c.abs() < cut {
            *c = 0.0;
        }
    }
    Ok(EquationModel::new(lib.target_term.clone(), lib.terms.clone(), coefs, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::BenchmarkKind;
    use crate::discovery::{build_library, polynomial_terms, Quantities, TermSpec};

    fn t(s: &str) -> TermSpec {
        s.parse().unwrap()
    }

    fn linear2d_library(target: &str) -> CandidateLibrary {
        let b = BenchmarkKind::Linear2d.build(&BenchmarkKind::Linear2d.default_grid()).unwrap();
        let mut q = Quantities::new();
        for (name, f) in b.fields.iter().chain(&b.truth_derivs) {
            q.insert_field(name, f).unwrap();
        }
        build_library(&q, &polynomial_terms(&["x", "y"], 2), &t(target)).unwrap()
    }

    #[test]
    fn exact_linear_system_recovered() {
        let lib = linear2d_library("x_t");
        let m = stlsq(&lib, 0.1, 10).unwrap();
        assert!((m.coefficient(&t("x")).unwrap() + 0.1).abs() < 1e-6);
        assert!((m.coefficient(&t("y")).unwrap() - 2.0).abs() < 1e-6);
        for other in ["1", "x^2", "x*y", "y^2"] {
            assert_eq!(m.coefficient(&t(other)), Some(0.0), "{other}");
        }
        assert_eq!(m.complexity, 2);
        let m = stlsq(&linear2d_library("y_t"), 0.1, 10).unwrap();
        assert!((m.coefficient(&t("x")).unwrap() + 2.0).abs() < 1e-6);
        assert!((m.coefficient(&t("y")).unwrap() + 0.1).abs() < 1e-6);
    }

    #[test]
    fn target_equal_to_a_column() {
        let lib = linear2d_library("x");
        let m = stlsq(&lib, 0.1, 10).unwrap();
        assert!((m.coefficient(&t("x")).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(m.complexity, 1);
        assert!(m.residual_mse < 1e-20);
    }

    #[test]
    fn over_thresholding_gives_empty_model() {
        let lib = linear2d_library("x_t");
        let m = stlsq(&lib, 100.0, 10).unwrap();
        assert!(m.is_empty());
        assert!(m.coefficients.iter().all(|&c| c == 0.0));
        assert!((m.residual_mse - lib.target.norm_squared() / lib.nrows() as f64).abs() < 1e-12);
    }

    #[test]
    fn survivors_are_a_fixed_point() {
        let lib = linear2d_library("y_t");
        let m = stlsq(&lib, 0.05, 10).unwrap();
        let active: Vec<usize> = (0..lib.ncols()).filter(|&j| m.coefficients[j] != 0.0).collect();
        let (again, _) = fit_subset(&lib.matrix, &lib.target, &active).unwrap();
        for (a, b) in again.iter().zip(&m.coefficients) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn underdetermined_rejected() {
        let mut q = Quantities::new();
        q.insert("x", vec![1.0, 2.0], vec![true; 2]).unwrap();
        let lib = build_library(&q, &polynomial_terms(&["x"], 2), &t("x")).unwrap();
        assert!(stlsq(&lib, 0.1, 10).is_err());
        assert!(stlsq(&linear2d_library("x_t"), f64::NAN, 10).is_err());
    }
}
