//! Chebyshev building blocks behind the Savitzky-Golay fits.

use stable_diff::diff::savgol::{
    chebyshev_derivative_coeffs, chebyshev_eval, chebyshev_series, chebyshev_series_derivative, fit_window,
    ChebyshevKind,
};

fn main() -> stable_diff::Result<()> {
    for m in 0..5 {
        let t = chebyshev_eval(ChebyshevKind::First, m, 0.3)?;
        let u = chebyshev_eval(ChebyshevKind::Second, m, 0.3)?;
        println!("T_{m}(0.3) = {t:+.6}   U_{m}(0.3) = {u:+.6}");
    }

    // fit a cubic on a symmetric window and differentiate the series
    let coords: Vec<f64> = (-5..=5).map(|i| i as f64 / 5.0).collect();
    let samples: Vec<f64> = coords.iter().map(|x| 1.0 - 2.0 * x + x.powi(3)).collect();
    let coeffs = fit_window(&samples, &coords, 3)?;
    println!("coefficients {coeffs:.6?}");
    println!("derivative coefficients {:.6?}", chebyshev_derivative_coeffs(&coeffs));
    println!(
        "p(0.5) = {:.6} (exact {:.6}), p'(0.5) = {:.6} (exact {:.6})",
        chebyshev_series(&coeffs, 0.5),
        1.0 - 1.0 + 0.125,
        chebyshev_series_derivative(&coeffs, 0.5),
        -2.0 + 3.0 * 0.25
    );
    Ok(())
}
