//! Closed-form benchmark problems with analytic derivatives and the equations
//! they satisfy.
//!
//! | name       | equation                              | default grid           |
//! |------------|---------------------------------------|------------------------|
//! | `linear2d` | `x' = -0.1x + 2y`, `y' = -2x - 0.1y`  | `t in [0, 25]`, 2501   |
//! | `oscillator` | `u'' + 0.25u' + 3u = 0`             | `t in [0, 10]`, 1000   |
//! | `wave`     | `u_tt = 0.25 u_xx` (two standing modes) | `[0, 1]^2`, 101 x 101 |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diff::DiffRequest;
use crate::error::{Error, Result};
use crate::grid::{make_uniform_grid, sample_function, Field, Grid};

/// Linear system coefficients `(a, b, c, d)`.
pub const LINEAR2D_COEFFS: (f64, f64, f64, f64) = (-0.1, 2.0, -2.0, -0.1);
/// Oscillator mass, damping and stiffness.
pub const OSCILLATOR_PARAMS: (f64, f64, f64) = (1.0, 0.25, 3.0);
/// Wave speed.
pub const WAVE_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Linear2d,
    Oscillator,
    Wave,
}

impl BenchmarkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchmarkKind::Linear2d => "linear2d",
            BenchmarkKind::Oscillator => "oscillator",
            BenchmarkKind::Wave => "wave",
        }
    }

    pub fn default_grid(&self) -> Grid {
        let g = match self {
            BenchmarkKind::Linear2d => make_uniform_grid(&[(0.0, 25.0, 2501)]),
            BenchmarkKind::Oscillator => make_uniform_grid(&[(0.0, 10.0, 1000)]),
            BenchmarkKind::Wave => make_uniform_grid(&[(0.0, 1.0, 101), (0.0, 1.0, 101)]),
        };
        g.expect("default grids are valid")
    }

    /// Builds the benchmark with its default initial conditions.
    pub fn build(&self, grid: &Grid) -> Result<Benchmark> {
        match self {
            BenchmarkKind::Linear2d => make_linear2d(grid, 2.0, 0.0),
            BenchmarkKind::Oscillator => make_oscillator(grid, 1.0, 0.0),
            BenchmarkKind::Wave => make_wave(grid),
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear2d" => Ok(BenchmarkKind::Linear2d),
            "oscillator" => Ok(BenchmarkKind::Oscillator),
            "wave" => Ok(BenchmarkKind::Wave),
            other => Err(Error::InvalidConfig(format!("unknown benchmark `{other}`"))),
        }
    }
}

/// Known governing equation `lhs = sum coefficient * term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEquation {
    pub lhs: String,
    pub rhs: Vec<(String, f64)>,
}

impl ReferenceEquation {
    fn new(lhs: &str, rhs: &[(&str, f64)]) -> Self {
        Self { lhs: lhs.into(), rhs: rhs.iter().map(|(t, c)| (t.to_string(), *c)).collect() }
    }

    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.rhs.iter().find(|(t, _)| t == term).map(|(_, c)| *c)
    }
}

/// A derivative estimate the discovery pipeline needs for a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct RequiredDerivative {
    pub variable: String,
    pub request: DiffRequest,
    /// Term id, e.g. `u_tt`.
    pub id: String,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    pub grid: Grid,
    /// State variables in a fixed order (the order also keys noise streams).
    pub fields: Vec<(String, Field)>,
    pub truth_derivs: Vec<(String, Field)>,
    pub references: Vec<ReferenceEquation>,
}

/// `u_t`, `u_xx`, ...: variable, underscore, axis name repeated `order` times.
pub fn derivative_id(variable: &str, grid: &Grid, req: DiffRequest) -> String {
    format!("{variable}_{}", grid.axis(req.axis).name.repeat(req.order))
}

impl Benchmark {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn truth(&self, id: &str) -> Option<&Field> {
        self.truth_derivs.iter().find(|(n, _)| n == id).map(|(_, f)| f)
    }

    /// Field or analytic derivative by id.
    pub fn quantity(&self, id: &str) -> Option<&Field> {
        self.field(id).or_else(|| self.truth(id))
    }

    pub fn required_derivatives(&self) -> Vec<RequiredDerivative> {
        let req = |var: &str, axis: usize, order: usize| {
            let request = DiffRequest::new(axis, order);
            RequiredDerivative {
                variable: var.into(),
                request,
                id: derivative_id(var, &self.grid, request),
            }
        };
        match self.kind {
            BenchmarkKind::Linear2d => vec![req("x", 0, 1), req("y", 0, 1)],
            BenchmarkKind::Oscillator => vec![req("u", 0, 1), req("u", 0, 2)],
            BenchmarkKind::Wave => {
                vec![req("u", 0, 1), req("u", 1, 1), req("u", 0, 2), req("u", 1, 2)]
            }
        }
    }

    /// Largest pointwise residual of `eq` evaluated on the analytic fields.
    pub fn reference_residual(&self, eq: &ReferenceEquation) -> Result<f64> {
        let get = |id: &str| {
            self.quantity(id)
                .ok_or_else(|| Error::Library(format!("benchmark has no quantity `{id}`")))
        };
        let lhs = get(&eq.lhs)?;
        let rhs: Vec<(&Field, f64)> =
            eq.rhs.iter().map(|(t, c)| get(t).map(|f| (f, *c))).collect::<Result<_>>()?;
        Ok((0..self.grid.len())
            .map(|i| {
                let r: f64 = rhs.iter().map(|(f, c)| c * f.values()[i]).sum();
                (lhs.values()[i] - r).abs()
            })
            .fold(0.0, f64::max))
    }
}

fn require_dims(grid: &Grid, ndim: usize, name: &str) -> Result<()> {
    if grid.ndim() != ndim {
        return Err(Error::InvalidGrid(format!(
            "benchmark `{name}` needs a {ndim}-D grid, got {}-D",
            grid.ndim()
        )));
    }
    Ok(())
}

/// Spiral solution of the damped linear system from `(x0, y0)`.
pub fn make_linear2d(grid: &Grid, x0: f64, y0: f64) -> Result<Benchmark> {
    require_dims(grid, 1, "linear2d")?;
    let (a, b, c, d) = LINEAR2D_COEFFS;
    let decay = -a; // a = d = -0.1, b = -c = 2
    let w = b;
    let x = move |t: f64| (-decay * t).exp() * (x0 * (w * t).cos() + y0 * (w * t).sin());
    let y = move |t: f64| (-decay * t).exp() * (y0 * (w * t).cos() - x0 * (w * t).sin());
    let fx = sample_function(grid, |p| x(p[0]))?;
    let fy = sample_function(grid, |p| y(p[0]))?;
    let fxt = sample_function(grid, |p| a * x(p[0]) + b * y(p[0]))?;
    let fyt = sample_function(grid, |p| c * x(p[0]) + d * y(p[0]))?;
    let xt = derivative_id("x", grid, DiffRequest::new(0, 1));
    let yt = derivative_id("y", grid, DiffRequest::new(0, 1));
    let references = vec![
        ReferenceEquation::new(&xt, &[("x", a), ("y", b)]),
        ReferenceEquation::new(&yt, &[("x", c), ("y", d)]),
    ];
    Ok(Benchmark {
        kind: BenchmarkKind::Linear2d,
        grid: grid.clone(),
        fields: vec![("x".into(), fx), ("y".into(), fy)],
        truth_derivs: vec![(xt, fxt), (yt, fyt)],
        references,
    })
}

/// Underdamped oscillator `u'' + 0.25u' + 3u = 0` with `u(0) = u0`, `u'(0) = v0`.
pub fn make_oscillator(grid: &Grid, u0: f64, v0: f64) -> Result<Benchmark> {
    require_dims(grid, 1, "oscillator")?;
    let (m, q, k) = OSCILLATOR_PARAMS;
    let gamma = q / (2.0 * m);
    let omega = (k / m - gamma * gamma).sqrt();
    let (a, b) = (u0, (v0 + gamma * u0) / omega);
    // u' and u'' keep the damped-harmonic form with rotated amplitudes.
    let (p, r) = (-gamma * a + omega * b, -gamma * b - omega * a);
    let (p2, r2) = (-gamma * p + omega * r, -gamma * r - omega * p);
    let wave = move |t: f64, ca: f64, cb: f64| {
        (-gamma * t).exp() * (ca * (omega * t).cos() + cb * (omega * t).sin())
    };
    let u = sample_function(grid, |c| wave(c[0], a, b))?;
    let ut = sample_function(grid, |c| wave(c[0], p, r))?;
    let utt = sample_function(grid, |c| wave(c[0], p2, r2))?;
    let id1 = derivative_id("u", grid, DiffRequest::new(0, 1));
    let id2 = derivative_id("u", grid, DiffRequest::new(0, 2));
    let references = vec![ReferenceEquation::new(&id2, &[(&id1, -q / m), ("u", -k / m)])];
    Ok(Benchmark {
        kind: BenchmarkKind::Oscillator,
        grid: grid.clone(),
        fields: vec![("u".into(), u)],
        truth_derivs: vec![(id1, ut), (id2, utt)],
        references,
    })
}

/// `p`-th derivative of `cos` at `theta`.
fn shifted_cos(theta: f64, p: u32) -> f64 {
    (theta + p as f64 * PI / 2.0).cos()
}

/// Second standing mode's amplitude. With one mode alone `u_tt` is also a
/// multiple of `u`, so the reference would not be the only exact one-term
/// model.
pub const WAVE_SECOND_MODE: f64 = 0.5;

/// Two standing modes `sin(k pi x) cos(k c pi t)`, `k = 1, 2`, on a `(t, x)`
/// grid.
pub fn make_wave(grid: &Grid) -> Result<Benchmark> {
    require_dims(grid, 2, "wave")?;
    let modes = [(1.0, 1.0), (2.0, WAVE_SECOND_MODE)];
    // (d/dt)^p (d/dx)^q of the mode sum.
    let sample = |p: u32, q: u32| {
        sample_function(grid, move |c| {
            modes
                .iter()
                .map(|&(k, amp)| {
                    let (kx, kt) = (k * PI, k * WAVE_SPEED * PI);
                    amp * kt.powi(p as i32) * kx.powi(q as i32)
                        * shifted_cos(kt * c[0], p)
                        * shifted_cos(kx * c[1] - PI / 2.0, q)
                })
                .sum()
        })
    };
    let u = sample(0, 0)?;
    let ut = sample(1, 0)?;
    let utt = sample(2, 0)?;
    let ux = sample(0, 1)?;
    let uxx = sample(0, 2)?;
    let id = |axis, order| derivative_id("u", grid, DiffRequest::new(axis, order));
    let references =
        vec![ReferenceEquation::new(&id(0, 2), &[(&id(1, 2), WAVE_SPEED * WAVE_SPEED)])];
    Ok(Benchmark {
        kind: BenchmarkKind::Wave,
        grid: grid.clone(),
        fields: vec![("u".into(), u)],
        truth_derivs: vec![(id(0, 1), ut), (id(1, 1), ux), (id(0, 2), utt), (id(1, 2), uxx)],
        references,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{fd::fd_differentiate, FdScheme};

    #[test]
    fn linear2d_parameters_and_ics() {
        assert_eq!(LINEAR2D_COEFFS, (-0.1, 2.0, -2.0, -0.1));
        let b = BenchmarkKind::Linear2d.build(&BenchmarkKind::Linear2d.default_grid()).unwrap();
        assert_eq!(b.field("x").unwrap().values()[0], 2.0);
        assert_eq!(b.field("y").unwrap().values()[0], 0.0);
        assert_eq!(b.references[0].lhs, "x_t");
        assert_eq!(b.references[0].coefficient("y"), Some(2.0));
    }

    // Finite-difference check of analytic derivatives, independent of the
    // closed-form derivative expressions.
    fn fd_max_error(b: &Benchmark, var: &str, id: &str, axis: usize, order: usize) -> f64 {
        let r = fd_differentiate(b.field(var).unwrap(), DiffRequest::new(axis, order), FdScheme::Central)
            .unwrap();
        let truth = b.truth(id).unwrap();
        (0..b.grid.len())
            .filter(|&i| r.valid_mask[i])
            .map(|i| (r.derivative.values()[i] - truth.values()[i]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn residuals_vanish() {
        for kind in [BenchmarkKind::Linear2d, BenchmarkKind::Oscillator, BenchmarkKind::Wave] {
            let b = kind.build(&kind.default_grid()).unwrap();
            for eq in &b.references {
                let r = b.reference_residual(eq).unwrap();
                assert!(r <= 1e-10, "{kind}: residual {r}");
            }
        }
    }

    #[test]
    fn oscillator_parameters_and_ics() {
        assert_eq!(OSCILLATOR_PARAMS, (1.0, 0.25, 3.0));
        let g = make_uniform_grid(&[(0.0, 10.0, 1000)]).unwrap();
        let b = make_oscillator(&g, 0.7, -0.4).unwrap();
        assert!((b.field("u").unwrap().values()[0] - 0.7).abs() < 1e-15);
        assert!((b.truth("u_t").unwrap().values()[0] + 0.4).abs() < 1e-14);
        let eq = &b.references[0];
        assert_eq!(eq.lhs, "u_tt");
        assert_eq!(eq.coefficient("u_t"), Some(-0.25));
        assert_eq!(eq.coefficient("u"), Some(-3.0));
        assert!(b.reference_residual(eq).unwrap() <= 1e-9);
    }

    #[test]
    fn wave_boundaries_and_speed() {
        assert_eq!(WAVE_SPEED, 0.5);
        let b = make_wave(&BenchmarkKind::Wave.default_grid()).unwrap();
        let u = b.field("u").unwrap();
        let g = &b.grid;
        for flat in 0..g.len() {
            let ix = g.multi_index(flat)[1];
            if ix == 0 || ix == 100 {
                assert!(u.values()[flat].abs() < 1e-15);
            }
        }
        assert_eq!(b.references[0].lhs, "u_tt");
        assert_eq!(b.references[0].coefficient("u_xx"), Some(0.25));
    }

    #[test]
    fn wave_reference_is_the_only_one_term_identity() {
        let b = make_wave(&BenchmarkKind::Wave.default_grid()).unwrap();
        let utt = b.truth("u_tt").unwrap().values();
        let energy: f64 = utt.iter().map(|v| v * v).sum();
        for other in ["u", "u_xx"] {
            let col = b.quantity(other).unwrap().values();
            let dot: f64 = col.iter().zip(utt).map(|(a, b)| a * b).sum();
            let norm: f64 = col.iter().map(|a| a * a).sum();
            let resid: f64 = col.iter().zip(utt).map(|(a, b)| (b - dot / norm * a).powi(2)).sum();
            if other == "u" {
                assert!(resid / energy > 0.1, "u_tt is nearly a multiple of u");
            } else {
                assert!(resid / energy < 1e-20);
                assert!((dot / norm - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analytic_derivatives_agree_with_finite_differences() {
        let check = |b: &Benchmark, var, id, axis, order, n_scale: f64| {
            let e = fd_max_error(b, var, id, axis, order);
            assert!(e < n_scale, "{id}: {e}");
        };
        let lin = BenchmarkKind::Linear2d.build(&BenchmarkKind::Linear2d.default_grid()).unwrap();
        check(&lin, "x", "x_t", 0, 1, 1e-3);
        check(&lin, "y", "y_t", 0, 1, 1e-3);
        let osc = BenchmarkKind::Oscillator.build(&BenchmarkKind::Oscillator.default_grid()).unwrap();
        check(&osc, "u", "u_t", 0, 1, 1e-3);
        check(&osc, "u", "u_tt", 0, 2, 1e-3);
        let wave = BenchmarkKind::Wave.build(&BenchmarkKind::Wave.default_grid()).unwrap();
        for (id, axis, order) in [("u_t", 0, 1), ("u_x", 1, 1), ("u_tt", 0, 2), ("u_xx", 1, 2)] {
            // h^2/12 max|d^4 u| is about 7e-3 with the second mode
            check(&wave, "u", id, axis, order, 1e-2);
        }
    }

    #[test]
    fn fd_converges_at_second_order() {
        let err = |n: usize| {
            let g = make_uniform_grid(&[(0.0, 10.0, n)]).unwrap();
            let b = make_oscillator(&g, 1.0, 0.0).unwrap();
            fd_max_error(&b, "u", "u_t", 0, 1)
        };
        let ratio = err(801) / err(401);
        assert!((0.2..=0.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn wrong_dimensionality() {
        let g1 = make_uniform_grid(&[(0.0, 1.0, 10)]).unwrap();
        let g2 = make_uniform_grid(&[(0.0, 1.0, 10), (0.0, 1.0, 10)]).unwrap();
        assert!(make_wave(&g1).is_err());
        assert!(make_oscillator(&g2, 1.0, 0.0).is_err());
        assert!("heat".parse::<BenchmarkKind>().is_err());
    }
}
