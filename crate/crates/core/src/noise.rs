//! State-proportional Gaussian measurement noise.
//!
//! The measured value at a node is `clean + sigma * z` with
//! `sigma = kappa * |clean|` and `z` a standard normal deviate.
//!
//! # Reproducibility
//!
//! Deviates come from a ChaCha8 stream keyed by `(seed, stream)`. Node `i`
//! always consumes 32-bit words `4i..4i+4` of the stream (two `u64` draws), so
//! the deviate attached to a node depends only on the seed, the stream and the
//! node index, never on evaluation order. The two draws are turned into a
//! normal deviate by the Box-Muller cosine branch:
//!
//! ```text
//! u1 = (a >> 11 + 1) * 2^-53        in (0, 1]
//! u2 = (b >> 11) * 2^-53            in [0, 1)
//! z  = sqrt(-2 ln u1) * cos(2 pi u2)
//! ```

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Field;

/// Words of the ChaCha stream consumed per node.
const WORDS_PER_NODE: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Relative noise scale; 0 disables noise.
    pub kappa: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kappa: f64, seed: u64) -> Result<Self> {
        let spec = Self { kappa, seed };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise scale kappa must be finite and >= 0, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

fn box_muller(a: u64, b: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal deviate attached to node `index` of `(seed, stream)`.
pub fn gaussian_at(seed: u64, stream: u64, index: usize) -> f64 {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(WORDS_PER_NODE * index as u128);
    let a = rng.next_u64();
    let b = rng.next_u64();
    box_muller(a, b)
}

/// Standard normal deviates for nodes `0..n` of `(seed, stream)`.
pub fn gaussian_sequence(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, stream);
    (0..n)
        .map(|_| {
            let a = rng.next_u64();
            let b = rng.next_u64();
            box_muller(a, b)
        })
        .collect()
}

/// Adds noise drawn from stream 0.
pub fn contaminate(clean: &Field, spec: NoiseSpec) -> Result<Field> {
    contaminate_stream(clean, spec, 0)
}

/// Adds noise drawn from an explicit stream, so several state variables of one
/// benchmark can share a seed yet receive independent realizations.
pub fn contaminate_stream(clean: &Field, spec: NoiseSpec, stream: u64) -> Result<Field> {
    spec.validate()?;
    if spec.kappa == 0.0 {
        return Ok(clean.clone());
    }
    let z = gaussian_sequence(spec.seed, stream, clean.len());
    let values = clean
        .values()
        .iter()
        .zip(z)
        .map(|(&u, z)| u + spec.kappa * u.abs() * z)
        .collect();
    Field::new(clean.grid().clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_uniform_grid, sample_function};

    fn constant(n: usize, c: f64) -> Field {
        let g = make_uniform_grid(&[(0.0, 1.0, n)]).unwrap();
        sample_function(&g, |_| c).unwrap()
    }

    #[test]
    fn zero_kappa_is_identity() {
        let g = make_uniform_grid(&[(0.0, 1.0, 50)]).unwrap();
        let f = sample_function(&g, |c| (7.0 * c[0]).sin()).unwrap();
        let out = contaminate(&f, NoiseSpec::new(0.0, 9).unwrap()).unwrap();
        assert_eq!(out.values(), f.values());
    }

    #[test]
    fn deterministic_per_seed() {
        let f = constant(1000, 3.0);
        let spec = NoiseSpec::new(0.05, 1234).unwrap();
        let a = contaminate(&f, spec).unwrap();
        let b = contaminate(&f, spec).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn negative_kappa_rejected() {
        assert!(NoiseSpec::new(-0.1, 0).is_err());
        let f = constant(10, 1.0);
        let spec = NoiseSpec { kappa: -1.0, seed: 0 };
        assert!(contaminate(&f, spec).is_err());
    }

    #[test]
    fn random_access_matches_sequence() {
        let seq = gaussian_sequence(77, 3, 500);
        for i in [0usize, 1, 17, 250, 499] {
            assert_eq!(gaussian_at(77, 3, i), seq[i]);
        }
    }

    #[test]
    fn scale_statistics() {
        // sigma = 0.1 * 10 = 1; average the sample std over a few seeds.
        let f = constant(100_000, 10.0);
        let mut stds = Vec::new();
        for seed in 0..4 {
            let noisy = contaminate(&f, NoiseSpec::new(0.1, seed).unwrap()).unwrap();
            let eps: Vec<f64> = noisy.values().iter().map(|v| v - 10.0).collect();
            let n = eps.len() as f64;
            let mean = eps.iter().sum::<f64>() / n;
            let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
            // |mean| <= 4 sigma / sqrt(N)
            assert!(mean.abs() <= 4.0 / n.sqrt(), "seed {seed}: mean {mean}");
            stds.push(var.sqrt());
        }
        let avg = stds.iter().sum::<f64>() / stds.len() as f64;
        assert!((0.99..=1.01).contains(&avg), "average std {avg}");
    }

    #[test]
    fn zero_state_gets_zero_noise() {
        let g = make_uniform_grid(&[(-1.0, 1.0, 201)]).unwrap();
        let f = sample_function(&g, |c| if c[0].abs() < 0.25 { 0.0 } else { c[0] }).unwrap();
        let noisy = contaminate(&f, NoiseSpec::new(0.3, 5).unwrap()).unwrap();
        for (a, b) in f.values().iter().zip(noisy.values()) {
            if *a == 0.0 {
                assert_eq!(*b, 0.0);
            }
        }
    }

    #[test]
    fn seeds_and_streams_change_realization() {
        let f = constant(10_000, 2.0);
        let a = contaminate(&f, NoiseSpec::new(0.05, 1).unwrap()).unwrap();
        let b = contaminate(&f, NoiseSpec::new(0.05, 2).unwrap()).unwrap();
        let c = contaminate_stream(&f, NoiseSpec::new(0.05, 1).unwrap(), 1).unwrap();
        for other in [&b, &c] {
            let differ = a
                .values()
                .iter()
                .zip(other.values())
                .filter(|(x, y)| x != y)
                .count();
            assert!(differ as f64 >= 0.99 * f.len() as f64);
        }
    }
}
