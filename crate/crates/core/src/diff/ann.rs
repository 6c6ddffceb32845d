//! Neural-network smoothing followed by finite differences.
//!
//! A fully connected `tanh` network is fit to the sampled field by full-batch
//! gradient descent with momentum on the mean squared error. Coordinates are
//! mapped to `[-1, 1]` per axis and targets standardised before training; the
//! network's predictions on the grid are mapped back and then differentiated
//! with central differences.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fd, DiffRequest, DiffResult, FdScheme};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnConfig {
    #[serde(default = "default_hidden")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_epochs() -> usize {
    10_000
}
fn default_lr() -> f64 {
    0.01
}

impl Default for AnnConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: default_hidden(),
            epochs: default_epochs(),
            learning_rate: default_lr(),
            seed: 0,
        }
    }
}

impl AnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "the network needs at least one non-empty hidden layer".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Dense network: `tanh` on hidden layers, identity on the scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Parameter gradients, laid out like [`Mlp::layers`].
pub type Gradients = Vec<Layer>;

/// Weights and biases uniform in `+-1/sqrt(fan_in)`.
pub fn mlp_init(cfg: &AnnConfig, input_dim: usize) -> Result<Mlp> {
    cfg.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidConfig("network input dimension must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sizes = vec![input_dim];
    sizes.extend(&cfg.hidden_sizes);
    sizes.push(1);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights =
                DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound));
            let bias = DVector::from_fn(fan_out, |_, _| rng.random_range(-bound..bound));
            Layer { weights, bias }
        })
        .collect();
    Ok(Mlp { layers })
}

impl Mlp {
    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters: per layer, column-major weights then bias.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().unwrap();
            }
        }
    }

    fn check_inputs(&self, inputs: &DMatrix<f64>) -> Result<()> {
        if inputs.nrows() != self.input_dim() {
            return Err(Error::InvalidConfig(format!(
                "network expects {}-D inputs, got {}",
                self.input_dim(),
                inputs.nrows()
            )));
        }
        Ok(())
    }

    /// Activations of every layer for a batch stored column-wise
    /// (`input_dim x batch`). Element 0 is the input itself.
    fn activations(&self, inputs: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.clone());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, inputs: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.check_inputs(inputs)?;
        Ok(self.activations(inputs).last().unwrap().iter().copied().collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(&DMatrix::from_column_slice(x.len(), 1, x))?[0])
    }

    /// Mean squared error over the batch and its gradient by backpropagation.
    pub fn loss_and_gradient(&self, inputs: &DMatrix<f64>, targets: &[f64]) -> Result<(f64, Gradients)> {
        self.check_inputs(inputs)?;
        if targets.len() != inputs.ncols() {
            return Err(Error::InvalidConfig(format!(
                "{} targets for a batch of {}",
                targets.len(),
                inputs.ncols()
            )));
        }
        let acts = self.activations(inputs);
        let batch = targets.len() as f64;
        let out = acts.last().unwrap();
        let residual = DMatrix::from_fn(1, targets.len(), |_, j| out[(0, j)] - targets[j]);
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / batch;

        let mut delta = residual * (2.0 / batch);
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let prev = &acts[i];
            let gw = &delta * prev.transpose();
            let gb = DVector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()));
            grads.push(Layer { weights: gw, bias: gb });
            if i > 0 {
                let mut back = layer.weights.transpose() * &delta;
                back.zip_apply(prev, |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
        }
        grads.reverse();
        Ok((loss, grads))
    }

    pub fn loss(&self, inputs: &DMatrix<f64>, targets: &[f64]) -> Result<f64> {
        let out = self.forward(inputs)?;
        Ok(out.iter().zip(targets).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / targets.len() as f64)
    }
}

/// Full-batch momentum descent for `epochs` steps. The trace holds the loss
/// evaluated before each step.
pub fn train_on(
    mut net: Mlp,
    inputs: &DMatrix<f64>,
    targets: &[f64],
    epochs: usize,
    learning_rate: f64,
) -> Result<(Mlp, Vec<f64>)> {
    let mut velocity: Vec<Layer> = net
        .layers
        .iter()
        .map(|l| Layer {
            weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
            bias: DVector::zeros(l.bias.len()),
        })
        .collect();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = net.loss_and_gradient(inputs, targets)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        trace.push(loss);
        for ((layer, vel), grad) in net.layers.iter_mut().zip(&mut velocity).zip(&grads) {
            vel.weights *= MOMENTUM;
            vel.weights -= &grad.weights * learning_rate;
            vel.bias *= MOMENTUM;
            vel.bias -= &grad.bias * learning_rate;
            layer.weights += &vel.weights;
            layer.bias += &vel.bias;
        }
    }
    if net.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence { epoch: epochs });
    }
    Ok((net, trace))
}

/// Affine maps between physical coordinates/values and the training scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub axis_bounds: Vec<(f64, f64)>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Normalization {
    fn fit(data: &Field) -> Self {
        let axis_bounds = data.grid().axes().iter().map(|a| (a.start, a.stop)).collect();
        let n = data.len() as f64;
        let mean = data.values().iter().sum::<f64>() / n;
        let var = data.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { axis_bounds, target_mean: mean, target_std: std }
    }

    /// Grid nodes as a `dim x nodes` matrix in `[-1, 1]` coordinates.
    pub fn inputs(&self, grid: &Grid) -> DMatrix<f64> {
        let dim = grid.ndim();
        DMatrix::from_fn(dim, grid.len(), |a, j| {
            let (lo, hi) = self.axis_bounds[a];
            let c = grid.coords(j)[a];
            (2.0 * c - (lo + hi)) / (hi - lo)
        })
    }
}

/// Result of fitting a network to a field.
#[derive(Debug, Clone)]
pub struct AnnFit {
    pub net: Mlp,
    pub normalization: Normalization,
    pub loss_trace: Vec<f64>,
    /// Network prediction at every grid node, in physical units.
    pub smoothed: Field,
}

/// Initialises a network from `cfg` and trains it as [`mlp_train`].
pub fn ann_smooth(data: &Field, cfg: &AnnConfig) -> Result<AnnFit> {
    let net = mlp_init(cfg, data.grid().ndim())?;
    mlp_train(net, data, cfg)
}

/// Trains `net` on the normalised field for `cfg.epochs` steps and evaluates
/// it on the grid.
pub fn mlp_train(net: Mlp, data: &Field, cfg: &AnnConfig) -> Result<AnnFit> {
    cfg.validate()?;
    let norm = Normalization::fit(data);
    let inputs = norm.inputs(data.grid());
    let targets: Vec<f64> =
        data.values().iter().map(|v| (v - norm.target_mean) / norm.target_std).collect();
    let (net, loss_trace) = train_on(net, &inputs, &targets, cfg.epochs, cfg.learning_rate)?;
    let pred = net.forward(&inputs)?;
    let values = pred.iter().map(|p| p * norm.target_std + norm.target_mean).collect();
    let smoothed = Field::new(data.grid().clone(), values)?;
    Ok(AnnFit { net, normalization: norm, loss_trace, smoothed })
}

pub fn ann_differentiate(data: &Field, req: DiffRequest, cfg: &AnnConfig) -> Result<DiffResult> {
    req.validate(data.grid())?;
    let fit = ann_smooth(data, cfg)?;
    fd::fd_differentiate(&fit.smoothed, req, FdScheme::Central)
}

/// `epoch,loss` lines.
pub fn write_loss_trace<W: std::io::Write>(trace: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "epoch,loss")?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(w, "{i},{l:e}")?;
    }
    Ok(())
}
