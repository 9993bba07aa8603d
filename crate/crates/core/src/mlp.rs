//! One-hidden-layer perceptron for scalar regression.
//!
//! The model computes `F(x) = β + Σ_i a_i ψ(w_iᵀx + b_i)` with a bounded,
//! smooth transfer function ψ. Parameters flatten to a single vector in the
//! fixed order `(w_1, …, w_k, b_1, …, b_k, a_1, …, a_k, β)`, which is the
//! layout used by [`backprop_gradient`] and by serialized models.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, MinimizeOptions};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transfer {
    Tanh,
    Logistic,
}

impl Transfer {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Transfer::Tanh => z.tanh(),
            Transfer::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation value `h = ψ(z)`.
    #[inline]
    fn slope_at_output(self, h: f64) -> f64 {
        match self {
            Transfer::Tanh => 1.0 - h * h,
            Transfer::Logistic => h * (1.0 - h),
        }
    }
}

impl std::fmt::Display for Transfer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Transfer::Tanh => "tanh",
            Transfer::Logistic => "logistic",
        })
    }
}

impl std::str::FromStr for Transfer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Transfer::Tanh),
            "logistic" => Ok(Transfer::Logistic),
            other => Err(Error::invalid(format!("unknown transfer function `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MlpParams {
    input_dim: usize,
    hidden_weights: Vec<Vec<f64>>,
    hidden_biases: Vec<f64>,
    output_weights: Vec<f64>,
    intercept: f64,
    transfer: Transfer,
}

impl MlpParams {
    pub fn new(
        hidden_weights: Vec<Vec<f64>>,
        hidden_biases: Vec<f64>,
        output_weights: Vec<f64>,
        intercept: f64,
        transfer: Transfer,
    ) -> Result<Self> {
        let k = hidden_weights.len();
        if k == 0 {
            return Err(Error::invalid("an MLP needs at least one hidden unit"));
        }
        let p = hidden_weights[0].len();
        if p == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if let Some(bad) = hidden_weights.iter().find(|w| w.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: bad.len(),
            });
        }
        for v in [&hidden_biases, &output_weights] {
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: v.len(),
                });
            }
        }
        Ok(MlpParams {
            input_dim: p,
            hidden_weights,
            hidden_biases,
            output_weights,
            intercept,
            transfer,
        })
    }

    /// All-zero parameters; the model outputs 0 everywhere.
    pub fn zeros(input_dim: usize, hidden: usize, transfer: Transfer) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::invalid("input dimension and hidden count must be positive"));
        }
        Ok(MlpParams {
            input_dim,
            hidden_weights: vec![vec![0.0; input_dim]; hidden],
            hidden_biases: vec![0.0; hidden],
            output_weights: vec![0.0; hidden],
            intercept: 0.0,
            transfer,
        })
    }

    /// Rebuilds parameters from the flat layout.
    pub fn from_flat(input_dim: usize, hidden: usize, transfer: Transfer, theta: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(input_dim, hidden, transfer)?;
        if theta.len() != params.param_count() {
            return Err(Error::DimensionMismatch {
                expected: params.param_count(),
                got: theta.len(),
            });
        }
        params.set_flat(theta);
        Ok(params)
    }

    fn random(input_dim: usize, hidden: usize, transfer: Transfer, intercept: f64, rng: &mut crate::rng::Rng) -> Self {
        let scale = 0.7 / (input_dim as f64).sqrt();
        let hidden_weights = (0..hidden)
            .map(|_| (0..input_dim).map(|_| rng.random_range(-scale..=scale)).collect())
            .collect();
        let hidden_biases = (0..hidden).map(|_| rng.random_range(-0.7..=0.7)).collect();
        let output_weights = (0..hidden).map(|_| rng.random_range(-0.7..=0.7)).collect();
        MlpParams {
            input_dim,
            hidden_weights,
            hidden_biases,
            output_weights,
            intercept,
            transfer,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_weights.len()
    }

    pub fn transfer(&self) -> Transfer {
        self.transfer
    }

    pub fn hidden_weights(&self) -> &[Vec<f64>] {
        &self.hidden_weights
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.hidden_biases
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.output_weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// `k(p + 2) + 1`.
    pub fn param_count(&self) -> usize {
        self.hidden_count() * (self.input_dim + 2) + 1
    }

    /// Scales the output layer `(a, β)` by `factor`.
    pub fn scale_output(&mut self, factor: f64) {
        self.output_weights.iter_mut().for_each(|a| *a *= factor);
        self.intercept *= factor;
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.param_count());
        for w in &self.hidden_weights {
            theta.extend_from_slice(w);
        }
        theta.extend_from_slice(&self.hidden_biases);
        theta.extend_from_slice(&self.output_weights);
        theta.push(self.intercept);
        theta
    }

    fn set_flat(&mut self, theta: &[f64]) {
        let (p, k) = (self.input_dim, self.hidden_count());
        for (i, w) in self.hidden_weights.iter_mut().enumerate() {
            w.copy_from_slice(&theta[i * p..(i + 1) * p]);
        }
        let off = k * p;
        self.hidden_biases.copy_from_slice(&theta[off..off + k]);
        self.output_weights.copy_from_slice(&theta[off + k..off + 2 * k]);
        self.intercept = theta[off + 2 * k];
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.eval(x))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let mut out = self.intercept;
        for ((w, b), a) in self.hidden_weights.iter().zip(&self.hidden_biases).zip(&self.output_weights) {
            let z = dot(w, x) + b;
            out += a * self.transfer.apply(z);
        }
        out
    }

    /// Adds `scale · ∂F(x)/∂θ` into `grad`.
    fn accumulate_gradient(&self, x: &[f64], scale: f64, grad: &mut [f64], hidden: &mut [f64]) {
        let (p, k) = (self.input_dim, self.hidden_count());
        for (h, (w, b)) in hidden.iter_mut().zip(self.hidden_weights.iter().zip(&self.hidden_biases)) {
            *h = self.transfer.apply(dot(w, x) + b);
        }
        let off = k * p;
        for i in 0..k {
            let delta = scale * self.output_weights[i] * self.transfer.slope_at_output(hidden[i]);
            for (g, xj) in grad[i * p..(i + 1) * p].iter_mut().zip(x) {
                *g += delta * xj;
            }
            grad[off + i] += delta;
            grad[off + k + i] += scale * hidden[i];
        }
        grad[off + 2 * k] += scale;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: Vec<f64>,
    pub target: f64,
}

impl TrainingPair {
    pub fn new(input: Vec<f64>, target: f64) -> Self {
        TrainingPair { input, target }
    }
}

fn check_pairs(params: &MlpParams, pairs: &[TrainingPair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    for pair in pairs {
        params.check_input(&pair.input)?;
    }
    Ok(())
}

fn check_weights(pairs: &[TrainingPair], weights: &[f64]) -> Result<f64> {
    if weights.len() != pairs.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("sample weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("sample weights sum to zero"));
    }
    Ok(total)
}

/// Mean squared error `E_n(θ) = (1/N) Σ (Y_i − F_θ(U_i))²`.
pub fn mse_loss(params: &MlpParams, pairs: &[TrainingPair]) -> Result<f64> {
    check_pairs(params, pairs)?;
    Ok(pairs.iter().map(|p| (p.target - params.eval(&p.input)).powi(2)).sum::<f64>() / pairs.len() as f64)
}

/// Gradient of [`mse_loss`] in the flat parameter layout.
pub fn backprop_gradient(params: &MlpParams, pairs: &[TrainingPair]) -> Result<Vec<f64>> {
    check_pairs(params, pairs)?;
    Ok(loss_and_gradient(params, pairs, None, pairs.len() as f64).1)
}

/// Weighted loss `Σ w_i r_i² / Σ w_i` and its gradient; `weights = None`
/// means unit weights. `total` is the weight sum.
fn loss_and_gradient(params: &MlpParams, pairs: &[TrainingPair], weights: Option<&[f64]>, total: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.param_count()];
    let mut hidden = vec![0.0; params.hidden_count()];
    let mut loss = 0.0;
    for (i, pair) in pairs.iter().enumerate() {
        let w = weights.map_or(1.0, |ws| ws[i]);
        if w == 0.0 {
            continue;
        }
        let residual = params.eval(&pair.input) - pair.target;
        loss += w * residual * residual;
        params.accumulate_gradient(&pair.input, 2.0 * w * residual / total, &mut grad, &mut hidden);
    }
    (loss / total, grad)
}

/// Weighted mean squared error, `Σ w_i (Y_i − F(U_i))² / Σ w_i`.
pub fn weighted_mse(params: &MlpParams, pairs: &[TrainingPair], weights: &[f64]) -> Result<f64> {
    check_pairs(params, pairs)?;
    let total = check_weights(pairs, weights)?;
    Ok(pairs
        .iter()
        .zip(weights)
        .map(|(p, w)| w * (p.target - params.eval(&p.input)).powi(2))
        .sum::<f64>()
        / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub transfer: Transfer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            restarts: 5,
            max_iters: 500,
            grad_tol: 1e-10,
            transfer: Transfer::Tanh,
        }
    }
}

impl TrainConfig {
    fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMlp {
    pub params: MlpParams,
    /// Final (weighted) mean squared error.
    pub loss: f64,
    /// Index of the restart that produced `params`.
    pub restart: usize,
}

/// Fits a `k`-hidden-unit perceptron by quasi-Newton descent with
/// backtracking from `config.restarts` seeded random starts and keeps the
/// best, breaking ties toward the lowest restart index.
pub fn train_mlp(pairs: &[TrainingPair], k: usize, config: &TrainConfig, seed: u64) -> Result<TrainedMlp> {
    train_impl(pairs, None, k, config, seed)
}

/// As [`train_mlp`], minimizing the weighted mean squared error.
pub fn train_mlp_weighted(
    pairs: &[TrainingPair],
    weights: &[f64],
    k: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainedMlp> {
    train_impl(pairs, Some(weights), k, config, seed)
}

fn train_impl(pairs: &[TrainingPair], weights: Option<&[f64]>, k: usize, config: &TrainConfig, seed: u64) -> Result<TrainedMlp> {
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    if k == 0 {
        return Err(Error::invalid("hidden unit count must be at least 1"));
    }
    if config.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let p = pairs[0].input.len();
    let probe = MlpParams::zeros(p, k, config.transfer)?;
    check_pairs(&probe, pairs)?;
    let total = match weights {
        Some(w) => check_weights(pairs, w)?,
        None => pairs.len() as f64,
    };
    let target_mean = match weights {
        Some(w) => pairs.iter().zip(w).map(|(pr, wi)| wi * pr.target).sum::<f64>() / total,
        None => pairs.iter().map(|pr| pr.target).sum::<f64>() / total,
    };

    let outcomes: Vec<Result<TrainedMlp>> = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = seeded(derive_seed(seed, restart as u64));
            let init = MlpParams::random(p, k, config.transfer, target_mean, &mut rng);
            fit_from(init, pairs, weights, total, config).map(|(params, loss)| TrainedMlp { params, loss, restart }).map_err(|_| Error::Diverged { restart })
        })
        .collect();

    let mut best: Option<TrainedMlp> = None;
    let mut first_err = None;
    for outcome in outcomes {
        match outcome {
            Ok(t) => {
                if best.as_ref().is_none_or(|b| t.loss < b.loss) {
                    best = Some(t);
                }
            }
            Err(e) => {
                log::warn!("{e}");
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one restart ran"))
}

fn fit_from(
    init: MlpParams,
    pairs: &[TrainingPair],
    weights: Option<&[f64]>,
    total: f64,
    config: &TrainConfig,
) -> std::result::Result<(MlpParams, f64), optim::NonFinite> {
    let mut work = init.clone();
    let objective = |theta: &[f64]| {
        work.set_flat(theta);
        loss_and_gradient(&work, pairs, weights, total)
    };
    let min = optim::minimize(init.flatten(), objective, &config.minimize_options())?;
    let mut params = init;
    params.set_flat(&min.x);
    Ok((params, min.value))
}

/// Improves `params` on the weighted loss for at most `max_iters` descent
/// iterations. The result never has a larger weighted loss than the input.
pub fn refine_weighted(params: &MlpParams, pairs: &[TrainingPair], weights: &[f64], max_iters: usize) -> Result<TrainedMlp> {
    check_pairs(params, pairs)?;
    let total = check_weights(pairs, weights)?;
    let config = TrainConfig {
        restarts: 1,
        max_iters,
        grad_tol: 1e-12,
        transfer: params.transfer,
    };
    let (params, loss) = fit_from(params.clone(), pairs, Some(weights), total, &config).map_err(|_| Error::Diverged { restart: 0 })?;
    Ok(TrainedMlp { params, loss, restart: 0 })
}

/// Builds autoregressive pairs `U_t = (Y_{t−1}, …, Y_{t−p}) → Y_t`.
pub fn embed_autoregressive(series: &[f64], window: usize) -> Result<Vec<TrainingPair>> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    if series.len() <= window {
        return Err(Error::invalid(format!(
            "series of length {} is too short for window {window}",
            series.len()
        )));
    }
    Ok((window..series.len())
        .map(|t| TrainingPair {
            input: (1..=window).map(|lag| series[t - lag]).collect(),
            target: series[t],
        })
        .collect())
}

/// Trapezoid-rule weights on an increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let g = grid.len();
    let mut w = vec![0.0; g];
    for i in 0..g - 1 {
        let half = 0.5 * (grid[i + 1] - grid[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    Ok(w)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid points must be strictly increasing"));
    }
    Ok(())
}

/// A neuron acting on sampled functions: `ψ(b + ∫ f w dμ)`, with the
/// measure discretized into quadrature weights on the sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionalNeuron {
    grid: Vec<f64>,
    quadrature: Vec<f64>,
    weight_samples: Vec<f64>,
    bias: f64,
    transfer: Transfer,
}

impl FunctionalNeuron {
    pub fn new(grid: Vec<f64>, quadrature: Vec<f64>, weight_samples: Vec<f64>, bias: f64, transfer: Transfer) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid("empty grid"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid points must be strictly increasing"));
        }
        for v in [&quadrature, &weight_samples] {
            if v.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    got: v.len(),
                });
            }
        }
        if quadrature.iter().any(|q| !(*q >= 0.0)) || !(quadrature.iter().sum::<f64>() > 0.0) {
            return Err(Error::invalid("quadrature weights must be nonnegative with positive sum"));
        }
        Ok(FunctionalNeuron {
            grid,
            quadrature,
            weight_samples,
            bias,
            transfer,
        })
    }

    /// Uses trapezoid weights on `grid`.
    pub fn with_trapezoid(grid: Vec<f64>, weight_samples: Vec<f64>, bias: f64, transfer: Transfer) -> Result<Self> {
        let quadrature = trapezoid_weights(&grid)?;
        Self::new(grid, quadrature, weight_samples, bias, transfer)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn forward(&self, f_samples: &[f64]) -> Result<f64> {
        if f_samples.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                got: f_samples.len(),
            });
        }
        let integral: f64 = self
            .quadrature
            .iter()
            .zip(f_samples)
            .zip(&self.weight_samples)
            .map(|((q, f), w)| q * f * w)
            .sum();
        Ok(self.transfer.apply(self.bias + integral))
    }
}
