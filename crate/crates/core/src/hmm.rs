//! Regime-switching nonlinear autoregression.
//!
//! A homogeneous Markov chain `X_t` over `N` states selects, at each step,
//! which perceptron predicts the next value:
//!
//! ```text
//! Y_{t+1} = F_{X_{t+1}}(Y_t, …, Y_{t−p+1}) + σ_{X_{t+1}} ε_{t+1},   ε ~ N(0, 1) iid
//! ```
//!
//! The first `p` values of a series are conditioning context ("warm start")
//! and are not modeled. Emissions condition on the observed past.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{embed_autoregressive, refine_weighted, train_mlp_weighted, MlpParams, TrainConfig, TrainingPair, Transfer};
use crate::rng::{derive_seed, seeded};

/// Lower bound applied to fitted noise scales.
pub const SIGMA_FLOOR: f64 = 1e-6;
const STOCHASTIC_TOL: f64 = 1e-12;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HmmMlpParams {
    order: usize,
    transition: Vec<Vec<f64>>,
    initial: Vec<f64>,
    regressors: Vec<MlpParams>,
    noise_scales: Vec<f64>,
}

impl HmmMlpParams {
    /// Validates and assembles a model. Noise scales must be finite and
    /// nonnegative; a zero scale is accepted for noise-free simulation but
    /// makes likelihood evaluation fail.
    pub fn new(transition: Vec<Vec<f64>>, initial: Vec<f64>, regressors: Vec<MlpParams>, noise_scales: Vec<f64>) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::invalid("at least one hidden state is required"));
        }
        if transition.len() != n || regressors.len() != n || noise_scales.len() != n {
            return Err(Error::invalid(format!(
                "state blocks disagree: initial {n}, transition {}, regressors {}, noise scales {}",
                transition.len(),
                regressors.len(),
                noise_scales.len()
            )));
        }
        check_distribution(&initial, "initial distribution")?;
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            check_distribution(row, &format!("transition row {i}"))?;
        }
        let order = regressors[0].input_dim();
        if let Some(r) = regressors.iter().find(|r| r.input_dim() != order) {
            return Err(Error::DimensionMismatch {
                expected: order,
                got: r.input_dim(),
            });
        }
        if let Some(s) = noise_scales.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("noise scales must be finite and nonnegative, got {s}")));
        }
        Ok(HmmMlpParams {
            order,
            transition,
            initial,
            regressors,
            noise_scales,
        })
    }

    pub fn state_count(&self) -> usize {
        self.initial.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn regressors(&self) -> &[MlpParams] {
        &self.regressors
    }

    pub fn noise_scales(&self) -> &[f64] {
        &self.noise_scales
    }

    /// Reorders states so that new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.state_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the states"));
        }
        Ok(HmmMlpParams {
            order: self.order,
            transition: perm.iter().map(|&a| perm.iter().map(|&b| self.transition[a][b]).collect()).collect(),
            initial: perm.iter().map(|&a| self.initial[a]).collect(),
            regressors: perm.iter().map(|&a| self.regressors[a].clone()).collect(),
            noise_scales: perm.iter().map(|&a| self.noise_scales[a]).collect(),
        })
    }

    fn check_context(&self, warm_start: &[f64]) -> Result<()> {
        if warm_start.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                got: warm_start.len(),
            });
        }
        Ok(())
    }

    /// Per-time, per-state emission log densities for `series` following
    /// `warm_start` (both oldest first).
    fn emission_logs(&self, series: &[f64], warm_start: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_context(warm_start)?;
        if series.is_empty() {
            return Err(Error::invalid("empty series"));
        }
        let mut full = warm_start.to_vec();
        full.extend_from_slice(series);
        let pairs = embed_autoregressive(&full, self.order)?;
        pairs
            .iter()
            .enumerate()
            .map(|(t, pair)| {
                (0..self.state_count())
                    .map(|s| {
                        let sigma = self.noise_scales[s];
                        let v = gaussian_log_density(pair.target, self.regressors[s].eval(&pair.input), sigma);
                        if v.is_nan() || v == f64::INFINITY || sigma <= 0.0 {
                            Err(Error::Numeric {
                                index: t,
                                message: format!("emission density of state {s} is not finite (sigma = {sigma})"),
                            })
                        } else {
                            Ok(v)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid(format!("{what} has a negative or NaN entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::invalid(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

#[inline]
fn gaussian_log_density(y: f64, mean: f64, sigma: f64) -> f64 {
    let z = (y - mean) / sigma;
    -LN_SQRT_2PI - sigma.ln() - 0.5 * z * z
}

fn sample_index(probs: &[f64], rng: &mut crate::rng::Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative total; take the last state with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub series: Vec<f64>,
    pub path: Vec<usize>,
}

/// Draws `len` observations and their hidden states after `warm_start`
/// (oldest first, length `p`).
pub fn simulate(params: &HmmMlpParams, len: usize, warm_start: &[f64], seed: u64) -> Result<Simulation> {
    params.check_context(warm_start)?;
    if len == 0 {
        return Err(Error::invalid("simulation length must be at least 1"));
    }
    let p = params.order;
    let mut rng = seeded(seed);
    let mut history = warm_start.to_vec();
    let mut path: Vec<usize> = Vec::with_capacity(len);
    let mut context = vec![0.0; p];
    for t in 0..len {
        let state = match path.last() {
            None => sample_index(&params.initial, &mut rng),
            Some(&prev) => sample_index(&params.transition[prev], &mut rng),
        };
        for (lag, c) in context.iter_mut().enumerate() {
            *c = history[history.len() - 1 - lag];
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        let y = params.regressors[state].eval(&context) + params.noise_scales[state] * eps;
        if !y.is_finite() {
            return Err(Error::Numeric {
                index: t,
                message: "simulated value is not finite".into(),
            });
        }
        history.push(y);
        path.push(state);
    }
    Ok(Simulation {
        series: history.split_off(p),
        path,
    })
}

/// Scaled forward pass. Returns the log-likelihood and the normalized
/// filtered distributions together with the per-step log normalizers.
struct Forward {
    log_likelihood: f64,
    alpha: Vec<Vec<f64>>,
    scale: Vec<f64>,
    /// Per-step maximal emission log density subtracted before exponentiating.
    shift: Vec<f64>,
}

fn forward_pass(params: &HmmMlpParams, logs: &[Vec<f64>]) -> Result<Forward> {
    let n = params.state_count();
    let mut alpha = Vec::with_capacity(logs.len());
    let mut scale = Vec::with_capacity(logs.len());
    let mut shift = Vec::with_capacity(logs.len());
    let mut log_likelihood = 0.0;
    let mut prev: Vec<f64> = Vec::new();
    for (t, le) in logs.iter().enumerate() {
        let m = le.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut a: Vec<f64> = (0..n)
            .map(|j| {
                let prior = if t == 0 {
                    params.initial[j]
                } else {
                    (0..n).map(|i| prev[i] * params.transition[i][j]).sum()
                };
                prior * (le[j] - m).exp()
            })
            .collect();
        let c: f64 = a.iter().sum();
        if !(c > 0.0) || !c.is_finite() || !m.is_finite() {
            return Err(Error::Numeric {
                index: t,
                message: "forward normalizer vanished".into(),
            });
        }
        a.iter_mut().for_each(|v| *v /= c);
        log_likelihood += m + c.ln();
        alpha.push(a.clone());
        scale.push(c);
        shift.push(m);
        prev = a;
    }
    Ok(Forward {
        log_likelihood,
        alpha,
        scale,
        shift,
    })
}

/// `log p(series | warm_start)` by the scaled forward recursion.
pub fn forward_log_likelihood(params: &HmmMlpParams, series: &[f64], warm_start: &[f64]) -> Result<f64> {
    let logs = params.emission_logs(series, warm_start)?;
    Ok(forward_pass(params, &logs)?.log_likelihood)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub path: Vec<usize>,
    /// Joint log probability of the path and the series.
    pub log_probability: f64,
}

/// Most probable hidden path; ties go to the lower state index.
pub fn viterbi_decode(params: &HmmMlpParams, series: &[f64], warm_start: &[f64]) -> Result<Decoded> {
    let logs = params.emission_logs(series, warm_start)?;
    let n = params.state_count();
    let log_a: Vec<Vec<f64>> = params.transition.iter().map(|r| r.iter().map(|v| v.ln()).collect()).collect();
    let mut delta: Vec<f64> = (0..n).map(|j| params.initial[j].ln() + logs[0][j]).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(logs.len());
    for le in logs.iter().skip(1) {
        let mut next = vec![f64::NEG_INFINITY; n];
        let mut arg = vec![0usize; n];
        for j in 0..n {
            for i in 0..n {
                let v = delta[i] + log_a[i][j];
                if v > next[j] {
                    next[j] = v;
                    arg[j] = i;
                }
            }
            next[j] += le[j];
        }
        back.push(arg);
        delta = next;
    }
    let mut last = 0;
    for j in 1..n {
        if delta[j] > delta[last] {
            last = j;
        }
    }
    let log_probability = delta[last];
    if !log_probability.is_finite() {
        return Err(Error::Numeric {
            index: logs.len() - 1,
            message: "no path has positive probability".into(),
        });
    }
    let mut path = vec![last; logs.len()];
    for t in (0..back.len()).rev() {
        path[t] = back[t][path[t + 1]];
    }
    Ok(Decoded { path, log_probability })
}

/// Smoothed posteriors from the forward–backward recursion.
struct Posteriors {
    log_likelihood: f64,
    /// `gamma[t][i] = P(X_t = i | Y)`
    gamma: Vec<Vec<f64>>,
    /// `Σ_t P(X_t = i, X_{t+1} = j | Y)`
    transitions: Vec<Vec<f64>>,
}

fn posteriors(params: &HmmMlpParams, logs: &[Vec<f64>]) -> Result<Posteriors> {
    let n = params.state_count();
    let fwd = forward_pass(params, logs)?;
    let len = logs.len();
    let emis: Vec<Vec<f64>> = logs
        .iter()
        .zip(&fwd.shift)
        .map(|(le, m)| le.iter().map(|v| (v - m).exp()).collect())
        .collect();
    let mut beta = vec![vec![1.0; n]; len];
    for t in (0..len - 1).rev() {
        for i in 0..n {
            beta[t][i] = (0..n).map(|j| params.transition[i][j] * emis[t + 1][j] * beta[t + 1][j]).sum::<f64>() / fwd.scale[t + 1];
        }
    }
    let gamma: Vec<Vec<f64>> = (0..len)
        .map(|t| {
            let g: Vec<f64> = (0..n).map(|i| fwd.alpha[t][i] * beta[t][i]).collect();
            let s: f64 = g.iter().sum();
            g.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let mut transitions = vec![vec![0.0; n]; n];
    for t in 0..len - 1 {
        for i in 0..n {
            for j in 0..n {
                transitions[i][j] += fwd.alpha[t][i] * params.transition[i][j] * emis[t + 1][j] * beta[t + 1][j] / fwd.scale[t + 1];
            }
        }
    }
    Ok(Posteriors {
        log_likelihood: fwd.log_likelihood,
        gamma,
        transitions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GemConfig {
    /// Hidden units of every state's perceptron.
    pub hidden: usize,
    pub iterations: usize,
    /// Descent iterations of the per-state refit in each M-step.
    pub refit_iters: usize,
    /// Restarts of the initial weighted fits.
    pub init_restarts: usize,
    pub transfer: Transfer,
}

impl Default for GemConfig {
    fn default() -> Self {
        GemConfig {
            hidden: 2,
            iterations: 50,
            refit_iters: 20,
            init_restarts: 3,
            transfer: Transfer::Tanh,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GemFit {
    pub params: HmmMlpParams,
    /// Log-likelihood at the initial model and after each iteration.
    pub log_likelihood: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Generalized EM: exact forward–backward E-step; closed-form `(A, π)`,
/// one bounded weighted refit per state perceptron and closed-form noise
/// scales in the M-step. The first `order` values are conditioning context.
pub fn gem_fit(series: &[f64], states: usize, order: usize, config: &GemConfig, seed: u64) -> Result<GemFit> {
    if states == 0 || order == 0 {
        return Err(Error::invalid("state count and order must be at least 1"));
    }
    if series.len() <= order + 1 {
        return Err(Error::invalid(format!(
            "series of length {} is too short for order {order}",
            series.len()
        )));
    }
    let pairs = embed_autoregressive(series, order)?;
    let warm = &series[..order];
    let observed = &series[order..];
    let len = pairs.len();
    let mut warnings = Vec::new();

    let mut weights = vec![vec![0.0; len]; states];
    for (t, s) in target_clusters(&pairs, states).into_iter().enumerate() {
        weights[s][t] = 1.0;
    }
    let init_cfg = TrainConfig {
        restarts: config.init_restarts.max(1),
        max_iters: 200,
        transfer: config.transfer,
        ..Default::default()
    };
    let mut regressors = Vec::with_capacity(states);
    let mut noise_scales = Vec::with_capacity(states);
    for (s, w) in weights.iter().enumerate() {
        let fit = train_mlp_weighted(&pairs, w, config.hidden, &init_cfg, derive_seed(seed, s as u64))?;
        regressors.push(fit.params);
        noise_scales.push(fit.loss.sqrt().max(SIGMA_FLOOR));
    }
    let stay = if states == 1 { 1.0 } else { 0.9 };
    let transition: Vec<Vec<f64>> = (0..states)
        .map(|i| (0..states).map(|j| if i == j { stay } else { (1.0 - stay) / (states - 1) as f64 }).collect())
        .collect();
    let initial = vec![1.0 / states as f64; states];
    let mut params = HmmMlpParams::new(transition, initial, regressors, noise_scales)?;

    let mut trace = Vec::with_capacity(config.iterations + 1);
    for _ in 0..config.iterations {
        let logs = params.emission_logs(observed, warm)?;
        let post = posteriors(&params, &logs)?;
        trace.push(post.log_likelihood);
        m_step(&mut params, &pairs, &post, config, &mut warnings)?;
    }
    trace.push(forward_log_likelihood(&params, observed, warm)?);

    Ok(GemFit {
        params,
        log_likelihood: trace,
        warnings,
    })
}

/// Initial hard responsibilities: one-dimensional k-means on the targets,
/// started from evenly spaced quantiles. Clusters are numbered by
/// increasing center.
fn target_clusters(pairs: &[TrainingPair], states: usize) -> Vec<usize> {
    let mut sorted: Vec<f64> = pairs.iter().map(|p| p.target).collect();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len();
    let mut centers: Vec<f64> = (0..states).map(|s| sorted[((2 * s + 1) * len) / (2 * states)]).collect();
    let nearest = |y: f64, centers: &[f64]| {
        let mut best = 0;
        for c in 1..centers.len() {
            if (y - centers[c]).abs() < (y - centers[best]).abs() {
                best = c;
            }
        }
        best
    };
    for _ in 0..100 {
        let mut sum = vec![0.0; states];
        let mut count = vec![0usize; states];
        for &y in &sorted {
            let c = nearest(y, &centers);
            sum[c] += y;
            count[c] += 1;
        }
        let next: Vec<f64> = (0..states).map(|c| if count[c] > 0 { sum[c] / count[c] as f64 } else { centers[c] }).collect();
        if next == centers {
            break;
        }
        centers = next;
    }
    pairs.iter().map(|p| nearest(p.target, &centers)).collect()
}

fn m_step(params: &mut HmmMlpParams, pairs: &[TrainingPair], post: &Posteriors, config: &GemConfig, warnings: &mut Vec<String>) -> Result<()> {
    let n = params.state_count();
    params.initial = post.gamma[0].clone();
    let norm: f64 = params.initial.iter().sum();
    params.initial.iter_mut().for_each(|v| *v /= norm);
    for i in 0..n {
        let out: f64 = post.transitions[i].iter().sum();
        if out > 0.0 {
            params.transition[i] = post.transitions[i].iter().map(|v| v / out).collect();
        }
    }
    for s in 0..n {
        let w: Vec<f64> = post.gamma.iter().map(|g| g[s]).collect();
        let mass: f64 = w.iter().sum();
        if !(mass > 1e-10) {
            warnings.push(format!("state {s} collapsed: posterior weight {mass:e}; parameters kept"));
            log::warn!("{}", warnings.last().unwrap());
            continue;
        }
        let fit = refine_weighted(&params.regressors[s], pairs, &w, config.refit_iters)?;
        params.regressors[s] = fit.params;
        params.noise_scales[s] = fit.loss.sqrt().max(SIGMA_FLOOR);
    }
    Ok(())
}
