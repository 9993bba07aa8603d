//! Hidden-unit selection by a penalized mean squared error.
//!
//! The score of a candidate size is `T_n(k) = E_n(k) + a_n(k)` where `E_n(k)`
//! is the training error of the best `k`-unit fit. Selection starts at one
//! unit and keeps adding units while the score does not increase; the first
//! strict increase stops it. Weight pruning after selection is not performed.

use std::fmt;
use std::io::Write;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mlp::{train_mlp, MlpParams, TrainConfig, TrainingPair};
use crate::rng::derive_seed;

/// User-supplied penalty: `(k, m, E_n, n) -> a_n` where `m` is the
/// parameter count of the `k`-unit model.
pub type CustomPenalty = fn(usize, usize, f64, usize) -> f64;

/// `E_n · m · ln(n) / n`: the log penalty scaled by the parameter count `m`.
pub fn per_parameter_log(_k: usize, m: usize, e_n: f64, n: usize) -> f64 {
    let nf = n as f64;
    e_n * m as f64 * nf.ln() / nf
}

#[derive(Clone, Copy)]
pub enum PenaltyKind {
    /// `E_n · ln(n) / n`
    LogOverN,
    /// `E_n · √n / n`
    SqrtOverN,
    /// Named user penalty.
    Custom(&'static str, CustomPenalty),
}

impl fmt::Debug for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kinds are equal when their names are.
impl PartialEq for PenaltyKind {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl PenaltyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::LogOverN => "logOverN",
            PenaltyKind::SqrtOverN => "sqrtOverN",
            PenaltyKind::Custom(name, _) => name,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PenaltySpec {
    kind: PenaltyKind,
    multiplier: f64,
}

impl Serialize for PenaltySpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PenaltySpec", 2)?;
        st.serialize_field("kind", self.kind.name())?;
        st.serialize_field("multiplier", &self.multiplier)?;
        st.end()
    }
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec {
            kind: PenaltyKind::LogOverN,
            multiplier: 1.0,
        }
    }
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, multiplier: f64) -> Result<Self> {
        if !(multiplier > 0.0) || !multiplier.is_finite() {
            return Err(Error::invalid(format!("penalty multiplier must be positive, got {multiplier}")));
        }
        Ok(PenaltySpec { kind, multiplier })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    /// Penalty for a `k`-unit model with `m` parameters and training error
    /// `e_n` on `n` samples.
    pub fn value(&self, k: usize, m: usize, e_n: f64, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::invalid(format!("penalty needs at least 2 samples, got {n}")));
        }
        if !(e_n >= 0.0) {
            return Err(Error::invalid(format!("training error must be nonnegative, got {e_n}")));
        }
        let nf = n as f64;
        let base = match self.kind {
            PenaltyKind::LogOverN => e_n * nf.ln() / nf,
            PenaltyKind::SqrtOverN => e_n * nf.sqrt() / nf,
            PenaltyKind::Custom(_, f) => f(k, m, e_n, n),
        };
        Ok(self.multiplier * base)
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logOverN" => Ok(PenaltyKind::LogOverN),
            "sqrtOverN" => Ok(PenaltyKind::SqrtOverN),
            "perParameterLog" => Ok(PenaltyKind::Custom("perParameterLog", per_parameter_log)),
            other => Err(Error::invalid(format!(
                "unknown penalty `{other}` (expected logOverN, sqrtOverN or perParameterLog)"
            ))),
        }
    }
}

/// Gaussian-likelihood information criterion `n ln(E_n) + m ln(n)`.
pub fn bic_score(e_n: f64, param_count: usize, n: usize) -> Result<f64> {
    if !(e_n > 0.0) {
        return Err(Error::invalid("BIC is undefined for a zero (or negative) training error"));
    }
    if param_count == 0 || n < 2 {
        return Err(Error::invalid("BIC needs m >= 1 and n >= 2"));
    }
    let nf = n as f64;
    Ok(nf * e_n.ln() + param_count as f64 * nf.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionRow {
    pub k: usize,
    pub training_error: f64,
    pub penalty: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionTrace {
    pub rows: Vec<SelectionRow>,
    pub chosen_k: usize,
    pub sample_count: usize,
    pub penalty: PenaltySpec,
    /// Post-selection weight pruning applied to the chosen model.
    pub pruning: &'static str,
}

impl SelectionTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "E_n", "penalty", "T_n"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.training_error.to_string(),
                r.penalty.to_string(),
                r.score.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<selection trace>".into(),
            source: e,
        })?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub trace: SelectionTrace,
    pub model: MlpParams,
}

/// Runs the incremental rule with an arbitrary per-`k` fitter returning the
/// fitted model and its training error.
pub fn select_with<F>(mut fit: F, sample_count: usize, max_k: usize, penalty: PenaltySpec) -> Result<Selection>
where
    F: FnMut(usize) -> Result<(MlpParams, f64)>,
{
    if max_k == 0 {
        return Err(Error::invalid("maxK must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut best: Option<(MlpParams, f64)> = None;
    let mut chosen_k = 1;
    for k in 1..=max_k {
        let (model, e_n) = fit(k).map_err(|e| match e {
            Error::Diverged { .. } => Error::Numeric {
                index: k,
                message: format!("every restart diverged for k = {k}"),
            },
            other => other,
        })?;
        let pen = penalty.value(k, model.param_count(), e_n, sample_count)?;
        let score = e_n + pen;
        rows.push(SelectionRow {
            k,
            training_error: e_n,
            penalty: pen,
            score,
        });
        match &best {
            Some((_, prev)) if score > *prev => break,
            _ => {
                chosen_k = k;
                best = Some((model, score));
            }
        }
    }
    let (model, _) = best.expect("k = 1 always evaluated");
    Ok(Selection {
        trace: SelectionTrace {
            rows,
            chosen_k,
            sample_count,
            penalty,
            pruning: "none",
        },
        model,
    })
}

/// Selects the hidden-unit count for `pairs`; candidate `k` is trained with
/// restarts seeded from `(seed, k)`.
pub fn select_hidden_units(
    pairs: &[TrainingPair],
    max_k: usize,
    penalty: PenaltySpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<Selection> {
    if pairs.is_empty() {
        return Err(Error::invalid("no training pairs"));
    }
    select_with(
        |k| {
            let fit = train_mlp(pairs, k, config, derive_seed(seed, k as u64))?;
            Ok((fit.params, fit.loss))
        },
        pairs.len(),
        max_k,
        penalty,
    )
}
