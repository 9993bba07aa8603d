//! Two-scale series forecasting.
//!
//! A series `c_{j,h}` has a slow index `j` (days, say) carrying a metadata
//! label and a fast index `h` within each block. Each block is split into
//! level, scale and shape:
//!
//! ```text
//! μ_j = mean_h c_{j,h},  σ_j² = mean_h (c_{j,h} − μ_j)²,  q_j = (c_j − μ_j) / σ_j
//! ```
//!
//! Shapes are clustered with a SOM whose neurons remember the labels of their
//! blocks. The next block is predicted as `μ̂·1 + σ̂·q̂`, with `μ̂, σ̂` from a
//! scalar forecaster and `q̂` the label-weighted mean of matching prototypes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::som::{batch_som_train, MapLattice, NeighborhoodSchedule, VectorMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoScaleSeries {
    values: Vec<Vec<f64>>,
    metadata: Vec<String>,
}

impl TwoScaleSeries {
    pub fn new(values: Vec<Vec<f64>>, metadata: Vec<String>) -> Result<Self> {
        let h = values.first().map(Vec::len).ok_or_else(|| Error::invalid("series has no blocks"))?;
        if metadata.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: metadata.len(),
            });
        }
        for (j, row) in values.iter().enumerate() {
            if row.len() != h {
                return Err(Error::invalid(format!("block {j} has length {}, expected {h}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("block {j} has a non-finite value")));
            }
        }
        Ok(TwoScaleSeries { values, metadata })
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn metadata(&self) -> &[String] {
        &self.metadata
    }

    pub fn blocks(&self) -> usize {
        self.values.len()
    }

    pub fn block_length(&self) -> usize {
        self.values[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileDecomposition {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
    /// Constant blocks: scale 0 and a zero profile.
    pub degenerate: Vec<bool>,
}

pub fn decompose_profiles(series: &TwoScaleSeries) -> Result<ProfileDecomposition> {
    let h = series.block_length();
    if h < 2 {
        return Err(Error::invalid(format!("blocks need at least 2 values, got {h}")));
    }
    let mut out = ProfileDecomposition {
        means: Vec::with_capacity(series.blocks()),
        scales: Vec::with_capacity(series.blocks()),
        profiles: Vec::with_capacity(series.blocks()),
        degenerate: Vec::with_capacity(series.blocks()),
    };
    for row in series.values() {
        let mu = row.iter().sum::<f64>() / h as f64;
        let constant = row.iter().all(|&v| v == row[0]);
        let sigma = if constant {
            0.0
        } else {
            (row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / h as f64).sqrt()
        };
        out.means.push(if constant { row[0] } else { mu });
        out.scales.push(sigma);
        out.degenerate.push(constant);
        out.profiles.push(if constant {
            vec![0.0; h]
        } else {
            row.iter().map(|v| (v - mu) / sigma).collect()
        });
    }
    Ok(out)
}

/// Labels of the blocks assigned to each neuron, with multiplicities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetadataMap {
    pub neurons: Vec<BTreeMap<String, usize>>,
}

impl MetadataMap {
    pub fn total(&self) -> usize {
        self.neurons.iter().flat_map(BTreeMap::values).sum()
    }

    pub fn count(&self, neuron: usize, label: &str) -> usize {
        self.neurons[neuron].get(label).copied().unwrap_or(0)
    }

    /// Number of blocks on each neuron.
    pub fn neuron_totals(&self) -> Vec<usize> {
        self.neurons.iter().map(|m| m.values().sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileMap {
    pub map: VectorMap,
    pub metadata_map: MetadataMap,
    /// Block index of each mapped profile (degenerate blocks are skipped).
    pub blocks: Vec<usize>,
}

pub fn train_profile_som(
    decomposition: &ProfileDecomposition,
    metadata: &[String],
    lattice: &MapLattice,
    schedule: &NeighborhoodSchedule,
    seed: u64,
) -> Result<ProfileMap> {
    if metadata.len() != decomposition.profiles.len() {
        return Err(Error::DimensionMismatch {
            expected: decomposition.profiles.len(),
            got: metadata.len(),
        });
    }
    let blocks: Vec<usize> = (0..decomposition.profiles.len()).filter(|&j| !decomposition.degenerate[j]).collect();
    if blocks.is_empty() {
        return Err(Error::invalid("every block is constant; no profile to map"));
    }
    let data: Vec<Vec<f64>> = blocks.iter().map(|&j| decomposition.profiles[j].clone()).collect();
    let map = batch_som_train(&data, lattice, schedule, seed)?;
    let mut neurons = vec![BTreeMap::new(); lattice.neuron_count()];
    for (&j, &a) in blocks.iter().zip(&map.assignments) {
        *neurons[a].entry(metadata[j].clone()).or_insert(0) += 1;
    }
    Ok(ProfileMap {
        map,
        metadata_map: MetadataMap { neurons },
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ForecastMethod {
    SeasonalNaive { period: usize },
    Ar { order: usize },
}

impl Default for ForecastMethod {
    fn default() -> Self {
        ForecastMethod::SeasonalNaive { period: 1 }
    }
}

impl FromStr for ForecastMethod {
    type Err = Error;

    /// `seasonalNaive:P` or `ar:P`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse method `{s}` (expected seasonalNaive:P or ar:P)"));
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind {
            "seasonalNaive" => Ok(ForecastMethod::SeasonalNaive { period: n }),
            "ar" => Ok(ForecastMethod::Ar { order: n }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ForecastMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForecastMethod::SeasonalNaive { period } => write!(f, "seasonalNaive:{period}"),
            ForecastMethod::Ar { order } => write!(f, "ar:{order}"),
        }
    }
}

/// One-step-ahead forecast of a scalar history.
pub fn forecast_scalar(history: &[f64], method: ForecastMethod) -> Result<f64> {
    let t = history.len();
    match method {
        ForecastMethod::SeasonalNaive { period } => {
            if period == 0 || t < period {
                return Err(Error::invalid(format!("seasonal naive with period {period} needs {period} values, got {t}")));
            }
            Ok(history[t - period])
        }
        ForecastMethod::Ar { order: p } => {
            if p == 0 || t < 2 * p + 1 {
                return Err(Error::invalid(format!("ar({p}) needs at least {} values, got {t}", 2 * p + 1)));
            }
            // y_t = c + Σ_k φ_k y_{t−k}, least squares
            let rows = t - p;
            let x = DMatrix::from_fn(rows, p + 1, |r, k| if k == 0 { 1.0 } else { history[p + r - k] });
            let y = DVector::from_fn(rows, |r, _| history[p + r]);
            let coef = x
                .svd(true, true)
                .solve(&y, 1e-12)
                .map_err(|e| Error::Numeric {
                    index: 0,
                    message: format!("ar least squares failed: {e}"),
                })?;
            let next = coef[0] + (1..=p).map(|k| coef[k] * history[t - k]).sum::<f64>();
            if !next.is_finite() {
                return Err(Error::Numeric {
                    index: t,
                    message: "ar forecast is not finite".into(),
                });
            }
            Ok(next)
        }
    }
}

/// Next level and scale; the scale is floored at 0.
pub fn forecast_mean_var(means: &[f64], scales: &[f64], method: ForecastMethod) -> Result<(f64, f64)> {
    Ok((forecast_scalar(means, method)?, forecast_scalar(scales, method)?.max(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfilePrediction {
    pub profile: Vec<f64>,
    /// True when no neuron carries the label and all prototypes were
    /// averaged by assignment count instead.
    pub fallback: bool,
}

/// Mean of the prototypes of neurons carrying `label`, weighted by how often
/// they carry it.
pub fn predict_profile(label: &str, prototypes: &[Vec<f64>], metadata_map: &MetadataMap) -> Result<ProfilePrediction> {
    if prototypes.is_empty() || metadata_map.total() == 0 {
        return Err(Error::invalid("profile map is empty"));
    }
    if prototypes.len() != metadata_map.neurons.len() {
        return Err(Error::DimensionMismatch {
            expected: metadata_map.neurons.len(),
            got: prototypes.len(),
        });
    }
    let matching: Vec<usize> = (0..prototypes.len()).map(|c| metadata_map.count(c, label)).collect();
    let fallback = matching.iter().all(|&w| w == 0);
    let weights = if fallback { metadata_map.neuron_totals() } else { matching };
    let total: usize = weights.iter().sum();
    let h = prototypes[0].len();
    let mut profile = vec![0.0; h];
    for (p, &w) in prototypes.iter().zip(&weights) {
        if w > 0 {
            for (acc, v) in profile.iter_mut().zip(p) {
                *acc += w as f64 * v;
            }
        }
    }
    profile.iter_mut().for_each(|v| *v /= total as f64);
    Ok(ProfilePrediction { profile, fallback })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VectorForecast {
    pub values: Vec<f64>,
    pub mean: f64,
    pub scale: f64,
    pub label: String,
    pub profile: Vec<f64>,
    pub fallback: bool,
}

/// Forecasts the next block of `series` given its label.
pub fn forecast_next_vector(
    series: &TwoScaleSeries,
    next_label: &str,
    lattice: &MapLattice,
    schedule: &NeighborhoodSchedule,
    method: ForecastMethod,
    seed: u64,
) -> Result<(VectorForecast, ProfileMap)> {
    let dec = decompose_profiles(series)?;
    let (mean, scale) = forecast_mean_var(&dec.means, &dec.scales, method)?;
    let pm = train_profile_som(&dec, series.metadata(), lattice, schedule, seed)?;
    let pred = predict_profile(next_label, &pm.map.prototypes, &pm.metadata_map)?;
    let values = pred.profile.iter().map(|q| mean + scale * q).collect();
    Ok((
        VectorForecast {
            values,
            mean,
            scale,
            label: next_label.to_string(),
            profile: pred.profile,
            fallback: pred.fallback,
        },
        pm,
    ))
}
