//! Batch self-organizing map on vector data.
//!
//! Neurons sit on a prior lattice (a 2-D grid or a 1-D string). Every sweep
//! assigns each observation to the neuron with the closest prototype, then
//! moves each prototype to the neighborhood-weighted mean
//!
//! ```text
//! p_c ← Σ_i Γ(N(x_i), c) x_i / Σ_i Γ(N(x_i), c)
//! ```
//!
//! where Γ shrinks with lattice distance and with the sweep index.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum LatticeShape {
    Grid { rows: usize, cols: usize },
    String { length: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LatticeMetric {
    #[default]
    Euclidean,
    Manhattan,
}

impl FromStr for LatticeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(LatticeMetric::Euclidean),
            "manhattan" => Ok(LatticeMetric::Manhattan),
            other => Err(Error::invalid(format!("unknown lattice metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MapLattice {
    shape: LatticeShape,
    metric: LatticeMetric,
    #[serde(skip)]
    coords: Vec<(i64, i64)>,
}

impl MapLattice {
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        Ok(Self::build(LatticeShape::Grid { rows, cols }, LatticeMetric::Euclidean))
    }

    pub fn string(length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::invalid("string length must be positive"));
        }
        Ok(Self::build(LatticeShape::String { length }, LatticeMetric::Euclidean))
    }

    pub fn with_metric(self, metric: LatticeMetric) -> Self {
        Self::build(self.shape, metric)
    }

    fn build(shape: LatticeShape, metric: LatticeMetric) -> Self {
        let coords = match shape {
            LatticeShape::Grid { rows, cols } => (0..rows).flat_map(|r| (0..cols).map(move |c| (r as i64, c as i64))).collect(),
            LatticeShape::String { length } => (0..length).map(|i| (0, i as i64)).collect(),
        };
        MapLattice { shape, metric, coords }
    }

    /// Restores the coordinate table after deserialization.
    pub fn rebuilt(self) -> Self {
        Self::build(self.shape, self.metric)
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn metric(&self) -> LatticeMetric {
        self.metric
    }

    pub fn neuron_count(&self) -> usize {
        self.coords.len()
    }

    /// `(row, column)` of neuron `c`; strings use row 0.
    pub fn coords(&self, c: usize) -> (i64, i64) {
        self.coords[c]
    }

    fn check(&self, c: usize) -> Result<()> {
        if c >= self.neuron_count() {
            return Err(Error::invalid(format!("neuron index {c} out of range ({} neurons)", self.neuron_count())));
        }
        Ok(())
    }

    pub fn distance(&self, c: usize, d: usize) -> f64 {
        let (a, b) = (self.coords[c], self.coords[d]);
        let (dr, dc) = ((a.0 - b.0) as f64, (a.1 - b.1) as f64);
        match self.metric {
            LatticeMetric::Euclidean => (dr * dr + dc * dc).sqrt(),
            LatticeMetric::Manhattan => dr.abs() + dc.abs(),
        }
    }

    /// Neurons at lattice distance exactly 1.
    pub fn neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.neuron_count()).filter(move |&d| d != c && self.distance(c, d) == 1.0)
    }

    /// Largest distance between two neurons.
    pub fn diameter(&self) -> f64 {
        let last = self.neuron_count() - 1;
        self.distance(0, last)
    }
}

impl FromStr for MapLattice {
    type Err = Error;

    /// `grid:RxC` or `string:L`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse lattice `{s}` (expected grid:RxC or string:L)"));
        let (kind, dims) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "grid" => {
                let (r, c) = dims.split_once('x').ok_or_else(bad)?;
                MapLattice::grid(r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?)
            }
            "string" => MapLattice::string(dims.trim().parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for MapLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            LatticeShape::Grid { rows, cols } => write!(f, "grid:{rows}x{cols}"),
            LatticeShape::String { length } => write!(f, "string:{length}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NeighborhoodKind {
    Gaussian,
    Window,
}

impl FromStr for NeighborhoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NeighborhoodKind::Gaussian),
            "window" => Ok(NeighborhoodKind::Window),
            other => Err(Error::invalid(format!("unknown neighborhood `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NeighborhoodSchedule {
    kind: NeighborhoodKind,
    initial_radius: f64,
    final_radius: f64,
    sweeps: usize,
}

impl NeighborhoodSchedule {
    pub fn new(kind: NeighborhoodKind, initial_radius: f64, final_radius: f64, sweeps: usize) -> Result<Self> {
        if !(final_radius > 0.0) || !(initial_radius >= final_radius) || !initial_radius.is_finite() {
            return Err(Error::invalid(format!(
                "radii must satisfy initial >= final > 0 (got {initial_radius}, {final_radius})"
            )));
        }
        if sweeps == 0 {
            return Err(Error::invalid("sweep count must be positive"));
        }
        Ok(NeighborhoodSchedule {
            kind,
            initial_radius,
            final_radius,
            sweeps,
        })
    }

    /// Gaussian, radius from half the lattice diameter (at least 1) down to
    /// 0.5, over 30 sweeps.
    pub fn default_for(lattice: &MapLattice) -> Self {
        let initial = (lattice.diameter() / 2.0).max(1.0);
        NeighborhoodSchedule {
            kind: NeighborhoodKind::Gaussian,
            initial_radius: initial,
            final_radius: 0.5,
            sweeps: 30,
        }
    }

    pub fn kind(&self) -> NeighborhoodKind {
        self.kind
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn initial_radius(&self) -> f64 {
        self.initial_radius
    }

    pub fn final_radius(&self) -> f64 {
        self.final_radius
    }

    /// Radius at `sweep`, linear from initial (first sweep) to final (last).
    pub fn radius(&self, sweep: usize) -> f64 {
        if self.sweeps == 1 {
            return self.final_radius;
        }
        let frac = sweep.min(self.sweeps - 1) as f64 / (self.sweeps - 1) as f64;
        self.initial_radius + (self.final_radius - self.initial_radius) * frac
    }

    pub fn weight_at(&self, lattice_distance: f64, radius: f64) -> f64 {
        match self.kind {
            NeighborhoodKind::Gaussian => (-lattice_distance * lattice_distance / (2.0 * radius * radius)).exp(),
            NeighborhoodKind::Window => {
                if lattice_distance <= radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `Γ(c, d)` for all neuron pairs at `sweep`.
    pub fn weights(&self, lattice: &MapLattice, sweep: usize) -> NeighborhoodWeights {
        let r = self.radius(sweep);
        let m = lattice.neuron_count();
        NeighborhoodWeights {
            m,
            w: (0..m)
                .flat_map(|c| (0..m).map(move |d| (c, d)))
                .map(|(c, d)| self.weight_at(lattice.distance(c, d), r))
                .collect(),
        }
    }
}

/// Dense `M × M` table of neighborhood weights.
#[derive(Debug, Clone)]
pub struct NeighborhoodWeights {
    m: usize,
    w: Vec<f64>,
}

impl NeighborhoodWeights {
    #[inline]
    pub fn get(&self, c: usize, d: usize) -> f64 {
        self.w[c * self.m + d]
    }

    /// Weight of each observation for neuron `c`: `Γ(N(x_i), c)`.
    pub fn column_for(&self, assignments: &[usize], c: usize) -> Vec<f64> {
        assignments.iter().map(|&a| self.get(a, c)).collect()
    }
}

pub fn neighborhood_weight(schedule: &NeighborhoodSchedule, lattice: &MapLattice, c: usize, d: usize, sweep: usize) -> Result<f64> {
    lattice.check(c)?;
    lattice.check(d)?;
    if sweep >= schedule.sweeps {
        return Err(Error::invalid(format!("sweep {sweep} outside schedule of {} sweeps", schedule.sweeps)));
    }
    Ok(schedule.weight_at(lattice.distance(c, d), schedule.radius(sweep)))
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest prototype; ties go to the lowest index.
pub fn assign(x: &[f64], prototypes: &[Vec<f64>]) -> Result<usize> {
    if prototypes.is_empty() {
        return Err(Error::invalid("no prototypes"));
    }
    if let Some(p) = prototypes.iter().find(|p| p.len() != x.len()) {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: x.len(),
        });
    }
    Ok(nearest(x, prototypes))
}

fn nearest(x: &[f64], prototypes: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(x, &prototypes[0]);
    for (c, p) in prototypes.iter().enumerate().skip(1) {
        let d = sq_dist(x, p);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

pub(crate) fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let first = data.first().ok_or_else(|| Error::invalid("no observations"))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::invalid("observations have zero dimension"));
    }
    for (i, row) in data.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::invalid(format!("observation {i} has dimension {}, expected {dim}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("observation {i} has a non-finite value")));
        }
    }
    Ok(dim)
}

/// Picks `m` initial prototype sources among `candidates` (indices of
/// distinct observations). With fewer candidates than neurons the shuffled
/// candidate list is reused cyclically.
pub(crate) fn initial_indices(candidates: &[usize], m: usize, rng: &mut Rng) -> Vec<usize> {
    if candidates.len() >= m {
        rand::seq::index::sample(rng, candidates.len(), m).into_iter().map(|i| candidates[i]).collect()
    } else {
        let mut pool = candidates.to_vec();
        pool.shuffle(rng);
        (0..m).map(|c| pool[c % pool.len()]).collect()
    }
}

/// Index of the first occurrence of every distinct row, in index order, so
/// repeating the dataset does not change the candidates.
pub(crate) fn first_occurrences<R: AsRef<[f64]>>(rows: &[R]) -> Vec<usize> {
    let cmp = |a: usize, b: usize| {
        rows[a]
            .as_ref()
            .iter()
            .zip(rows[b].as_ref())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| cmp(a, b).then(a.cmp(&b)));
    let mut firsts: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|&(k, &i)| k == 0 || cmp(order[k - 1], i).is_ne())
        .map(|(_, &i)| i)
        .collect();
    firsts.sort_unstable();
    firsts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VectorMap {
    pub prototypes: Vec<Vec<f64>>,
    /// Neuron of each observation for the final prototypes.
    pub assignments: Vec<usize>,
    /// `Σ_i Σ_c Γ(N(x_i), c) ‖x_i − p_c‖²` after each sweep's update.
    pub energy: Vec<f64>,
    /// Assignments used by each sweep's update.
    #[serde(skip)]
    pub history: Vec<Vec<usize>>,
}

/// Trains a batch SOM. Prototypes start at `M` distinct observations drawn
/// with `seed`; a neuron whose neighborhood weights all vanish keeps its
/// previous prototype.
pub fn batch_som_train(data: &[Vec<f64>], lattice: &MapLattice, schedule: &NeighborhoodSchedule, seed: u64) -> Result<VectorMap> {
    let dim = check_data(data)?;
    let m = lattice.neuron_count();
    let mut rng = seeded(seed);
    let init = initial_indices(&first_occurrences(data), m, &mut rng);
    let mut prototypes: Vec<Vec<f64>> = init.iter().map(|&i| data[i].clone()).collect();
    let mut energy = Vec::with_capacity(schedule.sweeps);
    let mut history = Vec::with_capacity(schedule.sweeps);

    for sweep in 0..schedule.sweeps {
        let assignments: Vec<usize> = data.par_iter().map(|x| nearest(x, &prototypes)).collect();
        let gamma = schedule.weights(lattice, sweep);

        // per-neuron sums of assigned observations, then mix across the lattice
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0.0; m];
        for (x, &a) in data.iter().zip(&assignments) {
            counts[a] += 1.0;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        prototypes = (0..m)
            .into_par_iter()
            .map(|c| {
                let mut num = vec![0.0; dim];
                let mut den = 0.0;
                for d in 0..m {
                    let g = gamma.get(d, c);
                    if g == 0.0 || counts[d] == 0.0 {
                        continue;
                    }
                    den += g * counts[d];
                    for (n, s) in num.iter_mut().zip(&sums[d]) {
                        *n += g * s;
                    }
                }
                if den > 0.0 {
                    num.iter_mut().for_each(|v| *v /= den);
                    num
                } else {
                    prototypes[c].clone()
                }
            })
            .collect();

        let e: f64 = data
            .par_iter()
            .zip(&assignments)
            .map(|(x, &a)| (0..m).map(|c| gamma.get(a, c) * sq_dist(x, &prototypes[c])).sum::<f64>())
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        energy.push(e);
        history.push(assignments);
    }

    let assignments = data.par_iter().map(|x| nearest(x, &prototypes)).collect();
    Ok(VectorMap {
        prototypes,
        assignments,
        energy,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MapQuality {
    pub quantization_error: f64,
    pub topographic_error: f64,
}

/// Mean distance to the best-matching prototype, and the fraction of
/// observations whose two best-matching neurons are not lattice neighbors.
pub fn map_quality(data: &[Vec<f64>], prototypes: &[Vec<f64>], lattice: &MapLattice) -> Result<MapQuality> {
    check_data(data)?;
    if prototypes.len() != lattice.neuron_count() {
        return Err(Error::DimensionMismatch {
            expected: lattice.neuron_count(),
            got: prototypes.len(),
        });
    }
    let mut qe = 0.0;
    let mut te = 0usize;
    for x in data {
        let best = assign(x, prototypes)?;
        qe += sq_dist(x, &prototypes[best]).sqrt();
        if prototypes.len() > 1 {
            let mut second = usize::MAX;
            let mut second_d = f64::INFINITY;
            for (c, p) in prototypes.iter().enumerate() {
                let d = sq_dist(x, p);
                if c != best && d < second_d {
                    second = c;
                    second_d = d;
                }
            }
            if lattice.distance(best, second) > 1.0 {
                te += 1;
            }
        }
    }
    let n = data.len() as f64;
    Ok(MapQuality {
        quantization_error: qe / n,
        topographic_error: te as f64 / n,
    })
}

/// Mean Euclidean distance from each prototype to its lattice neighbors'
/// prototypes (0 for a neuron without neighbors).
pub fn u_matrix(prototypes: &[Vec<f64>], lattice: &MapLattice) -> Vec<f64> {
    (0..lattice.neuron_count())
        .map(|c| {
            let (sum, count) = lattice
                .neighbors(c)
                .fold((0.0, 0usize), |(s, k), d| (s + sq_dist(&prototypes[c], &prototypes[d]).sqrt(), k + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect()
}

/// Derivative of a sampled function: central differences inside, one-sided
/// differences at both ends.
pub fn derivative_preprocess(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if samples.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: samples.len(),
        });
    }
    let h = grid.len();
    if h < 2 {
        return Err(Error::invalid("derivative needs at least two samples"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok((0..h)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(h - 1));
            (samples[hi] - samples[lo]) / (grid[hi] - grid[lo])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segmentation {
    /// Piecewise-constant approximation, same length as the input.
    pub values: Vec<f64>,
    /// Start index of every segment (first is always 0).
    pub breakpoints: Vec<usize>,
    pub squared_error: f64,
}

/// Squared error of approximating `xs` by its mean.
fn segment_cost(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum()
}

/// Optimal `segments`-piece constant approximation (least squares) by
/// dynamic programming over breakpoints. Ties keep the earliest breakpoint.
pub fn segment_project(samples: &[f64], segments: usize) -> Result<Segmentation> {
    let h = samples.len();
    if segments == 0 || segments > h {
        return Err(Error::invalid(format!("segment count {segments} must lie in 1..={h}")));
    }
    // cost[i][j]: segment samples[i..j]
    let cost: Vec<Vec<f64>> = (0..h)
        .map(|i| (0..=h).map(|j| if j > i { segment_cost(&samples[i..j]) } else { f64::INFINITY }).collect())
        .collect();
    // best[s][j]: error of covering samples[..j] with s + 1 segments
    let mut best = vec![vec![f64::INFINITY; h + 1]; segments];
    let mut from = vec![vec![0usize; h + 1]; segments];
    for j in 1..=h {
        best[0][j] = cost[0][j];
    }
    for s in 1..segments {
        for j in (s + 1)..=h {
            for i in s..j {
                let v = best[s - 1][i] + cost[i][j];
                if v < best[s][j] {
                    best[s][j] = v;
                    from[s][j] = i;
                }
            }
        }
    }
    let mut breakpoints = vec![0; segments];
    let mut end = h;
    for s in (1..segments).rev() {
        breakpoints[s] = from[s][end];
        end = breakpoints[s];
    }
    let mut values = vec![0.0; h];
    for (k, &start) in breakpoints.iter().enumerate() {
        let stop = breakpoints.get(k + 1).copied().unwrap_or(h);
        let mean = samples[start..stop].iter().sum::<f64>() / (stop - start) as f64;
        values[start..stop].iter_mut().for_each(|v| *v = mean);
    }
    Ok(Segmentation {
        values,
        breakpoints,
        squared_error: best[segments - 1][h],
    })
}
