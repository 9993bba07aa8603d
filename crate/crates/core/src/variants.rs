//! Maps for data known only through dissimilarities or kernels.
//!
//! The median SOM restricts prototypes to observations and picks, for each
//! neuron, the observation minimizing
//!
//! ```text
//! Σ_i Γ(N(x_i), c) · d(x_i, p)
//! ```
//!
//! The q-median variant holds `q` observations per neuron and measures
//! observation-to-neuron dissimilarity by the mean over them. The kernel SOM
//! keeps each prototype as a convex combination `Σ_i γ_{c,i} φ(x_i)` and
//! computes distances through the kernel only.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{DissimilarityMatrix, KernelMatrix};
use crate::rng::seeded;
use crate::som::{first_occurrences, initial_indices, MapLattice, NeighborhoodSchedule, NeighborhoodWeights};

/// `Σ_i Γ(N(x_i), c) · d(x_i, candidate)`.
pub fn local_distortion(candidate: usize, d: &DissimilarityMatrix, assignments: &[usize], gamma: &NeighborhoodWeights, c: usize) -> f64 {
    let row = d.row(candidate);
    assignments.iter().enumerate().map(|(i, &a)| gamma.get(a, c) * row[i]).sum()
}

/// Local distortion of every candidate for neuron `c`.
fn candidate_costs(d: &DissimilarityMatrix, assignments: &[usize], gamma: &NeighborhoodWeights, c: usize) -> Vec<f64> {
    let weights = gamma.column_for(assignments, c);
    (0..d.len())
        .into_par_iter()
        .map(|p| d.row(p).iter().zip(&weights).map(|(x, w)| w * x).sum())
        .collect()
}

/// Positions of the `q` smallest costs, ties to the lowest index.
fn smallest(costs: &[f64], q: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    order.truncate(q);
    order
}

fn mean_dissimilarity(d: &DissimilarityMatrix, i: usize, set: &[usize]) -> f64 {
    set.iter().map(|&p| d.get(i, p)).sum::<f64>() / set.len() as f64
}

fn nearest_set(d: &DissimilarityMatrix, i: usize, sets: &[Vec<usize>]) -> usize {
    let mut best = 0;
    let mut best_d = mean_dissimilarity(d, i, &sets[0]);
    for (c, s) in sets.iter().enumerate().skip(1) {
        let v = mean_dissimilarity(d, i, s);
        if v < best_d {
            best = c;
            best_d = v;
        }
    }
    best
}

/// One sweep of a median-type map: the assignments fed to the update and
/// the prototype sets it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianSweep {
    pub sweep: usize,
    pub assignments: Vec<usize>,
    pub prototypes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QMedianMapState {
    /// `q` distinct observation indices per neuron, in selection order.
    pub prototype_sets: Vec<Vec<usize>>,
    pub assignments: Vec<usize>,
    /// `Σ_i Σ_c Γ(N(x_i), c) · mean_{p ∈ P_c} d(x_i, p)` after each update.
    pub distortion: Vec<f64>,
    /// True when the run stopped at a fixed point before the sweep budget.
    pub converged: bool,
    #[serde(skip)]
    pub history: Vec<MedianSweep>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MedianMapState {
    pub prototype_index: Vec<usize>,
    pub assignments: Vec<usize>,
    pub distortion: Vec<f64>,
    pub converged: bool,
    #[serde(skip)]
    pub history: Vec<MedianSweep>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Median SOM: prototypes are observations. Stops at the sweep budget, or
/// earlier once an update changes nothing and the radius has reached its
/// final value.
pub fn median_som_train(d: &DissimilarityMatrix, lattice: &MapLattice, schedule: &NeighborhoodSchedule, seed: u64) -> Result<MedianMapState> {
    let q = q_median_som_train(d, lattice, schedule, 1, seed)?;
    Ok(MedianMapState {
        prototype_index: q.prototype_sets.iter().map(|s| s[0]).collect(),
        assignments: q.assignments,
        distortion: q.distortion,
        converged: q.converged,
        history: q.history,
        warnings: q.warnings,
    })
}

/// Median SOM with `q` prototypes per neuron. The update keeps, for each
/// neuron, the `q` observations of least local distortion, chosen one at a
/// time; since the set cost is a mean of per-member costs, this greedy pass
/// is also optimal. Different neurons may share observations.
pub fn q_median_som_train(
    d: &DissimilarityMatrix,
    lattice: &MapLattice,
    schedule: &NeighborhoodSchedule,
    q: usize,
    seed: u64,
) -> Result<QMedianMapState> {
    let n = d.len();
    let m = lattice.neuron_count();
    if q == 0 {
        return Err(Error::invalid("q must be positive"));
    }
    let mut warnings = Vec::new();
    if q > 1 && q * m > n {
        return Err(Error::invalid(format!("q·M = {} exceeds the {n} observations", q * m)));
    }
    if n < m {
        let msg = format!("{n} observations for {m} neurons: some neurons start on the same observation");
        warn!("{msg}");
        warnings.push(msg);
    }

    // candidates ordered by a label-free key, so relabeling the
    // observations relabels the result
    let sums: Vec<f64> = (0..n).map(|i| d.row(i).iter().sum()).collect();
    let mut candidates: Vec<usize> = (0..n).collect();
    candidates.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));
    let mut rng = seeded(seed);
    let starts = initial_indices(&candidates, m * q, &mut rng);
    let mut sets: Vec<Vec<usize>> = starts.chunks(q).map(<[usize]>::to_vec).collect();

    let mut distortion = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    for sweep in 0..schedule.sweeps() {
        let assignments: Vec<usize> = (0..n).into_par_iter().map(|i| nearest_set(d, i, &sets)).collect();
        let gamma = schedule.weights(lattice, sweep);
        let updated: Vec<Vec<usize>> = (0..m)
            .map(|c| {
                if assignments.iter().all(|&a| gamma.get(a, c) == 0.0) {
                    sets[c].clone()
                } else {
                    smallest(&candidate_costs(d, &assignments, &gamma, c), q)
                }
            })
            .collect();
        let mut terms: Vec<f64> = assignments
            .iter()
            .enumerate()
            .map(|(i, &a)| (0..m).map(|c| gamma.get(a, c) * mean_dissimilarity(d, i, &updated[c])).sum::<f64>())
            .collect();
        // summed in value order so relabeling cannot change the total
        terms.sort_by(f64::total_cmp);
        let total: f64 = terms.iter().sum();
        distortion.push(total);
        let unchanged = updated == sets;
        sets = updated;
        history.push(MedianSweep {
            sweep,
            assignments,
            prototypes: sets.clone(),
        });
        let radius_settled = schedule.radius(sweep) == schedule.final_radius();
        if unchanged && radius_settled && sweep > 0 {
            converged = sweep + 1 < schedule.sweeps();
            break;
        }
    }

    let assignments = (0..n).map(|i| nearest_set(d, i, &sets)).collect();
    Ok(QMedianMapState {
        prototype_sets: sets,
        assignments,
        distortion,
        converged,
        history,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelMapState {
    /// Row `c` holds the weights of neuron `c`'s prototype on each item.
    pub coefficients: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// `Σ_i Σ_c Γ(N(x_i), c) ‖φ(x_i) − p_c‖²` after each update.
    pub energy: Vec<f64>,
    #[serde(skip)]
    pub history: Vec<Vec<usize>>,
}

/// Squared feature-space distance from every item to every prototype.
fn implicit_distances(k: &KernelMatrix, coefficients: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = k.len();
    coefficients
        .par_iter()
        .map(|g| {
            let support: Vec<usize> = (0..n).filter(|&i| g[i] != 0.0).collect();
            // kg[j] = Σ_i γ_i K_ji
            let kg: Vec<f64> = (0..n)
                .map(|j| {
                    let row = k.row(j);
                    support.iter().map(|&i| g[i] * row[i]).sum()
                })
                .collect();
            let self_term: f64 = support.iter().map(|&i| g[i] * kg[i]).sum();
            (0..n).map(|j| k.get(j, j) - 2.0 * kg[j] + self_term).collect()
        })
        .collect()
}

fn nearest_column(dist: &[Vec<f64>], j: usize) -> usize {
    let mut best = 0;
    for c in 1..dist.len() {
        if dist[c][j] < dist[best][j] {
            best = c;
        }
    }
    best
}

/// Batch kernel SOM with hard assignments. Initial prototypes are single
/// items drawn exactly as the vector batch SOM draws its initial rows.
pub fn kernel_som_train(k: &KernelMatrix, lattice: &MapLattice, schedule: &NeighborhoodSchedule, seed: u64) -> Result<KernelMapState> {
    let n = k.len();
    let m = lattice.neuron_count();
    let rows = k.to_rows();
    let mut rng = seeded(seed);
    let init = initial_indices(&first_occurrences(&rows), m, &mut rng);
    let mut coefficients: Vec<Vec<f64>> = init
        .iter()
        .map(|&i| {
            let mut g = vec![0.0; n];
            g[i] = 1.0;
            g
        })
        .collect();

    let mut energy = Vec::with_capacity(schedule.sweeps());
    let mut history = Vec::with_capacity(schedule.sweeps());
    for sweep in 0..schedule.sweeps() {
        let dist = implicit_distances(k, &coefficients);
        let assignments: Vec<usize> = (0..n).map(|j| nearest_column(&dist, j)).collect();
        let gamma = schedule.weights(lattice, sweep);
        coefficients = (0..m)
            .map(|c| {
                let w = gamma.column_for(&assignments, c);
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    w.iter().map(|v| v / total).collect()
                } else {
                    coefficients[c].clone()
                }
            })
            .collect();
        let dist = implicit_distances(k, &coefficients);
        energy.push(
            assignments
                .iter()
                .enumerate()
                .map(|(j, &a)| (0..m).map(|c| gamma.get(a, c) * dist[c][j]).sum::<f64>())
                .sum(),
        );
        history.push(assignments);
    }
    let dist = implicit_distances(k, &coefficients);
    let assignments = (0..n).map(|j| nearest_column(&dist, j)).collect();
    Ok(KernelMapState {
        coefficients,
        assignments,
        energy,
        history,
    })
}
