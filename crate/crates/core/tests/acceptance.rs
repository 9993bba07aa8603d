//! Acceptance suite: one PASS/FAIL line per criterion, then a summary.
//! Run with `cargo test --test acceptance`. Expected values come from
//! oracles written here, independent of the library code paths.

#![allow(clippy::needless_range_loop)]

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use complexnn::categorical::{burt_table, ca_transform, disjunctive_table, CategoricalTable};
use complexnn::forecast::{decompose_profiles, TwoScaleSeries};
use complexnn::hmm::{forward_log_likelihood, gem_fit, simulate, GemConfig, HmmMlpParams};
use complexnn::metric::{
    edit_distance, edit_distance_str, gram_matrix, heat_kernel_matrix, kernel_distance, linear_kernel, poly_kernel,
    DissimilarityMatrix,
};
use complexnn::mlp::{backprop_gradient, mse_loss, MlpParams, TrainConfig, TrainingPair, Transfer};
use complexnn::rng::{seeded, Rng as ChaCha};
use complexnn::selection::{select_hidden_units, PenaltySpec};
use complexnn::som::{batch_som_train, map_quality, segment_project, MapLattice, NeighborhoodKind, NeighborhoodSchedule};
use complexnn::variants::{kernel_som_train, median_som_train};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn normal(rng: &mut ChaCha) -> f64 {
    StandardNormal.sample(rng)
}

fn uniform_points(rng: &mut ChaCha, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// --- 1 ---------------------------------------------------------------------

fn gradient_oracle() -> Outcome {
    let mut rng = seeded(1);
    let mut worst = 0.0f64;
    for net in 0..100 {
        let p = rng.random_range(1..=4);
        let k = rng.random_range(1..=5);
        let transfer = if net % 2 == 0 { Transfer::Tanh } else { Transfer::Logistic };
        let m = k * p + 2 * k + 1;
        let theta: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pairs: Vec<TrainingPair> = (0..12)
            .map(|_| TrainingPair::new((0..p).map(|_| rng.random_range(-2.0..2.0)).collect(), normal(&mut rng)))
            .collect();
        let params = MlpParams::from_flat(p, k, transfer, &theta).unwrap();
        let grad = backprop_gradient(&params, &pairs).unwrap();
        let loss = |t: &[f64]| mse_loss(&MlpParams::from_flat(p, k, transfer, t).unwrap(), &pairs).unwrap();
        let h = 1e-3;
        for i in 0..m {
            let at = |s: f64| {
                let mut t = theta.clone();
                t[i] += s * h;
                loss(&t)
            };
            // five-point central difference
            let fd = (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    (worst < 1e-5, format!("100 networks, max componentwise relative error {worst:.2e} (< 1e-5)"))
}

// --- 2 ---------------------------------------------------------------------

fn selection_recovery() -> Outcome {
    let truth = MlpParams::new(
        vec![vec![1.5, -1.0], vec![-0.5, 2.0]],
        vec![0.3, -0.2],
        vec![1.0, -0.8],
        0.1,
        Transfer::Tanh,
    )
    .unwrap();
    let mut chosen = Vec::new();
    for trial in 0..20u64 {
        let mut rng = seeded(2000 + trial);
        let pairs: Vec<TrainingPair> = (0..1000)
            .map(|_| {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y = truth.forward(&x).unwrap() + 0.1 * normal(&mut rng);
                TrainingPair::new(x, y)
            })
            .collect();
        let sel = select_hidden_units(&pairs, 5, PenaltySpec::default(), &TrainConfig::default(), trial).unwrap();
        chosen.push(sel.trace.chosen_k);
    }
    let hits = chosen.iter().filter(|&&k| k == 2).count();
    (hits >= 16, format!("chosen k = 2 in {hits}/20 trials (need >= 16); chosen {chosen:?}"))
}

// --- 3 ---------------------------------------------------------------------

/// `β + Σ_j a_j tanh(w_j x + b_j)` for a scalar input.
fn mlp_eval(w: &[f64], b: &[f64], a: &[f64], beta: f64, x: f64) -> f64 {
    beta + (0..w.len()).map(|j| a[j] * (w[j] * x + b[j]).tanh()).sum::<f64>()
}

fn log_normal_density(y: f64, mean: f64, sigma: f64) -> f64 {
    -0.5 * ((y - mean) / sigma).powi(2) - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn random_stochastic(rng: &mut ChaCha, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn likelihood_enumeration() -> Outcome {
    let mut worst = 0.0f64;
    for case in 0..20u64 {
        let mut rng = seeded(3000 + case);
        let n = 2;
        let transition: Vec<Vec<f64>> = (0..n).map(|_| random_stochastic(&mut rng, n)).collect();
        let initial = random_stochastic(&mut rng, n);
        let mut units = Vec::new();
        let mut regressors = Vec::new();
        for _ in 0..n {
            let w: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-0.5..0.5)).collect();
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let beta = rng.random_range(-1.0..1.0);
            regressors.push(MlpParams::new(w.iter().map(|&v| vec![v]).collect(), b.clone(), a.clone(), beta, Transfer::Tanh).unwrap());
            units.push((w, b, a, beta));
        }
        let sigma: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..1.5)).collect();
        let params = HmmMlpParams::new(transition.clone(), initial.clone(), regressors, sigma.clone()).unwrap();
        let warm = [0.2];
        let series: Vec<f64> = (0..6).map(|_| normal(&mut rng)).collect();

        let t_len = series.len();
        let mut logs = Vec::new();
        for code in 0..n.pow(t_len as u32) {
            let path: Vec<usize> = (0..t_len).map(|t| (code / n.pow(t as u32)) % n).collect();
            let mut lp = initial[path[0]].ln();
            for t in 0..t_len {
                if t > 0 {
                    lp += transition[path[t - 1]][path[t]].ln();
                }
                let prev = if t == 0 { warm[0] } else { series[t - 1] };
                let (w, b, a, beta) = &units[path[t]];
                lp += log_normal_density(series[t], mlp_eval(w, b, a, *beta, prev), sigma[path[t]]);
            }
            logs.push(lp);
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let brute = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        let fwd = forward_log_likelihood(&params, &series, &warm).unwrap();
        worst = worst.max((fwd - brute).abs() / brute.abs());
    }
    (worst < 1e-10, format!("20 models, N = 2, T = 6: max relative difference {worst:.2e} (< 1e-10)"))
}

// --- 4 ---------------------------------------------------------------------

fn gem_monotone() -> Outcome {
    let unit = |w: f64, beta: f64| MlpParams::new(vec![vec![w]], vec![0.0], vec![1.0], beta, Transfer::Tanh).unwrap();
    let truth = HmmMlpParams::new(
        vec![vec![0.9, 0.1], vec![0.15, 0.85]],
        vec![0.5, 0.5],
        vec![unit(0.8, 2.0), unit(-0.6, -2.0)],
        vec![0.4, 0.7],
    )
    .unwrap();
    let cfg = GemConfig {
        iterations: 50,
        ..Default::default()
    };
    let mut worst = f64::INFINITY;
    let mut steps = 0;
    for run in 0..10u64 {
        let sim = simulate(&truth, 300, &[0.0], 4000 + run).unwrap();
        let fit = gem_fit(&sim.series, 2, 1, &cfg, run).unwrap();
        for w in fit.log_likelihood.windows(2) {
            worst = worst.min(w[1] - w[0]);
            steps += 1;
        }
    }
    (
        worst >= -1e-8 && steps == 500,
        format!("10 runs, {steps} iterations: smallest log-likelihood change {worst:.3e} (>= -1e-8)"),
    )
}

// --- 5 ---------------------------------------------------------------------

fn median_optimality() -> Outcome {
    let lattice = MapLattice::grid(3, 3).unwrap();
    let mut checked = 0;
    let mut violations = 0;
    let mut kept = 0;
    for run in 0..10u64 {
        let mut rng = seeded(5000 + run);
        let pts = uniform_points(&mut rng, 60, 2);
        let d = DissimilarityMatrix::from_fn(60, |i, j| euclid(&pts[i], &pts[j])).unwrap();
        let kind = if run % 2 == 0 { NeighborhoodKind::Gaussian } else { NeighborhoodKind::Window };
        let schedule = NeighborhoodSchedule::new(kind, 2.0, 0.5, 15).unwrap();
        let state = median_som_train(&d, &lattice, &schedule, run).unwrap();
        for step in &state.history {
            let gamma = schedule.weights(&lattice, step.sweep);
            for c in 0..9 {
                let w: Vec<f64> = step.assignments.iter().map(|&a| gamma.get(a, c)).collect();
                if w.iter().all(|&v| v == 0.0) {
                    kept += 1;
                    continue;
                }
                let cost = |j: usize| (0..60).map(|i| w[i] * d.get(i, j)).sum::<f64>();
                let best = (0..60).map(cost).fold(f64::INFINITY, f64::min);
                let got = cost(step.prototypes[c][0]);
                checked += 1;
                if got > best + 1e-12 * best.abs().max(1.0) {
                    violations += 1;
                }
            }
        }
    }
    (
        violations == 0 && checked > 0,
        format!("{checked} updates scanned over 60 candidates: {violations} violations ({kept} empty neurons kept)"),
    )
}

// --- 6 ---------------------------------------------------------------------

fn kernel_vector_equivalence() -> Outcome {
    let lattice = MapLattice::grid(3, 3).unwrap();
    let schedule = NeighborhoodSchedule::default_for(&lattice);
    let mut worst = 0.0f64;
    let mut same = true;
    for seed in 0..5u64 {
        let mut rng = seeded(6000 + seed);
        let data = uniform_points(&mut rng, 200, 2);
        let vector = batch_som_train(&data, &lattice, &schedule, seed).unwrap();
        let k = gram_matrix(&data, |a, b| linear_kernel(a, b)).unwrap();
        let kern = kernel_som_train(&k, &lattice, &schedule, seed).unwrap();
        same &= vector.assignments == kern.assignments;
        for (c, gamma) in kern.coefficients.iter().enumerate() {
            for dim in 0..2 {
                let p: f64 = gamma.iter().zip(&data).map(|(g, x)| g * x[dim]).sum();
                worst = worst.max((p - vector.prototypes[c][dim]).abs());
            }
        }
    }
    (
        same && worst <= 1e-8,
        format!("5 seeds x 200 points: assignments identical = {same}, max prototype difference {worst:.2e} (<= 1e-8)"),
    )
}

// --- 7 ---------------------------------------------------------------------

/// Explicit feature map of `(x·y + c)²`.
fn quadratic_features(x: &[f64], c: f64) -> Vec<f64> {
    let mut phi = Vec::new();
    for i in 0..x.len() {
        phi.push(x[i] * x[i]);
        for j in (i + 1)..x.len() {
            phi.push(2f64.sqrt() * x[i] * x[j]);
        }
    }
    phi.extend(x.iter().map(|v| (2.0 * c).sqrt() * v));
    phi.push(c);
    phi
}

fn feature_map_oracle() -> Outcome {
    let mut rng = seeded(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let dim = rng.random_range(1..=4);
        let c = rng.random_range(0.0..2.0);
        let pair: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let k = gram_matrix(&pair, |a, b| poly_kernel(a, b, 2, c)).unwrap();
        let implicit = kernel_distance(&k, 0, 1).unwrap();
        let explicit = euclid(&quadratic_features(&pair[0], c), &quadratic_features(&pair[1], c));
        worst = worst.max((implicit - explicit).abs());
    }
    (worst < 1e-10, format!("50 pairs: max |d_K - ||phi(x) - phi(y)||| = {worst:.2e} (< 1e-10)"))
}

// --- 8 ---------------------------------------------------------------------

fn profile_identity() -> Outcome {
    let mut rng = seeded(8);
    let h = 24;
    let rows: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let level = rng.random_range(-50.0..50.0);
            let spread = rng.random_range(0.01..20.0);
            (0..h).map(|_| level + spread * normal(&mut rng)).collect()
        })
        .collect();
    let labels = (0..1000).map(|i| format!("b{}", i % 7)).collect();
    let series = TwoScaleSeries::new(rows.clone(), labels).unwrap();
    let dec = decompose_profiles(&series).unwrap();
    let (mut mean_err, mut var_err, mut rec_err) = (0.0f64, 0.0f64, 0.0f64);
    for (b, row) in rows.iter().enumerate() {
        let q = &dec.profiles[b];
        let m = q.iter().sum::<f64>() / h as f64;
        let v = q.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / h as f64;
        mean_err = mean_err.max(m.abs());
        var_err = var_err.max((v - 1.0).abs());
        for t in 0..h {
            rec_err = rec_err.max((dec.means[b] + dec.scales[b] * q[t] - row[t]).abs());
        }
    }
    (
        mean_err < 1e-12 && var_err < 1e-12 && rec_err <= 1e-10,
        format!("1000 rows: |mean| {mean_err:.1e}, |var - 1| {var_err:.1e}, reconstruction {rec_err:.1e}"),
    )
}

// --- 9 ---------------------------------------------------------------------

fn chi_square_distance(t: &[Vec<f64>], i: usize, k: usize) -> f64 {
    let width = t[0].len();
    let col: Vec<f64> = (0..width).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = col.iter().sum();
    let (ri, rk): (f64, f64) = (t[i].iter().sum(), t[k].iter().sum());
    (0..width)
        .filter(|&j| col[j] > 0.0)
        .map(|j| total / col[j] * (t[i][j] / ri - t[k][j] / rk).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn burt_identity() -> Outcome {
    let mut rng = seeded(9);
    let mut exact = true;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let v = rng.random_range(1..=5);
        let levels: Vec<usize> = (0..v).map(|_| rng.random_range(1..=4)).collect();
        let rows: Vec<Vec<String>> = (0..n)
            .map(|_| levels.iter().map(|&l| format!("c{}", rng.random_range(0..l))).collect())
            .collect();
        let names = (0..v).map(|j| format!("v{j}")).collect();
        let table = CategoricalTable::from_labels(names, &rows).unwrap();
        let cdt = disjunctive_table(&table).matrix;
        let bt = burt_table(&table).matrix;
        let c = cdt[0].len();
        for a in 0..c {
            for b in 0..c {
                let prod: f64 = (0..n).map(|i| cdt[i][a] * cdt[i][b]).sum();
                exact &= bt[a][b] == prod;
            }
        }
        for t in [&bt, &cdt] {
            let z = ca_transform(t).unwrap().rows;
            let m = t.len().min(12);
            for i in 0..m {
                for k in (i + 1)..m {
                    worst = worst.max((euclid(&z[i], &z[k]) - chi_square_distance(t, i, k)).abs());
                }
            }
        }
    }
    (
        exact && worst <= 1e-10,
        format!("200 tables: BT = CDT'CDT exactly = {exact}, max chi-square distance error {worst:.2e} (<= 1e-10)"),
    )
}

// --- 10 --------------------------------------------------------------------

fn heat_kernel() -> Outcome {
    let mut rng = seeded(10);
    let mut identity = true;
    for n in 1..=6 {
        let adj: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i != j))).collect()).collect();
        let k = heat_kernel_matrix(&adj, 0.0).unwrap();
        identity &= (0..n).all(|i| (0..n).all(|j| k.get(i, j) == f64::from(u8::from(i == j))));
    }
    let mut closed = 0.0f64;
    for _ in 0..20 {
        let (w, beta) = (rng.random_range(0.1..3.0), rng.random_range(0.01..3.0));
        let k = heat_kernel_matrix(&[vec![0.0, w], vec![w, 0.0]], beta).unwrap();
        let e = (-2.0 * beta * w).exp();
        let (on, off) = (0.5 * (1.0 + e), 0.5 * (1.0 - e));
        for (i, j, want) in [(0, 0, on), (0, 1, off), (1, 0, off), (1, 1, on)] {
            closed = closed.max((k.get(i, j) - want).abs());
        }
    }
    let mut min_eig = f64::INFINITY;
    for _ in 0..20 {
        let n = rng.random_range(2..=15);
        let mut adj = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.4 {
                    let w = rng.random_range(0.1..2.0);
                    adj[i][j] = w;
                    adj[j][i] = w;
                }
            }
        }
        let beta = rng.random_range(0.05..3.0);
        let k = heat_kernel_matrix(&adj, beta).unwrap();
        let m = DMatrix::from_fn(n, n, |i, j| k.get(i, j));
        min_eig = min_eig.min(SymmetricEigen::new(m).eigenvalues.min());
    }
    (
        identity && closed <= 1e-12 && min_eig >= -1e-10,
        format!("beta = 0 identity = {identity}, 2-node error {closed:.1e} (<= 1e-12), min eigenvalue {min_eig:.2e} (>= -1e-10)"),
    )
}

// --- 11 --------------------------------------------------------------------

fn edit_metric() -> Outcome {
    let mut rng = seeded(11);
    let word = |rng: &mut ChaCha| -> Vec<u8> { (0..rng.random_range(0..=8)).map(|_| b"abc"[rng.random_range(0..3)]).collect() };
    let (mut sym, mut ident, mut tri) = (0, 0, 0);
    for _ in 0..1000 {
        let (a, b, c) = (word(&mut rng), word(&mut rng), word(&mut rng));
        let (ab, bc, ac) = (edit_distance(&a, &b), edit_distance(&b, &c), edit_distance(&a, &c));
        sym += usize::from(ab != edit_distance(&b, &a));
        ident += usize::from(edit_distance(&a, &a) != 0 || (ab == 0) != (a == b));
        tri += usize::from(ac > ab + bc);
    }
    let kitten = edit_distance_str("kitten", "sitting");
    (
        sym + ident + tri == 0 && kitten == 3,
        format!("1000 triples: symmetry {sym}, identity {ident}, triangle {tri} violations; kitten/sitting = {kitten}"),
    )
}

// --- 12 --------------------------------------------------------------------

fn topographic_organization() -> Outcome {
    let lattice = MapLattice::grid(5, 5).unwrap();
    let schedule = NeighborhoodSchedule::default_for(&lattice);
    let mut errors = Vec::new();
    for seed in 0..10u64 {
        let mut rng = seeded(12_000 + seed);
        let data = uniform_points(&mut rng, 500, 2);
        let map = batch_som_train(&data, &lattice, &schedule, seed).unwrap();
        errors.push(map_quality(&data, &map.prototypes, &lattice).unwrap().topographic_error);
    }
    let good = errors.iter().filter(|&&e| e < 0.2).count();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    (good >= 9, format!("topographic error < 0.2 in {good}/10 seeds (need >= 9), worst {worst:.3}"))
}

// --- 13 --------------------------------------------------------------------

fn sse(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let s: f64 = xs.iter().sum();
    let s2: f64 = xs.iter().map(|x| x * x).sum();
    (s2 - s * s / n).max(0.0)
}

/// Every choice of `segments - 1` cut points in `1..h`.
fn exhaustive_segmentation(xs: &[f64], segments: usize) -> (f64, Vec<usize>) {
    let h = xs.len();
    let mut best = (f64::INFINITY, Vec::new());
    let mut cuts = Vec::new();
    fn rec(xs: &[f64], start: usize, left: usize, cuts: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        let h = xs.len();
        if left == 0 {
            let mut bounds = vec![0];
            bounds.extend_from_slice(cuts);
            bounds.push(h);
            let cost: f64 = bounds.windows(2).map(|w| sse(&xs[w[0]..w[1]])).sum();
            if cost < best.0 {
                let mut starts = vec![0];
                starts.extend_from_slice(cuts);
                *best = (cost, starts);
            }
            return;
        }
        for c in start..h {
            cuts.push(c);
            rec(xs, c + 1, left - 1, cuts, best);
            cuts.pop();
        }
    }
    rec(xs, 1, segments - 1, &mut cuts, &mut best);
    let _ = h;
    best
}

fn segmentation_dp() -> Outcome {
    let mut rng = seeded(13);
    let mut mismatches = 0;
    let mut cases = 0;
    for _ in 0..50 {
        let xs: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
        for s in 1..=3 {
            let dp = segment_project(&xs, s).unwrap();
            let (cost, starts) = exhaustive_segmentation(&xs, s);
            cases += 1;
            if dp.breakpoints != starts || (dp.squared_error - cost).abs() > 1e-12 * cost.max(1.0) {
                mismatches += 1;
            }
        }
    }
    (mismatches == 0, format!("{cases} cases (H = 10, S <= 3): {mismatches} differ from exhaustive search"))
}

// --- 14 --------------------------------------------------------------------

fn json_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let commands = ["som-train", "som-median", "som-kernel", "som-cat", "mlp-select", "hmm-sim", "hmm-fit", "forecast"];
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut files = 0;
    for name in commands {
        let out = tmp.path().join(name);
        let run = |args: &[String]| {
            let r = Command::new(env!("CARGO_BIN_EXE_complexnn")).args(args).current_dir(root).output().unwrap();
            assert!(r.status.success(), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        };
        run(&["--config".into(), format!("data/{name}.conf"), "--set".into(), format!("output={}", out.display())]);
        let first = json_artifacts(&out);
        run(&["--config".into(), out.join("config.resolved").display().to_string()]);
        let second = json_artifacts(&out);
        files += first.len();
        if first.is_empty() || first != second {
            differing.push(name);
        }
    }
    (
        differing.is_empty(),
        format!("8 commands, {files} JSON artifacts re-run from the echoed config: differing {differing:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 14] = [
        ("gradient oracle", gradient_oracle, Duration::from_secs(10)),
        ("selection recovery (logOverN)", selection_recovery, Duration::from_secs(300)),
        ("likelihood vs path enumeration", likelihood_enumeration, Duration::from_secs(1)),
        ("GEM monotonicity", gem_monotone, Duration::from_secs(120)),
        ("median SOM update optimality", median_optimality, Duration::from_secs(30)),
        ("kernel SOM = batch SOM (linear kernel)", kernel_vector_equivalence, Duration::from_secs(30)),
        ("polynomial kernel distance vs feature map", feature_map_oracle, Duration::from_secs(1)),
        ("profile identity", profile_identity, Duration::from_secs(1)),
        ("Burt identity and chi-square distance", burt_identity, Duration::from_secs(10)),
        ("heat kernel", heat_kernel, Duration::from_secs(5)),
        ("edit distance metric", edit_metric, Duration::from_secs(1)),
        ("topographic organization", topographic_organization, Duration::from_secs(60)),
        ("segmentation DP vs exhaustive", segmentation_dp, Duration::from_secs(5)),
        ("end-to-end CLI determinism", cli_determinism, Duration::from_secs(600)),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = Vec::new();
    let mut ran = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (ok, detail) = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let took = start.elapsed();
        let in_time = took <= *budget;
        let pass = ok && in_time;
        let timing = format!("{:.2} s of {} s", took.as_secs_f64(), budget.as_secs());
        println!("{} {id:>2} {name}: {detail} [{timing}{}]", if pass { "PASS" } else { "FAIL" }, if in_time { "" } else { ", over budget" });
        if !pass {
            failed.push(id);
        }
    }
    println!("{}/{ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
