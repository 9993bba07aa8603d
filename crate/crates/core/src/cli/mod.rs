//! Command-line front end: one command per run, driven by a flat config.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! for numeric failures.

pub mod config;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::categorical::categorical_som_train;
use crate::error::{Error, Result};
use crate::forecast::{decompose_profiles, forecast_next_vector};
use crate::hmm::{gem_fit, simulate, viterbi_decode, GemConfig, HmmMlpParams};
use crate::io;
use crate::metric::{edit_distance_str, gram_matrix, heat_kernel_matrix, parse_edge_list, DissimilarityMatrix, KernelMatrix};
use crate::mlp::{embed_autoregressive, TrainConfig, TrainingPair};
use crate::selection::{select_hidden_units, PenaltySpec};
use crate::som::{batch_som_train, map_quality, u_matrix, MapLattice, NeighborhoodSchedule};
use crate::variants::{kernel_som_train, q_median_som_train};

pub use config::{parse_config, Command, RunConfig, SvgMode};
pub use svg::export_map_svg;

pub const RESOLVED_CONFIG: &str = "config.resolved";

/// Exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numeric() {
        2
    } else {
        1
    }
}

/// One-line diagnostic for stderr.
pub fn diagnostic(err: &Error) -> String {
    let kind = if err.is_numeric() { "numeric" } else { "input" };
    format!("error[{kind}]: {err}")
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LatticeInfo {
    shape: String,
    neurons: usize,
    schedule: NeighborhoodSchedule,
}

impl LatticeInfo {
    fn new(lattice: &MapLattice, schedule: &NeighborhoodSchedule) -> Self {
        LatticeInfo {
            shape: lattice.to_string(),
            neurons: lattice.neuron_count(),
            schedule: *schedule,
        }
    }
}

/// Executes the configured command and returns the artifacts written.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let out = &config.output;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    let mut written = Vec::new();
    let resolved = out.join(RESOLVED_CONFIG);
    io::write_text(&resolved, &config.to_text())?;
    written.push(resolved);
    let input = config.input.as_deref().unwrap_or(Path::new(""));
    match config.command {
        Command::SomTrain => som_train(config, input, &mut written)?,
        Command::SomMedian => som_median(config, input, &mut written)?,
        Command::SomKernel => som_kernel(config, input, &mut written)?,
        Command::SomCat => som_cat(config, input, &mut written)?,
        Command::MlpSelect => mlp_select(config, input, &mut written)?,
        Command::HmmSim => hmm_sim(config, &mut written)?,
        Command::HmmFit => hmm_fit(config, input, &mut written)?,
        Command::Forecast => forecast(config, input, &mut written)?,
    }
    Ok(written)
}

fn json<T: Serialize>(cfg: &RunConfig, name: &str, artifact: &str, value: &T, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = cfg.output.join(name);
    io::write_json(&p, artifact, value)?;
    written.push(p);
    Ok(())
}

fn csv(cfg: &RunConfig, name: &str, header: &[&str], rows: &[Vec<String>], written: &mut Vec<PathBuf>) -> Result<()> {
    let p = cfg.output.join(name);
    io::write_csv(&p, header, rows)?;
    written.push(p);
    Ok(())
}

/// Energy trace with the radius of each sweep.
fn sweep_trace(cfg: &RunConfig, values: &[f64], written: &mut Vec<PathBuf>) -> Result<()> {
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(s, v)| vec![s.to_string(), cfg.schedule.radius(s).to_string(), v.to_string()])
        .collect();
    csv(cfg, "trace.csv", &["sweep", "radius", "energy"], &rows, written)
}

fn map_svg(cfg: &RunConfig, umatrix: impl FnOnce() -> Vec<f64>, assignments: &[usize], written: &mut Vec<PathBuf>) -> Result<()> {
    let (values, what) = match cfg.svg {
        SvgMode::None => return Ok(()),
        SvgMode::UMatrix => (umatrix(), "U-matrix"),
        SvgMode::Counts => (svg::counts(assignments, cfg.lattice.neuron_count()), "counts"),
    };
    let p = cfg.output.join("map.svg");
    io::write_text(&p, &export_map_svg(&cfg.lattice, &values, &format!("{} {what}", cfg.command)))?;
    written.push(p);
    Ok(())
}

fn som_train(cfg: &RunConfig, input: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let data = io::read_matrix_csv(input)?;
    let map = batch_som_train(&data, &cfg.lattice, &cfg.schedule, cfg.seed)?;
    let quality = map_quality(&data, &map.prototypes, &cfg.lattice)?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out<'a> {
        lattice: LatticeInfo,
        seed: u64,
        prototypes: &'a [Vec<f64>],
        assignments: &'a [usize],
        quantization_error: f64,
        topographic_error: f64,
    }
    let out = Out {
        lattice: LatticeInfo::new(&cfg.lattice, &cfg.schedule),
        seed: cfg.seed,
        prototypes: &map.prototypes,
        assignments: &map.assignments,
        quantization_error: quality.quantization_error,
        topographic_error: quality.topographic_error,
    };
    json(cfg, "map.json", "vectorMap", &out, written)?;
    sweep_trace(cfg, &map.energy, written)?;
    map_svg(cfg, || u_matrix(&map.prototypes, &cfg.lattice), &map.assignments, written)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn load_dissimilarity(cfg: &RunConfig, input: &Path) -> Result<DissimilarityMatrix> {
    use config::DissimilaritySource::*;
    match cfg.dissimilarity {
        Precomputed => DissimilarityMatrix::new(io::read_matrix_csv(input)?),
        Euclidean => {
            let data = io::read_matrix_csv(input)?;
            DissimilarityMatrix::from_fn(data.len(), |i, j| euclidean(&data[i], &data[j]))
        }
        Edit => {
            let words = io::read_lines(input)?;
            DissimilarityMatrix::from_fn(words.len(), |i, j| edit_distance_str(&words[i], &words[j]) as f64)
        }
    }
}

fn som_median(cfg: &RunConfig, input: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let d = load_dissimilarity(cfg, input)?;
    let state = q_median_som_train(&d, &cfg.lattice, &cfg.schedule, cfg.q, cfg.seed)?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out<'a> {
        lattice: LatticeInfo,
        seed: u64,
        q: usize,
        prototype_sets: &'a [Vec<usize>],
        assignments: &'a [usize],
        distortion: &'a [f64],
        converged: bool,
        warnings: &'a [String],
    }
    let out = Out {
        lattice: LatticeInfo::new(&cfg.lattice, &cfg.schedule),
        seed: cfg.seed,
        q: cfg.q,
        prototype_sets: &state.prototype_sets,
        assignments: &state.assignments,
        distortion: &state.distortion,
        converged: state.converged,
        warnings: &state.warnings,
    };
    json(cfg, "map.json", "medianMap", &out, written)?;
    sweep_trace(cfg, &state.distortion, written)?;
    let sets = &state.prototype_sets;
    // mean dissimilarity between the two neurons' prototype sets
    let set_dist = |c: usize, e: usize| {
        let total: f64 = sets[c].iter().flat_map(|&a| sets[e].iter().map(move |&b| (a, b))).map(|(a, b)| d.get(a, b)).sum();
        total / (sets[c].len() * sets[e].len()) as f64
    };
    map_svg(cfg, || svg::neighbor_means(&cfg.lattice, set_dist), &state.assignments, written)
}

fn load_kernel(cfg: &RunConfig, input: &Path) -> Result<KernelMatrix> {
    match cfg.kernel {
        config::KernelSource::Vector(k) => {
            let data = io::read_matrix_csv(input)?;
            gram_matrix(&data, |x, y| k.eval(x, y))
        }
        config::KernelSource::Heat { beta } => heat_kernel_matrix(&parse_edge_list(&io::read_text(input)?, None)?, beta),
        config::KernelSource::Precomputed => KernelMatrix::new(io::read_matrix_csv(input)?),
    }
}

fn som_kernel(cfg: &RunConfig, input: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let k = load_kernel(cfg, input)?;
    let state = kernel_som_train(&k, &cfg.lattice, &cfg.schedule, cfg.seed)?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out<'a> {
        lattice: LatticeInfo,
        seed: u64,
        kernel: String,
        coefficients: &'a [Vec<f64>],
        assignments: &'a [usize],
        energy: &'a [f64],
    }
    let out = Out {
        lattice: LatticeInfo::new(&cfg.lattice, &cfg.schedule),
        seed: cfg.seed,
        kernel: cfg.kernel.to_string(),
        coefficients: &state.coefficients,
        assignments: &state.assignments,
        energy: &state.energy,
    };
    json(cfg, "map.json", "kernelMap", &out, written)?;
    sweep_trace(cfg, &state.energy, written)?;
    let g = &state.coefficients;
    // ‖p_c − p_e‖² = (γ_c − γ_e)ᵀ K (γ_c − γ_e)
    let proto_dist = |c: usize, e: usize| {
        let diff: Vec<f64> = g[c].iter().zip(&g[e]).map(|(a, b)| a - b).collect();
        let q: f64 = (0..k.len())
            .filter(|&i| diff[i] != 0.0)
            .map(|i| diff[i] * k.row(i).iter().zip(&diff).map(|(v, w)| v * w).sum::<f64>())
            .sum();
        q.max(0.0).sqrt()
    };
    map_svg(cfg, || svg::neighbor_means(&cfg.lattice, proto_dist), &state.assignments, written)
}

fn som_cat(cfg: &RunConfig, input: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let table = io::read_categorical_csv(input)?;
    let cm = categorical_som_train(&table, cfg.encoding, &cfg.lattice, &cfg.schedule, cfg.seed)?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out<'a> {
        lattice: LatticeInfo,
        seed: u64,
        encoding: String,
        row_labels: &'a [String],
        column_labels: &'a [String],
        prototypes: &'a [Vec<f64>],
        assignments: &'a [usize],
        warnings: &'a [String],
    }
    let out = Out {
        lattice: LatticeInfo::new(&cfg.lattice, &cfg.schedule),
        seed: cfg.seed,
        encoding: cfg.encoding.to_string(),
        row_labels: &cm.row_labels,
        column_labels: &cm.column_labels,
        prototypes: &cm.map.prototypes,
        assignments: &cm.map.assignments,
        warnings: &cm.warnings,
    };
    json(cfg, "map.json", "categoricalMap", &out, written)?;
    sweep_trace(cfg, &cm.map.energy, written)?;
    map_svg(cfg, || u_matrix(&cm.map.prototypes, &cfg.lattice), &cm.map.assignments, written)
}

fn mlp_select(cfg: &RunConfig, input: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let pairs = if cfg.window > 0 {
        embed_autoregressive(&io::read_series_csv(input)?, cfg.window)?
    } else {
        let rows = io::read_matrix_csv(input)?;
        if rows[0].len() < 2 {
            return Err(Error::invalid("pair data needs input columns and a target column"));
        }
        rows.into_iter()
            .map(|mut r| {
                let y = r.pop().unwrap_or_default();
                TrainingPair::new(r, y)
            })
            .collect()
    };
    let train = TrainConfig {
        restarts: cfg.restarts,
        max_iters: cfg.max_iters,
        transfer: cfg.transfer,
        ..TrainConfig::default()
    };
    let penalty = PenaltySpec::new(cfg.penalty, cfg.multiplier)?;
    let sel = select_hidden_units(&pairs, cfg.max_k, penalty, &train, cfg.seed)?;
    #[derive(Serialize)]
    struct Out<'a> {
        seed: u64,
        selection: &'a crate::selection::SelectionTrace,
        model: &'a crate::mlp::MlpParams,
    }
    json(
        cfg,
        "selection.json",
        "mlpSelection",
        &Out {
            seed: cfg.seed,
            selection: &sel.trace,
            model: &sel.model,
        },
        written,
    )?;
    let p = cfg.output.join("trace.csv");
    let file = fs::File::create(&p).map_err(|e| Error::Io {
        path: p.display().to_string(),
        source: e,
    })?;
    sel.trace.write_csv(file)?;
    written.push(p);
    Ok(())
}

fn load_model(path: &Path) -> Result<HmmMlpParams> {
    let value: serde_json::Value = serde_json::from_str(&io::read_text(path)?)?;
    // accepts a bare model or the `params` field of a fitted-model artifact
    let body = value.get("params").cloned().unwrap_or(value);
    let raw: HmmMlpParams = serde_json::from_value(body)?;
    let model = HmmMlpParams::new(
        raw.transition().to_vec(),
        raw.initial().to_vec(),
        raw.regressors().to_vec(),
        raw.noise_scales().to_vec(),
    )?;
    if model.order() != raw.order() {
        return Err(Error::invalid(format!("model order {} does not match its regressors ({})", raw.order(), model.order())));
    }
    Ok(model)
}

fn hmm_sim(cfg: &RunConfig, written: &mut Vec<PathBuf>) -> Result<()> {
    let model = load_model(cfg.model.as_deref().unwrap_or(Path::new("")))?;
    let warm = cfg.warm_start.clone().unwrap_or_else(|| vec![0.0; model.order()]);
    let sim = simulate(&model, cfg.length, &warm, cfg.seed)?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out<'a> {
        seed: u64,
        warm_start: &'a [f64],
        series: &'a [f64],
        path: &'a [usize],
    }
    json(
        cfg,
        "simulation.json",
        "hmmSimulation",
        &Out {
            seed: cfg.seed,
            warm_start: &warm,
            series: &sim.series,
            path: &sim.path,
        },
        written,
    )?;
    // warm start first, so the file can be fitted directly
    let rows: Vec<Vec<String>> = warm
        .iter()
        .map(|v| vec![v.to_string(), String::new()])
        .chain(sim.series.iter().zip(&sim.path).map(|(v, s)| vec![v.to_string(), s.to_string()]))
        .collect();
    csv(cfg, "series.csv", &["value", "state"], &rows, written)
}

fn hmm_fit(cfg: &RunConfig, input: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let series = io::read_series_csv(input)?;
    let gem = GemConfig {
        hidden: cfg.hidden,
        iterations: cfg.iterations,
        transfer: cfg.transfer,
        ..GemConfig::default()
    };
    let fit = gem_fit(&series, cfg.states, cfg.order, &gem, cfg.seed)?;
    let decoded = viterbi_decode(&fit.params, &series[cfg.order..], &series[..cfg.order])?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out<'a> {
        seed: u64,
        params: &'a HmmMlpParams,
        log_likelihood: &'a [f64],
        path: &'a [usize],
        path_log_probability: f64,
        warnings: &'a [String],
    }
    json(
        cfg,
        "model.json",
        "hmmMlpModel",
        &Out {
            seed: cfg.seed,
            params: &fit.params,
            log_likelihood: &fit.log_likelihood,
            path: &decoded.path,
            path_log_probability: decoded.log_probability,
            warnings: &fit.warnings,
        },
        written,
    )?;
    let rows: Vec<Vec<String>> = fit
        .log_likelihood
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), l.to_string()])
        .collect();
    csv(cfg, "trace.csv", &["iteration", "logLikelihood"], &rows, written)
}

fn forecast(cfg: &RunConfig, input: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let series = io::read_two_scale_csv(input)?;
    let label = cfg.next_label.as_deref().unwrap_or_default();
    let (f, pm) = forecast_next_vector(&series, label, &cfg.lattice, &cfg.schedule, cfg.method, cfg.seed)?;
    let dec = decompose_profiles(&series)?;
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Out<'a> {
        lattice: LatticeInfo,
        seed: u64,
        method: String,
        forecast: &'a crate::forecast::VectorForecast,
        prototypes: &'a [Vec<f64>],
        metadata_map: &'a crate::forecast::MetadataMap,
        degenerate_blocks: Vec<usize>,
    }
    let out = Out {
        lattice: LatticeInfo::new(&cfg.lattice, &cfg.schedule),
        seed: cfg.seed,
        method: cfg.method.to_string(),
        forecast: &f,
        prototypes: &pm.map.prototypes,
        metadata_map: &pm.metadata_map,
        degenerate_blocks: (0..dec.degenerate.len()).filter(|&j| dec.degenerate[j]).collect(),
    };
    json(cfg, "forecast.json", "forecast", &out, written)?;
    let header: Vec<String> = (0..f.values.len()).map(|h| format!("h{h}")).collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csv(cfg, "forecast.csv", &header_refs, &[f.values.iter().map(f64::to_string).collect()], written)?;
    map_svg(cfg, || u_matrix(&pm.map.prototypes, &cfg.lattice), &pm.map.assignments, written)
}
