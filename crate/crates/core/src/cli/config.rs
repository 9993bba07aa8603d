//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Command-line `--set key=value`
//! overrides win over the file. Every run echoes the fully resolved
//! configuration, which reproduces the run when fed back.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::categorical::EncodingKind;
use crate::error::{Error, Result};
use crate::forecast::ForecastMethod;
use crate::metric::VectorKernel;
use crate::mlp::Transfer;
use crate::selection::PenaltyKind;
use crate::som::{LatticeMetric, MapLattice, NeighborhoodKind, NeighborhoodSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SomTrain,
    SomMedian,
    SomKernel,
    SomCat,
    MlpSelect,
    HmmSim,
    HmmFit,
    Forecast,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::SomTrain,
        Command::SomMedian,
        Command::SomKernel,
        Command::SomCat,
        Command::MlpSelect,
        Command::HmmSim,
        Command::HmmFit,
        Command::Forecast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SomTrain => "som-train",
            Command::SomMedian => "som-median",
            Command::SomKernel => "som-kernel",
            Command::SomCat => "som-cat",
            Command::MlpSelect => "mlp-select",
            Command::HmmSim => "hmm-sim",
            Command::HmmFit => "hmm-fit",
            Command::Forecast => "forecast",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvgMode {
    None,
    UMatrix,
    Counts,
}

impl FromStr for SvgMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SvgMode::None),
            "umatrix" => Ok(SvgMode::UMatrix),
            "counts" => Ok(SvgMode::Counts),
            other => Err(Error::invalid(format!("unknown svg mode `{other}`"))),
        }
    }
}

impl fmt::Display for SvgMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SvgMode::None => "none",
            SvgMode::UMatrix => "umatrix",
            SvgMode::Counts => "counts",
        })
    }
}

/// Where the median SOM gets its dissimilarities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissimilaritySource {
    /// Square CSV matrix.
    Precomputed,
    /// Euclidean distances between rows of a numeric CSV.
    Euclidean,
    /// Edit distances between the lines of a text file.
    Edit,
}

impl FromStr for DissimilaritySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precomputed" => Ok(DissimilaritySource::Precomputed),
            "euclidean" => Ok(DissimilaritySource::Euclidean),
            "edit" => Ok(DissimilaritySource::Edit),
            other => Err(Error::invalid(format!("unknown dissimilarity `{other}`"))),
        }
    }
}

impl fmt::Display for DissimilaritySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DissimilaritySource::Precomputed => "precomputed",
            DissimilaritySource::Euclidean => "euclidean",
            DissimilaritySource::Edit => "edit",
        })
    }
}

/// Kernel for the kernel SOM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSource {
    Vector(VectorKernel),
    /// Heat kernel of the graph in an edge-list file.
    Heat { beta: f64 },
    /// Square CSV matrix.
    Precomputed,
}

impl FromStr for KernelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "precomputed" {
            return Ok(KernelSource::Precomputed);
        }
        if let Some(b) = s.strip_prefix("heat:") {
            let beta: f64 = b.parse().map_err(|_| Error::invalid(format!("cannot parse heat kernel beta `{b}`")))?;
            return Ok(KernelSource::Heat { beta });
        }
        s.parse().map(KernelSource::Vector)
    }
}

impl fmt::Display for KernelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSource::Vector(k) => write!(f, "{k}"),
            KernelSource::Heat { beta } => write!(f, "heat:{beta}"),
            KernelSource::Precomputed => write!(f, "precomputed"),
        }
    }
}

/// Known keys, their defaults and the expected type (for messages).
const KEYS: &[(&str, Option<&str>, &str)] = &[
    ("command", None, "command name"),
    ("input", None, "path"),
    ("model", None, "path"),
    ("output", Some("out"), "path"),
    ("seed", Some("0"), "unsigned integer"),
    ("lattice", Some("grid:5x5"), "lattice (grid:RxC or string:L)"),
    ("metric", Some("euclidean"), "euclidean or manhattan"),
    ("neighborhood", Some("gaussian"), "gaussian or window"),
    ("radius", None, "positive number"),
    ("final_radius", None, "positive number"),
    ("sweeps", None, "unsigned integer"),
    ("svg", Some("umatrix"), "none, umatrix or counts"),
    ("dissimilarity", Some("precomputed"), "precomputed, euclidean or edit"),
    ("q", Some("1"), "unsigned integer"),
    ("kernel", Some("linear"), "linear, rbf:G, poly:D:C, heat:B or precomputed"),
    ("encoding", Some("burt"), "burt or cdt"),
    ("window", Some("0"), "unsigned integer"),
    ("max_k", Some("5"), "unsigned integer"),
    ("penalty", Some("logOverN"), "logOverN, sqrtOverN or perParameterLog"),
    ("multiplier", Some("1"), "positive number"),
    ("restarts", Some("5"), "unsigned integer"),
    ("max_iters", Some("500"), "unsigned integer"),
    ("transfer", Some("tanh"), "tanh or logistic"),
    ("length", Some("200"), "unsigned integer"),
    ("warm_start", None, "comma-separated numbers"),
    ("states", Some("2"), "unsigned integer"),
    ("order", Some("1"), "unsigned integer"),
    ("hidden", Some("2"), "unsigned integer"),
    ("iterations", Some("50"), "unsigned integer"),
    ("next_label", None, "text"),
    ("method", Some("seasonalNaive:1"), "seasonalNaive:P or ar:P"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    pub lattice: MapLattice,
    pub schedule: NeighborhoodSchedule,
    pub svg: SvgMode,
    pub dissimilarity: DissimilaritySource,
    pub q: usize,
    pub kernel: KernelSource,
    pub encoding: EncodingKind,
    pub window: usize,
    pub max_k: usize,
    pub penalty: PenaltyKind,
    pub multiplier: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub transfer: Transfer,
    pub length: usize,
    pub warm_start: Option<Vec<f64>>,
    pub states: usize,
    pub order: usize,
    pub hidden: usize,
    pub iterations: usize,
    pub next_label: Option<String>,
    pub method: ForecastMethod,
}

fn typed<T: FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    let Some(v) = raw.get(key).filter(|v| !v.is_empty()) else {
        return Ok(None);
    };
    let expected = KEYS.iter().find(|k| k.0 == key).map_or("value", |k| k.2);
    v.parse()
        .map(Some)
        .map_err(|_| Error::Config(format!("key `{key}`: expected {expected}, got `{v}`")))
}

fn required<T: FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<T> {
    typed(raw, key)?.ok_or_else(|| Error::Config(format!("key `{key}` is required")))
}

fn split_line(line: &str, origin: &str) -> Result<Option<(String, String)>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("{origin}: expected `key = value`, got `{line}`")))?;
    let key = k.trim().to_string();
    if !KEYS.iter().any(|(name, _, _)| *name == key) {
        return Err(Error::Config(format!("unknown key `{key}`")));
    }
    Ok(Some((key, v.trim().to_string())))
}

/// Parses the file text, then applies `overrides` (`key=value` each).
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut raw: BTreeMap<String, String> = KEYS
        .iter()
        .filter_map(|(k, d, _)| d.map(|d| (k.to_string(), d.to_string())))
        .collect();
    for (no, line) in text.lines().enumerate() {
        if let Some((k, v)) = split_line(line, &format!("line {}", no + 1))? {
            raw.insert(k, v);
        }
    }
    for o in overrides {
        match split_line(o, "override")? {
            Some((k, v)) => {
                raw.insert(k, v);
            }
            None => return Err(Error::Config(format!("override `{o}` is not `key=value`"))),
        }
    }
    resolve(&raw)
}

fn resolve(raw: &BTreeMap<String, String>) -> Result<RunConfig> {
    let metric: LatticeMetric = required(raw, "metric")?;
    let lattice = required::<MapLattice>(raw, "lattice")?.with_metric(metric);
    let default = NeighborhoodSchedule::default_for(&lattice);
    let radius = typed(raw, "radius")?.unwrap_or(default.initial_radius());
    let final_radius = typed(raw, "final_radius")?.unwrap_or(default.final_radius().min(radius));
    let schedule = NeighborhoodSchedule::new(
        required(raw, "neighborhood")?,
        radius,
        final_radius,
        typed(raw, "sweeps")?.unwrap_or(default.sweeps()),
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    let warm_start = match raw.get("warm_start").filter(|v| !v.is_empty()) {
        None => None,
        Some(v) => Some(
            v.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("key `warm_start`: expected comma-separated numbers, got `{v}`")))?,
        ),
    };
    let multiplier: f64 = required(raw, "multiplier")?;
    if !(multiplier > 0.0) {
        return Err(Error::Config(format!("key `multiplier`: expected positive number, got `{multiplier}`")));
    }
    Ok(RunConfig {
        command: required(raw, "command")?,
        input: typed(raw, "input")?,
        model: typed(raw, "model")?,
        output: required(raw, "output")?,
        seed: required(raw, "seed")?,
        lattice,
        schedule,
        svg: required(raw, "svg")?,
        dissimilarity: required(raw, "dissimilarity")?,
        q: required(raw, "q")?,
        kernel: required(raw, "kernel")?,
        encoding: required(raw, "encoding")?,
        window: required(raw, "window")?,
        max_k: required(raw, "max_k")?,
        penalty: required(raw, "penalty")?,
        multiplier,
        restarts: required(raw, "restarts")?,
        max_iters: required(raw, "max_iters")?,
        transfer: required(raw, "transfer")?,
        length: required(raw, "length")?,
        warm_start,
        states: required(raw, "states")?,
        order: required(raw, "order")?,
        hidden: required(raw, "hidden")?,
        iterations: required(raw, "iterations")?,
        next_label: typed(raw, "next_label")?,
        method: required(raw, "method")?,
    })
}

impl RunConfig {
    /// Checks that the files the command reads exist.
    pub fn validate(&self) -> Result<()> {
        let needs_input = self.command != Command::HmmSim;
        if needs_input {
            let input = self
                .input
                .as_ref()
                .ok_or_else(|| Error::Config(format!("command `{}` needs key `input`", self.command)))?;
            if !input.exists() {
                return Err(Error::Config(format!("input file {} does not exist", input.display())));
            }
        }
        if self.command == Command::HmmSim {
            let model = self
                .model
                .as_ref()
                .ok_or_else(|| Error::Config("command `hmm-sim` needs key `model`".into()))?;
            if !model.exists() {
                return Err(Error::Config(format!("model file {} does not exist", model.display())));
            }
        }
        if self.command == Command::Forecast && self.next_label.is_none() {
            return Err(Error::Config("command `forecast` needs key `next_label`".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, one `key = value` line each.
    pub fn to_text(&self) -> String {
        let opt_path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values: Vec<(&str, String)> = vec![
            ("command", self.command.to_string()),
            ("input", opt_path(&self.input)),
            ("model", opt_path(&self.model)),
            ("output", self.output.display().to_string()),
            ("seed", self.seed.to_string()),
            ("lattice", self.lattice.to_string()),
            (
                "metric",
                match self.lattice.metric() {
                    LatticeMetric::Euclidean => "euclidean".into(),
                    LatticeMetric::Manhattan => "manhattan".into(),
                },
            ),
            (
                "neighborhood",
                match self.schedule.kind() {
                    NeighborhoodKind::Gaussian => "gaussian".into(),
                    NeighborhoodKind::Window => "window".into(),
                },
            ),
            ("radius", self.schedule.initial_radius().to_string()),
            ("final_radius", self.schedule.final_radius().to_string()),
            ("sweeps", self.schedule.sweeps().to_string()),
            ("svg", self.svg.to_string()),
            ("dissimilarity", self.dissimilarity.to_string()),
            ("q", self.q.to_string()),
            ("kernel", self.kernel.to_string()),
            ("encoding", self.encoding.to_string()),
            ("window", self.window.to_string()),
            ("max_k", self.max_k.to_string()),
            ("penalty", self.penalty.name().to_string()),
            ("multiplier", self.multiplier.to_string()),
            ("restarts", self.restarts.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("transfer", self.transfer.to_string()),
            ("length", self.length.to_string()),
            (
                "warm_start",
                self.warm_start
                    .as_ref()
                    .map(|w| w.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
                    .unwrap_or_default(),
            ),
            ("states", self.states.to_string()),
            ("order", self.order.to_string()),
            ("hidden", self.hidden.to_string()),
            ("iterations", self.iterations.to_string()),
            ("next_label", self.next_label.clone().unwrap_or_default()),
            ("method", self.method.to_string()),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::from("# resolved configuration\n");
        for (k, v) in values {
            if v.is_empty() {
                out.push_str(&format!("{k} =\n"));
            } else {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_on_empty_file() {
        let c = parse_config("", &["command=som-train".into(), "input=data.csv".into(), "lattice=string:4".into()]).unwrap();
        assert_eq!(c.command, Command::SomTrain);
        assert_eq!(c.lattice.neuron_count(), 4);
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn overrides_win() {
        let c = parse_config("command = som-train\nseed = 3\n# comment\n", &["seed=9".into()]).unwrap();
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("command = som-train\nradiuss = 2\n", &[]).unwrap_err();
        assert!(err.to_string().contains("radiuss"), "{err}");
        let err = parse_config("command = som-train", &["radiuss=2".into()]).unwrap_err();
        assert!(err.to_string().contains("radiuss"));
    }

    #[test]
    fn type_mismatch_names_expected_type() {
        let err = parse_config("command = som-train\nsweeps = many\n", &[]).unwrap_err().to_string();
        assert!(err.contains("sweeps") && err.contains("unsigned integer"), "{err}");
        let err = parse_config("command = explode\n", &[]).unwrap_err().to_string();
        assert!(err.contains("command"));
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config(
            "command = forecast\ninput = a.csv\nnext_label = mon\nmethod = ar:2\nwarm_start = 0.5,1\nkernel = heat:0.3\n",
            &[],
        )
        .unwrap();
        let text = c.to_text();
        let again = parse_config(&text, &[]).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), text);
    }

    #[test]
    fn default_schedule_follows_lattice() {
        let c = parse_config("command = som-train\nlattice = grid:5x5\n", &[]).unwrap();
        let d = NeighborhoodSchedule::default_for(&c.lattice);
        assert_eq!(c.schedule, d);
    }
}
