use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::CliError;
use crate::attack::{AttackConfig, AttackInit};
use crate::federation::{Aggregation, FederationConfig, ModelKind, TrafficDirection};
use crate::granulation::{AxisOrder, GranulationConfig, PurityMode};
use crate::metrics::MetricConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    /// Constant images, two classes split at level 0.5.
    Uniform,
    /// One Gaussian blob per image whose ring position is the class.
    Blobs,
}

/// Starting point of the reconstruction attacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSetting {
    /// Uniform pixels for the pixel attack, 0.5 for graph value features.
    Auto,
    Uniform,
    Constant(f64),
}

/// Every knob of an experiment. Defaults, then a `key = value` file, then
/// command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub train_samples: usize,
    pub test_samples: usize,
    pub synthetic_side: usize,
    pub synthetic_classes: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub granulation: GranulationConfig,
    pub federation: FederationConfig,
    pub attack_samples: usize,
    pub attack_iterations: usize,
    pub attack_history: usize,
    pub attack_step: f64,
    pub attack_init: InitSetting,
    pub metrics: MetricConfig,
    pub bench_sides: Vec<usize>,
    pub bench_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let attack = AttackConfig::default();
        Self {
            dataset: DatasetKind::Mnist,
            train_images: "data/mnist/train-images-idx3-ubyte".into(),
            train_labels: "data/mnist/train-labels-idx1-ubyte".into(),
            test_images: "data/mnist/t10k-images-idx3-ubyte".into(),
            test_labels: "data/mnist/t10k-labels-idx1-ubyte".into(),
            train_samples: 2000,
            test_samples: 500,
            synthetic_side: 28,
            synthetic_classes: 4,
            output_dir: "runs/default".into(),
            seed: 0,
            threads: 1,
            granulation: GranulationConfig::default(),
            federation: FederationConfig::default(),
            attack_samples: 20,
            attack_iterations: attack.iterations,
            attack_history: attack.history,
            attack_step: attack.initial_step,
            attack_init: InitSetting::Auto,
            metrics: MetricConfig::default(),
            bench_sides: crate::bench::DEFAULT_SIDES.to_vec(),
            bench_repeats: 3,
        }
    }
}

pub const KEYS: &[&str] = &[
    "dataset",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "train_samples",
    "test_samples",
    "synthetic_side",
    "synthetic_classes",
    "output_dir",
    "seed",
    "threads",
    "gray_thr",
    "purity_thr",
    "var_thr",
    "purity_mode",
    "axis_order",
    "num_clients",
    "rounds",
    "local_epochs",
    "batch_size",
    "lr",
    "mu",
    "model",
    "hidden",
    "aggregation",
    "traffic",
    "attack_samples",
    "attack_iterations",
    "attack_history",
    "attack_step",
    "attack_init",
    "phi",
    "bench_sides",
    "bench_repeats",
];

/// One-line description of a key, for `--help`.
pub fn describe(key: &str) -> &'static str {
    match key {
        "dataset" => "mnist, cifar10, uniform or blobs",
        "train_images" => "training images (IDX file, or CIFAR-10 batch)",
        "train_labels" => "training labels (IDX file)",
        "test_images" => "test images (IDX file, or CIFAR-10 batch)",
        "test_labels" => "test labels (IDX file)",
        "train_samples" => "training images used",
        "test_samples" => "test images used",
        "synthetic_side" => "side length of synthetic images",
        "synthetic_classes" => "class count of the blobs dataset",
        "output_dir" => "run directory",
        "seed" => "global seed",
        "threads" => "worker threads; 1 is the reproducibility mode",
        "gray_thr" => "gray-difference threshold of the purity count",
        "purity_thr" => "minimum rectangle purity",
        "var_thr" => "maximum rectangle variance",
        "purity_mode" => "one_sided or symmetric",
        "axis_order" => "x_then_y or y_then_x",
        "num_clients" => "number of clients K",
        "rounds" => "communication rounds R",
        "local_epochs" => "local epochs per round",
        "batch_size" => "local mini-batch size",
        "lr" => "local SGD learning rate",
        "mu" => "proximal coefficient (0 = FedAvg)",
        "model" => "gcn or mlp",
        "hidden" => "hidden width",
        "aggregation" => "mean or weighted",
        "traffic" => "both or upload",
        "attack_samples" => "training samples attacked",
        "attack_iterations" => "L-BFGS iterations per attack",
        "attack_history" => "L-BFGS history size",
        "attack_step" => "initial line-search step",
        "attack_init" => "auto, uniform or constant:<v>",
        "phi" => "CE scale factor",
        "bench_sides" => "comma-separated image sides to time",
        "bench_repeats" => "timing repeats per size",
        _ => "",
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for `{key}`")))
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, CliError> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            CliError::Usage(format!(
                "invalid value `{value}` for `{key}` (expected one of {})",
                names.join(", ")
            ))
        })
}

const DATASETS: &[(&str, DatasetKind)] = &[
    ("mnist", DatasetKind::Mnist),
    ("cifar10", DatasetKind::Cifar10),
    ("uniform", DatasetKind::Uniform),
    ("blobs", DatasetKind::Blobs),
];
const PURITY_MODES: &[(&str, PurityMode)] = &[
    ("one_sided", PurityMode::OneSided),
    ("symmetric", PurityMode::Symmetric),
];
const AXIS_ORDERS: &[(&str, AxisOrder)] = &[("x_then_y", AxisOrder::XThenY), ("y_then_x", AxisOrder::YThenX)];
const MODELS: &[(&str, ModelKind)] = &[("gcn", ModelKind::Gcn), ("mlp", ModelKind::Mlp)];
const AGGREGATIONS: &[(&str, Aggregation)] = &[("mean", Aggregation::Mean), ("weighted", Aggregation::SampleWeighted)];
const TRAFFIC: &[(&str, TrafficDirection)] = &[
    ("both", TrafficDirection::Both),
    ("upload", TrafficDirection::UploadOnly),
];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], value: T) -> &'static str {
    options
        .iter()
        .find(|(_, v)| *v == value)
        .map(|(n, _)| *n)
        .expect("every variant is named")
}

impl fmt::Display for InitSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSetting::Auto => write!(f, "auto"),
            InitSetting::Uniform => write!(f, "uniform"),
            InitSetting::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = choice(key, v, DATASETS)?,
            "train_images" => self.train_images = v.into(),
            "train_labels" => self.train_labels = v.into(),
            "test_images" => self.test_images = v.into(),
            "test_labels" => self.test_labels = v.into(),
            "train_samples" => self.train_samples = parse(key, v)?,
            "test_samples" => self.test_samples = parse(key, v)?,
            "synthetic_side" => self.synthetic_side = parse(key, v)?,
            "synthetic_classes" => self.synthetic_classes = parse(key, v)?,
            "output_dir" => self.output_dir = v.into(),
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "gray_thr" => self.granulation.gray_thr = parse(key, v)?,
            "purity_thr" => self.granulation.purity_thr = parse(key, v)?,
            "var_thr" => self.granulation.var_thr = parse(key, v)?,
            "purity_mode" => self.granulation.purity_mode = choice(key, v, PURITY_MODES)?,
            "axis_order" => self.granulation.axis_order = choice(key, v, AXIS_ORDERS)?,
            "num_clients" => self.federation.num_clients = parse(key, v)?,
            "rounds" => self.federation.rounds = parse(key, v)?,
            "local_epochs" => self.federation.local_epochs = parse(key, v)?,
            "batch_size" => self.federation.batch_size = parse(key, v)?,
            "lr" => self.federation.lr = parse(key, v)?,
            "mu" => self.federation.mu = parse(key, v)?,
            "model" => self.federation.model = choice(key, v, MODELS)?,
            "hidden" => self.federation.hidden = parse(key, v)?,
            "aggregation" => self.federation.aggregation = choice(key, v, AGGREGATIONS)?,
            "traffic" => self.federation.traffic = choice(key, v, TRAFFIC)?,
            "attack_samples" => self.attack_samples = parse(key, v)?,
            "attack_iterations" => self.attack_iterations = parse(key, v)?,
            "attack_history" => self.attack_history = parse(key, v)?,
            "attack_step" => self.attack_step = parse(key, v)?,
            "attack_init" => {
                self.attack_init = match v {
                    "auto" => InitSetting::Auto,
                    "uniform" => InitSetting::Uniform,
                    _ => match v.strip_prefix("constant:") {
                        Some(c) => InitSetting::Constant(parse(key, c)?),
                        None => {
                            return Err(CliError::Usage(format!(
                                "invalid value `{v}` for `attack_init` (expected auto, uniform or constant:<v>)"
                            )))
                        }
                    },
                }
            }
            "phi" => self.metrics.phi = parse(key, v)?,
            "bench_sides" => {
                self.bench_sides = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_, _>>()?
            }
            "bench_repeats" => self.bench_repeats = parse(key, v)?,
            _ => return Err(CliError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Current value of every key, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let g = &self.granulation;
        let f = &self.federation;
        let path = |p: &Path| p.display().to_string();
        let values = [
            name_of(DATASETS, self.dataset).to_string(),
            path(&self.train_images),
            path(&self.train_labels),
            path(&self.test_images),
            path(&self.test_labels),
            self.train_samples.to_string(),
            self.test_samples.to_string(),
            self.synthetic_side.to_string(),
            self.synthetic_classes.to_string(),
            path(&self.output_dir),
            self.seed.to_string(),
            self.threads.to_string(),
            g.gray_thr.to_string(),
            g.purity_thr.to_string(),
            g.var_thr.to_string(),
            name_of(PURITY_MODES, g.purity_mode).to_string(),
            name_of(AXIS_ORDERS, g.axis_order).to_string(),
            f.num_clients.to_string(),
            f.rounds.to_string(),
            f.local_epochs.to_string(),
            f.batch_size.to_string(),
            f.lr.to_string(),
            f.mu.to_string(),
            name_of(MODELS, f.model).to_string(),
            f.hidden.to_string(),
            name_of(AGGREGATIONS, f.aggregation).to_string(),
            name_of(TRAFFIC, f.traffic).to_string(),
            self.attack_samples.to_string(),
            self.attack_iterations.to_string(),
            self.attack_history.to_string(),
            self.attack_step.to_string(),
            self.attack_init.to_string(),
            self.metrics.phi.to_string(),
            self.bench_sides
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
            self.bench_repeats.to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: String| CliError::Usage(e);
        self.granulation.validate().map_err(|e| usage(e.to_string()))?;
        self.federation.validate().map_err(|e| usage(e.to_string()))?;
        self.attack_config(false).validate().map_err(|e| usage(e.to_string()))?;
        if self.train_samples == 0 || self.test_samples == 0 {
            return Err(usage("train_samples and test_samples must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(usage("threads must be >= 1".into()));
        }
        if self.synthetic_side == 0 || self.synthetic_classes < 2 {
            return Err(usage("synthetic_side must be >= 1 and synthetic_classes >= 2".into()));
        }
        if !(self.metrics.phi > 0.0) {
            return Err(usage(format!("phi must be > 0, got {}", self.metrics.phi)));
        }
        if self.bench_repeats == 0 {
            return Err(usage("bench_repeats must be >= 1".into()));
        }
        Ok(())
    }

    /// Federation settings with the global seed and thread policy applied.
    pub fn federation_config(&self) -> FederationConfig {
        FederationConfig {
            seed: self.seed,
            parallel: self.threads > 1,
            ..self.federation
        }
    }

    pub fn attack_config(&self, graph: bool) -> AttackConfig {
        let init = match self.attack_init {
            InitSetting::Auto if graph => AttackInit::Constant(0.5),
            InitSetting::Auto | InitSetting::Uniform => AttackInit::Uniform,
            InitSetting::Constant(c) => AttackInit::Constant(c),
        };
        AttackConfig {
            iterations: self.attack_iterations,
            history: self.attack_history,
            initial_step: self.attack_step,
            seed: self.seed,
            init,
        }
    }
}
