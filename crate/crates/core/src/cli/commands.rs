use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetKind, ExperimentConfig};
use super::CliError;
use crate::attack::{reconstruct_graph_features, reconstruct_pixels, AttackObservation, ReconstructionResult};
use crate::bench::{self, GranulationTiming, GraphBuildTiming};
use crate::data::{self, DataError, Image, LabeledDataset};
use crate::federation::{
    initial_params, partition, read_round_logs, run_federation, write_round_logs, FederationOutcome, ModelKind,
};
use crate::granulation::granulate;
use crate::graph::{build_graph, deserialize_graphs, serialize_graphs, GranularGraph};
use crate::metrics::MetricReport;
use crate::nn::{read_checkpoint, write_checkpoint, Classifier, GcnModel, MlpModel, ParamVector, PreparedGraph};

pub const CONFIG_FILE: &str = "config.txt";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const SP_FILE: &str = "sp.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const GRAPH_DIR: &str = "graphs";
pub const ATTACK_DIR: &str = "attack";

fn load_error(e: DataError) -> CliError {
    match e {
        DataError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Runtime(other.to_string()),
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

/// Snapshot the config into the run directory.
fn start_run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    ensure_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join(CONFIG_FILE), cfg.to_text().as_bytes())
}

pub fn num_classes(cfg: &ExperimentConfig) -> usize {
    match cfg.dataset {
        DatasetKind::Mnist | DatasetKind::Cifar10 => 10,
        DatasetKind::Uniform => 2,
        DatasetKind::Blobs => cfg.synthetic_classes,
    }
}

pub struct Splits {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

pub fn load_splits(cfg: &ExperimentConfig) -> Result<Splits, CliError> {
    let (train, test) = match cfg.dataset {
        DatasetKind::Mnist => (
            data::load_mnist(&cfg.train_images, &cfg.train_labels).map_err(load_error)?,
            data::load_mnist(&cfg.test_images, &cfg.test_labels).map_err(load_error)?,
        ),
        DatasetKind::Cifar10 => (
            data::load_cifar10(&cfg.train_images).map_err(load_error)?,
            data::load_cifar10(&cfg.test_images).map_err(load_error)?,
        ),
        DatasetKind::Uniform => (
            data::uniform_dataset(cfg.train_samples, cfg.synthetic_side, cfg.seed).map_err(runtime)?,
            data::uniform_dataset(cfg.test_samples, cfg.synthetic_side, cfg.seed.wrapping_add(1)).map_err(runtime)?,
        ),
        DatasetKind::Blobs => (
            data::blobs_dataset(cfg.train_samples, cfg.synthetic_side, cfg.synthetic_classes, cfg.seed)
                .map_err(runtime)?,
            data::blobs_dataset(
                cfg.test_samples,
                cfg.synthetic_side,
                cfg.synthetic_classes,
                cfg.seed.wrapping_add(1),
            )
            .map_err(runtime)?,
        ),
    };
    Ok(Splits {
        train: train.take(cfg.train_samples),
        test: test.take(cfg.test_samples),
    })
}

/// Granulate every image, in dataset order.
pub fn graphs_of(dataset: &LabeledDataset, cfg: &ExperimentConfig) -> Result<Vec<GranularGraph>, CliError> {
    dataset
        .images()
        .par_iter()
        .zip(dataset.labels().par_iter())
        .map(|(img, &label)| {
            let rects = granulate(img, &cfg.granulation).map_err(runtime)?;
            build_graph(&rects, img.width(), img.height(), label).map_err(runtime)
        })
        .collect()
}

/// Keys that determine the graph files; a mismatch means they are stale.
fn graph_fingerprint(cfg: &ExperimentConfig) -> String {
    const KEYS: &[&str] = &[
        "dataset",
        "train_images",
        "train_labels",
        "test_images",
        "test_labels",
        "train_samples",
        "test_samples",
        "synthetic_side",
        "synthetic_classes",
        "seed",
        "gray_thr",
        "purity_thr",
        "var_thr",
        "purity_mode",
        "axis_order",
        "num_clients",
    ];
    cfg.entries()
        .into_iter()
        .filter(|(k, _)| KEYS.contains(k))
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

fn shard_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("train_shard_{k}.json"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranulateSummary {
    pub images: usize,
    pub mean_nodes: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub mean_edges: f64,
    /// Nodes per pixel.
    pub compression: f64,
}

impl std::fmt::Display for GranulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} images; nodes mean {:.2} (min {}, max {}); edges mean {:.2}; compression {:.4} nodes/pixel",
            self.images, self.mean_nodes, self.min_nodes, self.max_nodes, self.mean_edges, self.compression
        )
    }
}

#[derive(Serialize)]
struct GraphRow {
    split: &'static str,
    index: usize,
    label: usize,
    nodes: usize,
    edges: usize,
    pixels: usize,
}

pub fn cmd_granulate(cfg: &ExperimentConfig) -> Result<GranulateSummary, CliError> {
    let splits = load_splits(cfg)?;
    start_run(cfg)?;
    let train = graphs_of(&splits.train, cfg)?;
    let test = graphs_of(&splits.test, cfg)?;
    let dir = cfg.output_dir.join(GRAPH_DIR);
    ensure_dir(&dir)?;
    let shards = partition(&train, cfg.federation.num_clients, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    for (k, shard) in shards.iter().enumerate() {
        write_file(&shard_path(&dir, k), &serialize_graphs(shard))?;
    }
    write_file(&dir.join("test.json"), &serialize_graphs(&test))?;
    write_file(&dir.join("fingerprint.txt"), graph_fingerprint(cfg).as_bytes())?;

    let mut w = csv::Writer::from_writer(create(&cfg.output_dir.join("granulation.csv"))?);
    let rows = [("train", &train), ("test", &test)];
    for (split, graphs) in rows {
        for (index, g) in graphs.iter().enumerate() {
            w.serialize(GraphRow {
                split,
                index,
                label: g.label(),
                nodes: g.num_nodes(),
                edges: g.num_edges(),
                pixels: g.source_width() * g.source_height(),
            })
            .map_err(runtime)?;
        }
    }
    w.flush().map_err(runtime)?;

    let all: Vec<&GranularGraph> = train.iter().chain(&test).collect();
    let nodes: Vec<usize> = all.iter().map(|g| g.num_nodes()).collect();
    let pixels: usize = all.iter().map(|g| g.source_width() * g.source_height()).sum();
    let n = all.len() as f64;
    Ok(GranulateSummary {
        images: all.len(),
        mean_nodes: nodes.iter().sum::<usize>() as f64 / n,
        min_nodes: nodes.iter().copied().min().unwrap_or(0),
        max_nodes: nodes.iter().copied().max().unwrap_or(0),
        mean_edges: all.iter().map(|g| g.num_edges()).sum::<usize>() as f64 / n,
        compression: nodes.iter().sum::<usize>() as f64 / pixels as f64,
    })
}

/// Client shards, test graphs, and where they came from.
type GraphData = (Vec<Vec<GranularGraph>>, Vec<GranularGraph>, &'static str);

/// Graph shards and test graphs, from the run's graph files when they match
/// the config and from the raw dataset otherwise.
fn graph_data(cfg: &ExperimentConfig) -> Result<GraphData, CliError> {
    let dir = cfg.output_dir.join(GRAPH_DIR);
    let fresh = fs::read_to_string(dir.join("fingerprint.txt")).is_ok_and(|f| f == graph_fingerprint(cfg));
    if fresh {
        let read = |p: PathBuf| -> Result<Vec<GranularGraph>, CliError> {
            let bytes = fs::read(&p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            deserialize_graphs(&bytes).map_err(runtime)
        };
        let shards = (0..cfg.federation.num_clients)
            .map(|k| read(shard_path(&dir, k)))
            .collect::<Result<_, _>>()?;
        return Ok((shards, read(dir.join("test.json"))?, "graph files"));
    }
    let splits = load_splits(cfg)?;
    let train = graphs_of(&splits.train, cfg)?;
    let test = graphs_of(&splits.test, cfg)?;
    let shards = partition(&train, cfg.federation.num_clients, cfg.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((shards, test, "raw dataset"))
}

fn prepared(graphs: &[GranularGraph]) -> Vec<(PreparedGraph, usize)> {
    graphs.iter().map(|g| (PreparedGraph::new(g), g.label())).collect()
}

fn pairs(ds: &LabeledDataset) -> Vec<(Image, usize)> {
    ds.iter().map(|(img, l)| (img.clone(), l)).collect()
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub outcome: FederationOutcome,
    pub source: &'static str,
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary, CliError> {
    let fed = cfg.federation_config();
    let classes = num_classes(cfg);
    let (outcome, source) = match fed.model {
        ModelKind::Gcn => {
            let (shards, test, source) = graph_data(cfg)?;
            let model = GcnModel::new(fed.hidden, classes);
            let shards = shards.iter().map(|s| prepared(s)).collect();
            (
                run_federation(&model, shards, &prepared(&test), &fed).map_err(runtime)?,
                source,
            )
        }
        ModelKind::Mlp => {
            let splits = load_splits(cfg)?;
            let inputs = splits.train.images().first().map_or(0, Image::len);
            let model = MlpModel::new(inputs, fed.hidden, classes);
            let shards = partition(&pairs(&splits.train), fed.num_clients, cfg.seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let out = run_federation(&model, shards, &pairs(&splits.test), &fed).map_err(runtime)?;
            (out, "raw dataset")
        }
    };
    start_run(cfg)?;
    write_round_logs(&outcome.logs, create(&cfg.output_dir.join(ROUNDS_FILE))?).map_err(runtime)?;
    write_file(
        &cfg.output_dir.join(CHECKPOINT_FILE),
        &write_checkpoint(&outcome.params),
    )?;
    Ok(TrainSummary { outcome, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpRow {
    pub sample: usize,
    pub index: usize,
    pub label: usize,
    pub loss: f64,
    pub mse: f64,
    pub s_p: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct AttackSummary {
    pub rows: Vec<SpRow>,
    pub mean_s_p: f64,
    pub mean_mse: f64,
}

/// Seeded choice of `n` distinct training indices.
pub fn attack_indices(cfg: &ExperimentConfig, available: usize) -> Result<Vec<usize>, CliError> {
    let n = cfg.attack_samples;
    if n == 0 || n > available {
        return Err(CliError::Usage(format!(
            "attack_samples must be in 1..={available}, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(rand::seq::index::sample(&mut rng, available, n).into_vec())
}

fn load_params<M: Classifier>(
    model: &M,
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
) -> Result<ParamVector, CliError> {
    let Some(path) = checkpoint else {
        return Ok(initial_params(model, &cfg.federation_config()));
    };
    let bytes =
        fs::read(path).map_err(|e| CliError::Usage(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let params = read_checkpoint(&bytes).map_err(runtime)?;
    if params.layout() != model.layout() {
        return Err(CliError::Usage(format!(
            "checkpoint {} does not match the configured {:?} model",
            path.display(),
            cfg.federation.model
        )));
    }
    Ok(params)
}

/// Attack `attack_samples` training images with the model in `checkpoint`,
/// or with the seeded initial model when it is `None`.
pub fn cmd_attack(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<AttackSummary, CliError> {
    let splits = load_splits(cfg)?;
    let indices = attack_indices(cfg, splits.train.len())?;
    let classes = num_classes(cfg);
    let hidden = cfg.federation.hidden;
    let images = splits.train.images();
    let labels = splits.train.labels();

    let results: Vec<ReconstructionResult> = match cfg.federation.model {
        ModelKind::Mlp => {
            let model = MlpModel::new(images[0].len(), hidden, classes);
            let params = load_params(&model, cfg, checkpoint)?;
            indices
                .par_iter()
                .enumerate()
                .map(|(i, &idx)| {
                    let obs =
                        AttackObservation::capture(&model, &params, &images[idx], labels[idx]).map_err(runtime)?;
                    let attack = crate::attack::AttackConfig {
                        seed: cfg.seed.wrapping_add(i as u64),
                        ..cfg.attack_config(false)
                    };
                    reconstruct_pixels(&model, &obs, &images[idx], &attack).map_err(runtime)
                })
                .collect::<Result<_, _>>()?
        }
        ModelKind::Gcn => {
            let model = GcnModel::new(hidden, classes);
            let params = load_params(&model, cfg, checkpoint)?;
            indices
                .par_iter()
                .enumerate()
                .map(|(i, &idx)| {
                    let img = &images[idx];
                    let rects = granulate(img, &cfg.granulation).map_err(runtime)?;
                    let graph = build_graph(&rects, img.width(), img.height(), labels[idx]).map_err(runtime)?;
                    let obs = AttackObservation::capture(&model, &params, &PreparedGraph::new(&graph), labels[idx])
                        .map_err(runtime)?;
                    let attack = crate::attack::AttackConfig {
                        seed: cfg.seed.wrapping_add(i as u64),
                        ..cfg.attack_config(true)
                    };
                    reconstruct_graph_features(&model, &obs, &graph, img, &attack).map_err(runtime)
                })
                .collect::<Result<_, _>>()?
        }
    };

    start_run(cfg)?;
    let dir = cfg.output_dir.join(ATTACK_DIR);
    ensure_dir(&dir)?;
    let mut rows = Vec::with_capacity(results.len());
    for (i, (r, &idx)) in results.iter().zip(&indices).enumerate() {
        images[idx]
            .write_pgm(dir.join(format!("sample_{i:03}_true.pgm")))
            .map_err(runtime)?;
        r.image
            .write_pgm(dir.join(format!("sample_{i:03}_recon.pgm")))
            .map_err(runtime)?;
        r.write_trace_csv(create(&dir.join(format!("sample_{i:03}_trace.csv")))?)
            .map_err(runtime)?;
        rows.push(SpRow {
            sample: i,
            index: idx,
            label: labels[idx],
            loss: r.loss,
            mse: r.mse,
            s_p: r.s_p,
            iterations: r.trace.len(),
        });
    }
    let mut w = csv::Writer::from_writer(create(&cfg.output_dir.join(SP_FILE))?);
    for row in &rows {
        w.serialize(row).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    let n = rows.len() as f64;
    Ok(AttackSummary {
        mean_s_p: rows.iter().map(|r| r.s_p).sum::<f64>() / n,
        mean_mse: rows.iter().map(|r| r.mse).sum::<f64>() / n,
        rows,
    })
}

pub fn read_sp_rows(path: &Path) -> Result<Vec<SpRow>, CliError> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    r.deserialize().collect::<Result<_, _>>().map_err(runtime)
}

/// Combine `rounds.csv` and `sp.csv` of a run directory into a report.
pub fn cmd_metrics(cfg: &ExperimentConfig, run_dir: &Path) -> Result<MetricReport, CliError> {
    let rounds_path = run_dir.join(ROUNDS_FILE);
    if !rounds_path.exists() {
        return Err(CliError::Usage(format!("missing {}", rounds_path.display())));
    }
    let logs = read_round_logs(&rounds_path).map_err(runtime)?;
    let sp: Vec<f64> = read_sp_rows(&run_dir.join(SP_FILE))?.iter().map(|r| r.s_p).collect();
    let report = MetricReport::from_runs(&logs, &sp, &cfg.metrics).map_err(runtime)?;
    write_file(&run_dir.join(REPORT_JSON), report.to_json().as_bytes())?;
    report.write_csv(create(&run_dir.join(REPORT_CSV))?).map_err(runtime)?;
    Ok(report)
}

pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<(Vec<GranulationTiming>, Vec<GraphBuildTiming>), CliError> {
    if cfg.bench_sides.is_empty() {
        return Err(CliError::Usage("bench_sides is empty".into()));
    }
    let timings =
        bench::time_granulation(&cfg.bench_sides, cfg.bench_repeats, &cfg.granulation, cfg.seed).map_err(runtime)?;
    let builds = bench::time_graph_build(&bench::DEFAULT_NODE_COUNTS, cfg.bench_repeats, cfg.seed).map_err(runtime)?;
    start_run(cfg)?;
    bench::write_granulation_csv(&timings, create(&cfg.output_dir.join("bench.csv"))?).map_err(runtime)?;
    bench::write_graph_build_csv(&builds, create(&cfg.output_dir.join("bench_graph.csv"))?).map_err(runtime)?;
    Ok((timings, builds))
}
