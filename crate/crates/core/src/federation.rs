//! In-process federated training: IID partitioning, proximal local SGD on
//! each client, and server-side mean aggregation.
//!
//! Communication is simulated by encoding parameter vectors into the
//! checkpoint byte format and decoding them on the other side; the wall-clock
//! time of those transfers plus aggregation is what each [`RoundLog`] records.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::accuracy;
use crate::nn::{batch_gradient, read_checkpoint, write_checkpoint, Classifier, ModelError, ParamVector};

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("invalid federation config: {0}")]
    InvalidConfig(String),
    #[error("cannot split {samples} samples across {clients} clients")]
    NotEnoughSamples { samples: usize, clients: usize },
    #[error("non-finite loss on client {client} in round {round}")]
    NonFiniteLoss { client: usize, round: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ModelKind {
    #[default]
    Gcn,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Aggregation {
    /// `(1/K) sum_k w_k`.
    #[default]
    Mean,
    /// `sum_k (N_k / N) w_k`.
    SampleWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TrafficDirection {
    /// Downloads and uploads: `2 K |w|` per round.
    #[default]
    Both,
    UploadOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub num_clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Proximal coefficient; `0` is plain FedAvg-style local SGD.
    pub mu: f64,
    pub seed: u64,
    pub model: ModelKind,
    pub hidden: usize,
    pub aggregation: Aggregation,
    pub traffic: TrafficDirection,
    /// Train clients concurrently. Results are identical to serial mode.
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            num_clients: 5,
            rounds: 20,
            local_epochs: 1,
            batch_size: 1,
            lr: 0.05,
            mu: 0.01,
            seed: 0,
            model: ModelKind::Gcn,
            hidden: 64,
            aggregation: Aggregation::Mean,
            traffic: TrafficDirection::Both,
            parallel: false,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<(), FederationError> {
        let bad = |msg: String| Err(FederationError::InvalidConfig(msg));
        if self.num_clients == 0 {
            return bad("num_clients must be >= 1".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be >= 1".into());
        }
        if self.local_epochs == 0 {
            return bad("local_epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be >= 0, got {}", self.mu));
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1".into());
        }
        Ok(())
    }
}

/// One client's private shard and its latest local parameters.
#[derive(Debug, Clone)]
pub struct ClientState<I> {
    pub id: usize,
    pub shard: Vec<(I, usize)>,
    pub params: Option<ParamVector>,
}

impl<I> ClientState<I> {
    pub fn sample_count(&self) -> usize {
        self.shard.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub seconds: f64,
    pub params_transferred: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub params: ParamVector,
    pub logs: Vec<RoundLog>,
}

/// Deterministic RNG for client `client` in round `round`.
pub fn client_rng(seed: u64, client: usize, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + (((client as u64) << 32) | round as u64));
    rng
}

/// Shuffle-then-split IID partition. Shard sizes differ by at most one and
/// each shard keeps the original relative order of its samples.
pub fn partition<T: Clone>(items: &[T], num_clients: usize, seed: u64) -> Result<Vec<Vec<T>>, FederationError> {
    if num_clients == 0 || items.len() < num_clients {
        return Err(FederationError::NotEnoughSamples {
            samples: items.len(),
            clients: num_clients,
        });
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = items.len() / num_clients;
    let extra = items.len() % num_clients;
    let mut shards = Vec::with_capacity(num_clients);
    let mut start = 0;
    for k in 0..num_clients {
        let size = base + usize::from(k < extra);
        let mut chunk = idx[start..start + size].to_vec();
        chunk.sort_unstable();
        shards.push(chunk.into_iter().map(|i| items[i].clone()).collect());
        start += size;
    }
    Ok(shards)
}

/// Local epochs of mini-batch SGD on `F_k(w) + (mu/2) ||w - w_global||^2`.
pub fn local_train<M: Classifier>(
    model: &M,
    shard: &[(M::Input, usize)],
    global: &ParamVector,
    config: &FederationConfig,
    client: usize,
    round: usize,
) -> Result<ParamVector, FederationError> {
    if shard.is_empty() {
        return Err(FederationError::InvalidConfig(format!(
            "client {client} has an empty shard"
        )));
    }
    let mut rng = client_rng(config.seed, client, round);
    let mut w = global.clone();
    let mut order: Vec<usize> = (0..shard.len()).collect();
    for _ in 0..config.local_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (loss, mut grad) = batch_gradient(model, &w, batch.iter().map(|&i| (&shard[i].0, shard[i].1)))?;
            if !loss.is_finite() {
                return Err(FederationError::NonFiniteLoss { client, round });
            }
            for ((g, wi), wt) in grad.values_mut().iter_mut().zip(w.values()).zip(global.values()) {
                *g += config.mu * (wi - wt);
            }
            w.axpy(-config.lr, &grad)?;
        }
    }
    Ok(w)
}

/// Element-wise arithmetic mean, computed as `w_0 + (1/K) sum_k (w_k - w_0)`
/// so that identical inputs come back bit-for-bit.
pub fn aggregate(client_params: &[ParamVector]) -> Result<ParamVector, FederationError> {
    let k = client_params.len();
    weighted_mean(client_params, &vec![1.0 / k as f64; k])
}

/// `sum_k (N_k / N) w_k`.
pub fn aggregate_weighted(
    client_params: &[ParamVector],
    sample_counts: &[usize],
) -> Result<ParamVector, FederationError> {
    let total: usize = sample_counts.iter().sum();
    if sample_counts.len() != client_params.len() || total == 0 {
        return Err(FederationError::InvalidConfig(
            "sample counts must match clients and be nonzero".into(),
        ));
    }
    let weights: Vec<f64> = sample_counts.iter().map(|&n| n as f64 / total as f64).collect();
    weighted_mean(client_params, &weights)
}

fn weighted_mean(params: &[ParamVector], weights: &[f64]) -> Result<ParamVector, FederationError> {
    let first = params
        .first()
        .ok_or_else(|| FederationError::InvalidConfig("nothing to aggregate".into()))?;
    if params.iter().any(|p| p.layout() != first.layout()) {
        return Err(ModelError::LayoutMismatch.into());
    }
    let mut delta = vec![0.0; first.len()];
    for (p, &wk) in params.iter().zip(weights).skip(1) {
        for ((d, a), b) in delta.iter_mut().zip(p.values()).zip(first.values()) {
            *d += wk * (a - b);
        }
    }
    let mut out = first.clone();
    for (o, d) in out.values_mut().iter_mut().zip(delta) {
        if d != 0.0 {
            *o += d;
        }
    }
    Ok(out)
}

fn transfer(params: &ParamVector) -> Result<ParamVector, FederationError> {
    Ok(read_checkpoint(&write_checkpoint(params))?)
}

/// Centralized mini-batch SGD with the same sample-order stream as client 0
/// in round 0; the reference a one-client, zero-`mu` federation must match.
pub fn train_centralized<M: Classifier>(
    model: &M,
    data: &[(M::Input, usize)],
    init: &ParamVector,
    config: &FederationConfig,
) -> Result<ParamVector, FederationError> {
    let mut rng = client_rng(config.seed, 0, 0);
    let mut w = init.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..config.local_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (_, grad) = batch_gradient(model, &w, batch.iter().map(|&i| (&data[i].0, data[i].1)))?;
            w.axpy(-config.lr, &grad)?;
        }
    }
    Ok(w)
}

pub fn initial_params<M: Classifier>(model: &M, config: &FederationConfig) -> ParamVector {
    ParamVector::glorot(model.layout().clone(), config.seed)
}

/// Runs `rounds` of broadcast, local training, upload, and aggregation.
pub fn run_federation<M: Classifier>(
    model: &M,
    shards: Vec<Vec<(M::Input, usize)>>,
    test: &[(M::Input, usize)],
    config: &FederationConfig,
) -> Result<FederationOutcome, FederationError>
where
    M::Input: Send,
{
    config.validate()?;
    if shards.len() != config.num_clients {
        return Err(FederationError::InvalidConfig(format!(
            "{} shards for {} clients",
            shards.len(),
            config.num_clients
        )));
    }
    if test.is_empty() {
        return Err(FederationError::InvalidConfig("empty test set".into()));
    }
    let mut clients: Vec<ClientState<M::Input>> = shards
        .into_iter()
        .enumerate()
        .map(|(id, shard)| ClientState {
            id,
            shard,
            params: None,
        })
        .collect();
    let counts: Vec<usize> = clients.iter().map(ClientState::sample_count).collect();
    let mut global = initial_params(model, config);
    let size = global.len() as u64;
    let k = clients.len() as u64;
    let mut logs = Vec::with_capacity(config.rounds);

    for round in 0..config.rounds {
        let mut comm = 0.0;

        let t = Instant::now();
        let received: Vec<ParamVector> = clients.iter().map(|_| transfer(&global)).collect::<Result<_, _>>()?;
        comm += t.elapsed().as_secs_f64();

        let train = |(client, w0): (&mut ClientState<M::Input>, ParamVector)| -> Result<(), FederationError> {
            client.params = Some(local_train(model, &client.shard, &w0, config, client.id, round)?);
            Ok(())
        };
        if config.parallel {
            clients.par_iter_mut().zip(received).try_for_each(train)?;
        } else {
            clients.iter_mut().zip(received).try_for_each(train)?;
        }

        let t = Instant::now();
        let uploaded: Vec<ParamVector> = clients
            .iter()
            .map(|c| transfer(c.params.as_ref().expect("trained this round")))
            .collect::<Result<_, _>>()?;
        global = match config.aggregation {
            Aggregation::Mean => aggregate(&uploaded)?,
            Aggregation::SampleWeighted => aggregate_weighted(&uploaded, &counts)?,
        };
        comm += t.elapsed().as_secs_f64();

        let transferred = match config.traffic {
            TrafficDirection::Both => 2 * k * size,
            TrafficDirection::UploadOnly => k * size,
        };
        logs.push(RoundLog {
            round,
            seconds: comm,
            params_transferred: transferred,
            accuracy: accuracy(model, &global, test)?,
        });
    }
    Ok(FederationOutcome { params: global, logs })
}

pub fn write_round_logs(logs: &[RoundLog], out: impl Write) -> Result<(), FederationError> {
    let mut w = csv::Writer::from_writer(out);
    for log in logs {
        w.serialize(log)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_round_logs(path: impl AsRef<Path>) -> Result<Vec<RoundLog>, FederationError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
