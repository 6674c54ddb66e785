mod common;

use common::random_graph;
use grbfl::data::{blobs_dataset, Image};
use grbfl::federation::{
    aggregate, aggregate_weighted, initial_params, local_train, partition, run_federation, train_centralized,
    FederationConfig, ModelKind,
};
use grbfl::nn::{Classifier, GcnModel, MlpModel, ParamVector, PreparedGraph};
use proptest::prelude::*;

fn blobs(n: usize, seed: u64) -> Vec<(Image, usize)> {
    let ds = blobs_dataset(n, 8, 3, seed).unwrap();
    ds.iter().map(|(i, l)| (i.clone(), l)).collect()
}

fn graphs(n: usize) -> Vec<(PreparedGraph, usize)> {
    (0..n as u64)
        .map(|s| {
            (
                PreparedGraph::new(&random_graph(s, 2 + s as usize % 5, 0.4, 0)),
                s as usize % 3,
            )
        })
        .collect()
}

#[test]
fn one_client_without_prox_is_centralized_sgd() {
    let model = GcnModel::new(8, 3);
    let data = graphs(30);
    for (epochs, batch) in [(1, 1), (3, 1), (2, 4)] {
        let cfg = FederationConfig {
            num_clients: 1,
            rounds: 1,
            local_epochs: epochs,
            batch_size: batch,
            mu: 0.0,
            seed: 11,
            ..Default::default()
        };
        let init = initial_params(&model, &cfg);
        let central = train_centralized(&model, &data, &init, &cfg).unwrap();
        let shards = partition(&data, 1, cfg.seed).unwrap();
        let fed = run_federation(&model, shards, &data[..5], &cfg).unwrap();
        let bits = |p: &ParamVector| p.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&fed.params), bits(&central));
    }
}

#[test]
fn huge_mu_pins_local_params_to_global() {
    let model = MlpModel::new(64, 8, 3);
    let shard = blobs(40, 1);
    let global = ParamVector::glorot(model.layout().clone(), 2);
    let run = |mu: f64| {
        let cfg = FederationConfig {
            mu,
            lr: 1e-7,
            local_epochs: 3,
            ..Default::default()
        };
        local_train(&model, &shard, &global, &cfg, 0, 0)
            .unwrap()
            .distance(&global)
    };
    let (free, pinned) = (run(0.0), run(1e6));
    assert!(free > 0.0);
    assert!(pinned < 0.2 * free, "mu=1e6 moved {pinned}, mu=0 moved {free}");
}

#[test]
fn serial_and_parallel_runs_agree_and_repeat() {
    let model = MlpModel::new(64, 8, 3);
    let train = blobs(60, 3);
    let test = blobs(20, 4);
    let cfg = FederationConfig {
        model: ModelKind::Mlp,
        num_clients: 3,
        rounds: 3,
        seed: 5,
        ..Default::default()
    };
    let serial = run_federation(&model, partition(&train, 3, 5).unwrap(), &test, &cfg).unwrap();
    let again = run_federation(&model, partition(&train, 3, 5).unwrap(), &test, &cfg).unwrap();
    let par_cfg = FederationConfig { parallel: true, ..cfg };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let parallel = pool.install(|| run_federation(&model, partition(&train, 3, 5).unwrap(), &test, &par_cfg).unwrap());
    assert_eq!(serial.params, again.params);
    assert_eq!(serial.params, parallel.params);
    let accs = |o: &grbfl::federation::FederationOutcome| o.logs.iter().map(|l| l.accuracy).collect::<Vec<_>>();
    assert_eq!(accs(&serial), accs(&parallel));
    let size = model.layout().total_len() as u64;
    assert!(serial.logs.iter().all(|l| l.params_transferred == 2 * 3 * size));
}

#[test]
fn federated_mlp_learns_separable_blobs() {
    let model = MlpModel::new(64, 16, 3);
    let train = blobs(150, 6);
    let test = blobs(60, 7);
    let cfg = FederationConfig {
        model: ModelKind::Mlp,
        num_clients: 3,
        rounds: 10,
        lr: 0.1,
        ..Default::default()
    };
    let out = run_federation(&model, partition(&train, 3, 0).unwrap(), &test, &cfg).unwrap();
    let last = out.logs.last().unwrap().accuracy;
    assert!(last > 0.9, "accuracy {last}");
}

proptest! {
    #[test]
    fn aggregating_copies_is_identity(values in prop::collection::vec(-1e3f64..1e3, 20), k in 1usize..9) {
        let model = GcnModel::new(1, 2);
        let layout = model.layout().clone();
        let mut vals = values.clone();
        vals.truncate(layout.total_len());
        vals.resize(layout.total_len(), -0.0);
        let p = ParamVector::from_values(layout, vals).unwrap();
        let copies = vec![p.clone(); k];
        let bits = |q: &ParamVector| q.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&aggregate(&copies).unwrap()), bits(&p));
        prop_assert_eq!(bits(&aggregate_weighted(&copies, &vec![3; k]).unwrap()), bits(&p));
    }

    #[test]
    fn aggregate_stays_within_client_range(seeds in prop::collection::vec(0u64..1000, 1..6)) {
        let model = GcnModel::new(4, 3);
        let ps: Vec<ParamVector> = seeds.iter().map(|&s| ParamVector::glorot(model.layout().clone(), s)).collect();
        let agg = aggregate(&ps).unwrap();
        for (i, v) in agg.values().iter().enumerate() {
            let lo = ps.iter().map(|p| p.values()[i]).fold(f64::INFINITY, f64::min);
            let hi = ps.iter().map(|p| p.values()[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn partition_is_a_balanced_split(n in 1usize..200, k in 1usize..12, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let items: Vec<usize> = (0..n).collect();
        let shards = partition(&items, k, seed).unwrap();
        let sizes: Vec<usize> = shards.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all = shards.concat();
        all.sort_unstable();
        prop_assert_eq!(all, items);
    }
}
