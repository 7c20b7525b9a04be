//! Parallel vs sequential throughput of the data-parallel cores: forest
//! fitting, batch density prediction, and the drive bootstrap. The same
//! seeded work runs on a 1-thread pool and on the default pool; outputs are
//! identical by construction, so this measures scheduling alone.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pep_core::dataset::FeatureDataset;
use pep_core::exec::{map_indexed, map_indexed_seq, with_jobs};
use pep_core::forest::{DensityForest, ForestConfig};
use pep_core::gamlss::{
    drive_bootstrap, simulate_records, BootstrapConfig, Family, ShapeParams, SimPlan,
};
use pep_core::rng::stream_rng;
use rand::Rng;

fn synthetic_dataset(n: usize, p: usize, seed: u64) -> FeatureDataset {
    let mut d = FeatureDataset::new((0..p).map(|i| format!("f{i}")).collect());
    let mut rng = stream_rng(seed, 0);
    for i in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let y = row[0] * 8.0 + if row[1] > 0.5 { 5.0 } else { 0.0 } + rng.random::<f64>();
        d.push_row(i as u64, 0, (i % 9) as u8 + 1, &row, y);
    }
    d
}

fn bench_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("map_indexed");
    let work = |i: usize| {
        let mut rng = stream_rng(7, i as u64);
        (0..2_000).map(|_| rng.random::<f64>()).sum::<f64>()
    };
    group.bench_function("sequential", |b| b.iter(|| map_indexed_seq(256, work)));
    group.bench_function("parallel", |b| b.iter(|| map_indexed(256, work)));
    group.finish();
}

fn bench_forest_fit(c: &mut Criterion) {
    let data = synthetic_dataset(1_500, 20, 3);
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let config = ForestConfig {
        n_trees: 64,
        min_node_size: 5,
        mtry: None,
    };
    let mut group = c.benchmark_group("forest_fit");
    group.sample_size(10);
    for jobs in [1usize, 0] {
        let name = if jobs == 1 { "jobs1" } else { "default_pool" };
        group.bench_with_input(BenchmarkId::from_parameter(name), &jobs, |b, &jobs| {
            let jobs = if jobs == 0 { None } else { Some(jobs) };
            b.iter(|| {
                with_jobs(jobs, || {
                    DensityForest::fit(&data, &rows, &config, 42, None).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_density_predict(c: &mut Criterion) {
    let data = synthetic_dataset(1_200, 20, 5);
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let forest = DensityForest::fit(
        &data,
        &rows,
        &ForestConfig {
            n_trees: 256,
            min_node_size: 5,
            mtry: None,
        },
        11,
        None,
    )
    .unwrap();
    let mut group = c.benchmark_group("density_predict_500");
    let predict = |i: usize| forest.predict_density(data.row(i)).unwrap().mean();
    group.bench_function("sequential", |b| b.iter(|| map_indexed_seq(500, predict)));
    group.bench_function("parallel", |b| b.iter(|| map_indexed(500, predict)));
    group.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let plan = SimPlan {
        tackle_counts: vec![12; 20],
        records_per_drive: 5,
        seed: 9,
        family: Family::Normal,
        shape: ShapeParams {
            sigma: 0.5,
            nu: 1.0,
            tau: 10.0,
        },
        ..Default::default()
    };
    let (records, _) = simulate_records(&plan);
    let config = BootstrapConfig {
        replicates: 16,
        seed: 4,
        ..Default::default()
    };
    let mut group = c.benchmark_group("drive_bootstrap_16");
    group.sample_size(10);
    for jobs in [1usize, 0] {
        let name = if jobs == 1 { "jobs1" } else { "default_pool" };
        group.bench_with_input(BenchmarkId::from_parameter(name), &jobs, |b, &jobs| {
            let jobs = if jobs == 0 { None } else { Some(jobs) };
            b.iter(|| {
                with_jobs(jobs, || {
                    drive_bootstrap(&records, Family::Normal, &config).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_map,
    bench_forest_fit,
    bench_density_predict,
    bench_bootstrap
);
criterion_main!(benches);
