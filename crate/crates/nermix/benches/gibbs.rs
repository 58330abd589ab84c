//! Criterion benches for the data-parallel hot paths: multi-chain fits and
//! the replicate grid of a study.
//!
//! With the default `parallel` feature the same workload is timed on the
//! full rayon pool and on a single-thread pool; compile with
//! `--no-default-features` to time the plain sequential fallback instead.
//! Work units are seeded by index, so every configuration produces
//! bit-identical results.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nermix::domain::{
    validate_dataset, AreaFrame, ChainConfig, Dataset, ModelSpec, UnitRecord, ValidateOptions,
    Variant,
};
use nermix::engine;
use nermix::rng::RngStream;
use nermix::simulation::{run_study, ScenarioSpec, StudyConfig};

fn synthetic_fit_input() -> (Dataset, AreaFrame) {
    use rand::Rng;
    use rand_distr::Distribution;
    let mut rng = RngStream::derive(5150, &[1]);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for a in 0..12 {
        let id = format!("area{a:02}");
        let v = normal.sample(&mut rng);
        for _ in 0..4 {
            let x = 1.0 + normal.sample(&mut rng);
            let e = if rng.random_bool(0.1) {
                5.0 * normal.sample(&mut rng)
            } else {
                normal.sample(&mut rng)
            };
            records.push(UnitRecord::new(id.clone(), 1.0 + x + v + e, vec![1.0, x]));
        }
        rows.push((id, 100u64, vec![1.0, 1.0]));
    }
    let frame = AreaFrame::new(rows).unwrap();
    let data = validate_dataset(&records, &frame, &ValidateOptions::default()).unwrap();
    (data, frame)
}

fn fit_workload(data: &Dataset, frame: &AreaFrame) -> f64 {
    let spec = ModelSpec {
        variant: Variant::Gdm,
        chain: ChainConfig {
            n_draws: 1_500,
            burn_in: 500,
            thin: 1,
            n_chains: 4,
            seed: 7,
        },
    };
    let fit = engine::fit(data, frame, &spec).unwrap();
    fit.draws.sigma1_sq[0]
}

fn study_workload() -> f64 {
    let mut scenario = ScenarioSpec::named("iii", 99).unwrap();
    scenario.m = 10;
    scenario.n_pop = 40;
    scenario.replicates = 8;
    let cfg = StudyConfig {
        burn_in: 300,
        n_draws: 600,
        thin: 1,
        n_chains: 1,
    };
    let table = run_study(&scenario, &[Variant::Dg, Variant::Gdm], &cfg).unwrap();
    table.per_area[0].e_mse
}

#[cfg(feature = "parallel")]
fn bench_modes(c: &mut Criterion) {
    let (data, frame) = synthetic_fit_input();
    let full = rayon::ThreadPoolBuilder::new().build().unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();

    let mut group = c.benchmark_group("fit_4_chains");
    group.bench_function("rayon_pool", |b| {
        b.iter(|| full.install(|| black_box(fit_workload(&data, &frame))))
    });
    group.bench_function("single_thread_pool", |b| {
        b.iter(|| single.install(|| black_box(fit_workload(&data, &frame))))
    });
    group.finish();

    let mut group = c.benchmark_group("study_8_replicates");
    group.sample_size(10);
    group.bench_function("rayon_pool", |b| {
        b.iter(|| full.install(|| black_box(study_workload())))
    });
    group.bench_function("single_thread_pool", |b| {
        b.iter(|| single.install(|| black_box(study_workload())))
    });
    group.finish();
}

#[cfg(not(feature = "parallel"))]
fn bench_modes(c: &mut Criterion) {
    let (data, frame) = synthetic_fit_input();
    let mut group = c.benchmark_group("fit_4_chains");
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(fit_workload(&data, &frame)))
    });
    group.finish();

    let mut group = c.benchmark_group("study_8_replicates");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| black_box(study_workload())));
    group.finish();
}

criterion_group!(benches, bench_modes);
criterion_main!(benches);
