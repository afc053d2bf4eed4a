use criterion::{black_box, criterion_group, criterion_main, Criterion};

use fedpot_bench::bench_dataset;
use fedpot_core::contract::{select_participants, Candidate};
use fedpot_core::federation::aggregate;
use fedpot_core::learner::{init_params, local_train, MlpArchitecture, TrainingConfig};
use fedpot_core::quality::{vdd_quality, ReferenceMode};

fn bench_vdd_quality(c: &mut Criterion) {
    let reference = bench_dataset(8, 5, 100);
    let local = bench_dataset(8, 5, 40);
    c.bench_function("vdd_quality/500ref_200local", |b| {
        b.iter(|| {
            vdd_quality(
                black_box(&local),
                black_box(&reference),
                64,
                ReferenceMode::Pooled,
            )
            .unwrap()
        })
    });
}

fn bench_local_train(c: &mut Criterion) {
    let ds = bench_dataset(8, 5, 60);
    let arch = MlpArchitecture {
        input_dim: 8,
        hidden_sizes: vec![8, 4],
        num_classes: 5,
    };
    let params = init_params(&arch, 7).unwrap();
    let cfg = TrainingConfig {
        epochs: 1,
        batch_size: 32,
        learning_rate: 0.01,
        seed: 11,
    };
    c.bench_function("local_train/300x8_1epoch", |b| {
        b.iter(|| local_train(black_box(&params), black_box(&ds), &cfg).unwrap())
    });
}

fn bench_select(c: &mut Criterion) {
    let candidates: Vec<Candidate> = (0..50)
        .map(|i| Candidate {
            id: i,
            phi: 0.3 + 0.01 * i as f64,
            reward: 1.0 + 0.2 * ((i * 7) % 10) as f64,
            t_total: 0.5 + 0.05 * ((i * 3) % 10) as f64,
        })
        .collect();
    c.bench_function("select_participants/50", |b| {
        b.iter(|| select_participants(black_box(&candidates), 30.0, 1.0).unwrap())
    });
}

fn bench_aggregate(c: &mut Criterion) {
    let arch = MlpArchitecture {
        input_dim: 16,
        hidden_sizes: vec![16, 8],
        num_classes: 5,
    };
    let models: Vec<_> = (0..10).map(|i| init_params(&arch, i).unwrap()).collect();
    let weights = vec![0.1; 10];
    c.bench_function("aggregate/10x16-16-8-5", |b| {
        b.iter(|| aggregate(black_box(&models), black_box(&weights)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_vdd_quality,
    bench_local_train,
    bench_select,
    bench_aggregate
);
criterion_main!(benches);
