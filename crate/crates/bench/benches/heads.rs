use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use driftbench_bench::fixture;
use driftbench_core::{GradientHead, HeadKind, KnnState, MaskMode, Sample, SldaState};

fn gradient_step(c: &mut Criterion) {
    let (train, _) = fixture(50, 512, 16);
    let batch: Vec<Sample> = train.examples()[..32]
        .iter()
        .map(|e| (e.features.as_slice(), e.class()))
        .collect();
    let mut group = c.benchmark_group("gradient_batch_step");
    for kind in HeadKind::ALL {
        for mask in [MaskMode::NoMask, MaskMode::SingleMask] {
            let mut head = GradientHead::new(kind, 50, 512, 0, mask);
            group.bench_function(BenchmarkId::new(kind.name(), mask.name()), |b| {
                b.iter(|| head.train_batch(black_box(&batch), 1e-6, 0.9).unwrap())
            });
        }
    }
    group.finish();
}

fn slda(c: &mut Criterion) {
    let (train, test) = fixture(50, 128, 20);
    let mut state = SldaState::new(50, 128);
    for e in train.examples() {
        state.observe(&e.features, e.class()).unwrap();
    }
    let z = &train.examples()[0];
    c.bench_function("slda_observe_h128", |b| {
        b.iter(|| state.observe(black_box(&z.features), z.class()).unwrap())
    });
    state.refresh().unwrap();
    let q = &test.examples()[0].features;
    c.bench_function("slda_predict_h128", |b| {
        b.iter(|| state.predict(black_box(q)).unwrap())
    });
    c.bench_function("slda_refresh_h128", |b| {
        b.iter(|| black_box(state.compute_weights().unwrap()))
    });
}

fn knn(c: &mut Criterion) {
    let (train, test) = fixture(10, 64, 250);
    let mut state = KnnState::new(5, 64).unwrap();
    for e in train.examples() {
        state.observe(&e.features, e.class()).unwrap();
    }
    let q = &test.examples()[0].features;
    c.bench_function("knn_predict_5000x64", |b| {
        b.iter(|| state.predict(black_box(q)).unwrap())
    });
}

criterion_group!(benches, gradient_step, slda, knn);
criterion_main!(benches);
