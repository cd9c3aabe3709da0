//! Compare the rayon data-parallel execution path against the sequential
//! fallback on the three hot loops: batched inference, batched gradients,
//! and one order-update round.
//!
//! Run with `cargo bench -p kronpress-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kronpress_core::codec::ModeLayout;
use kronpress_core::exec::Exec;
use kronpress_core::model::{approximate_batch, FactorModel, KronModel};
use kronpress_core::order::update_order;
use kronpress_core::rmat::{rmat_generate, RmatConfig};
use kronpress_core::rng::{stream_rng, RunStreams, Stream};
use kronpress_core::tensor::{OrderState, OrderedData};
use kronpress_core::train::gradients;

const EXECS: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn fixture() -> (kronpress_core::tensor::SparseArray, KronModel) {
    let data = rmat_generate(&RmatConfig {
        skew: 0.8,
        log_dims: vec![9, 9],
        value_sum: 40_000,
        seed: 42,
    })
    .expect("generator config is valid");
    let layout = ModeLayout::new(data.padded_log_dims());
    let mut rng = stream_rng(7, Stream::ParamInit);
    let model = KronModel::init(layout, 16, 0.0, &mut rng);
    (data, model)
}

fn bench_inference_batch(c: &mut Criterion) {
    let (data, model) = fixture();
    let orders = OrderState::identity(data.padded_log_dims());
    let ordered = OrderedData::new(&data, &orders).unwrap();
    let (codes, _) = ordered.code_batch(model.layout(), 0..data.nnz() as u32);
    let mut group = c.benchmark_group("approximate_batch");
    group.sample_size(10);
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| approximate_batch(&model, &codes, exec));
        });
    }
    group.finish();
}

fn bench_gradient_batch(c: &mut Criterion) {
    let (data, model) = fixture();
    let orders = OrderState::identity(data.padded_log_dims());
    let ordered = OrderedData::new(&data, &orders).unwrap();
    let (codes, values) = ordered.code_batch(model.layout(), 0..data.nnz() as u32);
    let mut group = c.benchmark_group("gradients");
    group.sample_size(10);
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| gradients(&model, &codes.vocab, &values, 1.0, exec));
        });
    }
    group.finish();
}

fn bench_order_update(c: &mut Criterion) {
    let (data, model) = fixture();
    let mut group = c.benchmark_group("update_order");
    group.sample_size(10);
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter_batched(
                || {
                    (
                        OrderState::identity(data.padded_log_dims()),
                        RunStreams::new(3),
                    )
                },
                |(mut orders, mut streams)| {
                    update_order(&model, &data, &mut orders, 0, 10.0, true, &mut streams, exec)
                },
                criterion::BatchSize::SmallInput,
            );
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_inference_batch,
    bench_gradient_batch,
    bench_order_update
);
criterion_main!(benches);
