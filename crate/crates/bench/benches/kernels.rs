use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use logcast_bench::fixture;
use logcast_core::dfg::{compare_logs, df_matrix};
use logcast_core::neural::{backward, forward_loss, mean_loss, Dropout, ModelState};
use logcast_core::predict::generate_tokens;
use logcast_core::preprocess::WindowSpec;
use logcast_core::synthetic::Family;

fn forward_backward(c: &mut Criterion) {
    let (_, vocab, pairs) = fixture(Family::Parallel, 2, 80, WindowSpec::new(4, 2).unwrap());
    let pair = &pairs[0];
    let mut group = c.benchmark_group("pair");
    for hidden in [16, 64, 256] {
        let model = ModelState::new(vocab.len(), hidden, 0.0, 1);
        group.bench_with_input(BenchmarkId::new("forward", hidden), &model, |b, m| {
            b.iter(|| forward_loss(m, black_box(pair), Dropout::Off).unwrap().0)
        });
        group.bench_with_input(BenchmarkId::new("forward_backward", hidden), &model, |b, m| {
            b.iter(|| {
                let (_, cache) = forward_loss(m, black_box(pair), Dropout::Off).unwrap();
                backward(m, &cache)
            })
        });
    }
    group.finish();
}

fn epoch_eval(c: &mut Criterion) {
    let (_, vocab, pairs) = fixture(Family::Parallel, 2, 80, WindowSpec::new(4, 2).unwrap());
    let model = ModelState::new(vocab.len(), 64, 0.0, 1);
    c.bench_function("mean_loss_epoch_d64", |b| b.iter(|| mean_loss(&model, black_box(&pairs)).unwrap()));
}

fn generation(c: &mut Criterion) {
    let (_, vocab, pairs) = fixture(Family::LongLoop, 3, 60, WindowSpec::new(6, 3).unwrap());
    let model = ModelState::new(vocab.len(), 64, 0.0, 1);
    c.bench_function("generate_40_tokens_d64", |b| {
        b.iter(|| generate_tokens(&model, black_box(&pairs[0].x), usize::MAX, 40).unwrap())
    });
}

fn dfg_metrics(c: &mut Criterion) {
    let (log, _, _) = fixture(Family::Tri2, 5, 3000, WindowSpec::new(1, 1).unwrap());
    let other = log.slice(1500..3000);
    c.bench_function("df_matrix_3000_traces", |b| b.iter(|| df_matrix(black_box(&log), None).unwrap()));
    c.bench_function("compare_logs_3000_vs_1500", |b| b.iter(|| compare_logs(black_box(&log), &other)));
}

criterion_group!(benches, forward_backward, epoch_eval, generation, dfg_metrics);
criterion_main!(benches);
