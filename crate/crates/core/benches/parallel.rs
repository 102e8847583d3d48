//! Sequential vs rayon scheduling of batch evaluation and of the matmul
//! kernel. Build with `--no-default-features` to time the pure sequential
//! fallback; in that build both variants run the same code.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use distill_core::bench::synthetic_batch;
use distill_core::data::Example;
use distill_core::distill::{StudentConfig, StudentModel};
use distill_core::nn::EmbeddingTable;
use distill_core::par::{self, Exec};
use distill_core::tensor::{Eval, Graph, Tensor};
use distill_core::train::{predict_all, rng_for};

fn student(vocab: usize) -> StudentModel {
    let emb = EmbeddingTable::random(vocab, 64, 0, &mut rng_for(1, 4)).unwrap();
    let cfg = StudentConfig {
        embedding_dim: 64,
        filter_count: 32,
        ..Default::default()
    };
    StudentModel::new(&cfg, emb, 6, &mut rng_for(1, 1)).unwrap()
}

fn examples(vocab: usize, n: usize, len: usize) -> Vec<Example> {
    let b = synthetic_batch(vocab, n, len, &mut rng_for(2, 0));
    (0..n)
        .map(|i| Example {
            id: format!("x:{i}"),
            ids: b.row(i).to_vec(),
            label: 0,
            text: String::new(),
        })
        .collect()
}

fn evaluation(c: &mut Criterion) {
    let model = student(2000);
    let data = examples(2000, 1024, 60);
    let mut g = c.benchmark_group("student_eval_1024x60");
    g.sample_size(20);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(predict_all(&model, &data, 64, 1, exec).unwrap()));
        });
    }
    g.finish();
}

fn matmul(c: &mut Criterion) {
    let r = &mut rng_for(3, 0);
    let a = Arc::new(Tensor::uniform(&[256, 256], -1.0, 1.0, r));
    let w = Arc::new(Tensor::uniform(&[256, 256], -1.0, 1.0, r));
    let run = || {
        let mut g = Eval;
        black_box(g.matmul_nt(&a, &w).unwrap())
    };
    let mut grp = c.benchmark_group("matmul_nt_256");
    grp.bench_function("single_thread", |b| b.iter(|| par::single_threaded(run)));
    grp.bench_function("pool", |b| b.iter(run));
    grp.finish();
}

criterion_group!(benches, evaluation, matmul);
criterion_main!(benches);
