use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pa_lab::rng::rng_from_seed;
use pa_lab::{DegreeClassIndex, PaFunction};
use rand::Rng;

/// An index shaped like a grown tree: many leaves, a few hubs.
fn populated(f: &PaFunction, nodes: u32) -> DegreeClassIndex {
    let mut rng = rng_from_seed(1);
    let mut idx = DegreeClassIndex::with_capacity(f.clone(), nodes as usize);
    for v in 0..nodes {
        idx.insert_leaf(v).unwrap();
        if v > 0 {
            let p = idx.sample(rng.random(), rng.random()).unwrap();
            idx.promote(p).unwrap();
        }
    }
    idx
}

fn sample(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample");
    for (id, f) in PaFunction::reference_set() {
        for nodes in [1_000u32, 100_000] {
            let idx = populated(&f, nodes);
            let mut rng = rng_from_seed(2);
            group.bench_with_input(BenchmarkId::new(id.clone(), nodes), &idx, |b, idx| {
                b.iter(|| black_box(idx.sample(rng.random(), rng.random()).unwrap()))
            });
        }
    }
    group.finish();
}

fn insert_and_promote(c: &mut Criterion) {
    let f = PaFunction::reference_power();
    c.bench_function("insert_and_promote/100k", |b| {
        b.iter_batched(
            || populated(&f, 100_000),
            |mut idx| {
                let mut rng = rng_from_seed(3);
                for v in 100_000..101_000u32 {
                    let p = idx.sample(rng.random(), rng.random()).unwrap();
                    idx.insert_leaf(v).unwrap();
                    idx.promote(p).unwrap();
                }
                idx
            },
            criterion::BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, sample, insert_and_promote);
criterion_main!(benches);
