use criterion::{criterion_group, criterion_main, Criterion};
use pa_lab::theory::{rho, solve_malthusian, SolveOptions};
use pa_lab::PaFunction;

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_malthusian");
    for (id, f) in PaFunction::reference_set() {
        group.bench_function(id, |b| {
            b.iter(|| solve_malthusian(&f, &SolveOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn evaluate(c: &mut Criterion) {
    let f = PaFunction::reference_shifted_root();
    c.bench_function("rho/f3", |b| b.iter(|| rho(&f, 1.0, 1e-12).unwrap()));
}

criterion_group!(benches, solve, evaluate);
criterion_main!(benches);
