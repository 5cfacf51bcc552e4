use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use kinbc_bench::{domain, law, model, solver, steady, weights};
use kinbc_core::stability::eigh_symmetric;
use kinbc_core::{check_admissible, decompose, Parallelism};

fn bench_step(c: &mut Criterion) {
    for n in [50, 100] {
        let (s, state) = solver(n, Parallelism::Sequential);
        c.bench_function(&format!("step {n}x{n}"), |b| {
            b.iter_batched_ref(|| state.clone(), |st| s.step(st).unwrap(), BatchSize::SmallInput)
        });
    }
}

fn bench_linear_algebra(c: &mut Criterion) {
    let m = model();
    let fe = steady(&m);
    // Lambda_0^{1/2} L Lambda_0^{1/2} with Lambda_0 = diag(1 / f_e)
    let fv = fe.values();
    let mut sym = m.onsager_matrix(fv).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            sym[(i, j)] /= (fv[i] * fv[j]).sqrt();
        }
    }
    c.bench_function("eigh_symmetric 4x4", |b| b.iter(|| eigh_symmetric(black_box(&sym)).unwrap()));
    c.bench_function("decompose coplanar", |b| b.iter(|| decompose(black_box(&m), &fe).unwrap()));
}

fn bench_admissibility(c: &mut Criterion) {
    let (m, dom, l, w) = (model(), domain(), law(), weights());
    c.bench_function("check_admissible mixed", |b| {
        b.iter(|| check_admissible(black_box(&l), &m, &dom, &w).unwrap())
    });
}

criterion_group!(benches, bench_step, bench_linear_algebra, bench_admissibility);
criterion_main!(benches);
