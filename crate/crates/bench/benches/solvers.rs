use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nehari_core::analysis::SweepOptions;
use nehari_core::linalg::{CMat, C64};
use nehari_core::realization::rescale_to_radius;
use nehari_core::{
    check_conditions, convergence_sweep, gramians, solve_full_nehari, solve_restricted, GramianPair, HankelReport,
    Realization,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// A minimal scalar instance with spectral radius 0.8 satisfying the uniqueness condition.
fn instance(n: usize, seed: u64) -> (Realization, GramianPair, HankelReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = rescale_to_radius(&random_matrix(&mut rng, n, n), 0.8);
        let r = Realization::new(a, random_matrix(&mut rng, n, 1), random_matrix(&mut rng, 1, n)).unwrap();
        let Ok(gp) = gramians(&r) else { continue };
        if !gp.is_minimal() {
            continue;
        }
        let rep = check_conditions(&r, &gp, nehari_core::hankel::GAP_RTOL).unwrap();
        if rep.c2_holds {
            return (r, gp, rep);
        }
    }
}

fn benches(c: &mut Criterion) {
    let q_roots = [C64::new(0.5, 0.0)];
    let mut g = c.benchmark_group("solvers");
    for n in [2usize, 4, 8] {
        let (r, gp, rep) = instance(n, 7 + n as u64);
        g.bench_with_input(BenchmarkId::new("gramians", n), &r, |b, r| b.iter(|| gramians(black_box(r))));
        g.bench_with_input(BenchmarkId::new("solve_full", n), &n, |b, _| {
            b.iter(|| solve_full_nehari(black_box(&r), &gp, &rep))
        });
        g.bench_with_input(BenchmarkId::new("solve_restricted_k8", n), &n, |b, _| {
            b.iter(|| solve_restricted(black_box(&r), &gp, &q_roots, 8))
        });
    }
    let (r, gp, rep) = instance(3, 11);
    let opts = SweepOptions { n_grid: 512, ..SweepOptions::default() };
    g.sample_size(10);
    g.bench_function("sweep_k12_n3", |b| {
        b.iter(|| convergence_sweep(black_box(&r), &gp, &rep, &q_roots, 12, opts))
    });
    g.finish();
}

criterion_group!(solver_benches, benches);
criterion_main!(solver_benches);
