use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ptsoliton_bench::{focusing_soliton, grid, initial_state};
use ptsoliton_core::stability::assemble_for_solution;
use ptsoliton_core::{diff_matrix_2, eigenspectrum, Drive, Evolver, SpectralOps};

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_derivative");
    for n in [128, 256, 512] {
        let g = grid(n);
        let ops = SpectralOps::new(&g);
        let field = initial_state(n).fields[0].clone();
        let mut scratch = vec![Default::default(); ops.scratch_len()];
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut buf = field.clone();
            b.iter(|| {
                buf.copy_from_slice(&field);
                ops.derivative_with_scratch(&mut buf, 2, &mut scratch)
                    .unwrap();
            })
        });
    }
    group.finish();
}

fn rk4(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step");
    let drive = Drive::fixed(focusing_soliton().params);
    for n in [128, 256] {
        let g = grid(n);
        let mut evolver = Evolver::new(&g);
        let state = initial_state(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| evolver.rk4_step(&state, 1e-3, &drive).unwrap())
        });
    }
    group.finish();
}

fn assembly(c: &mut Criterion) {
    let g = grid(256);
    c.bench_function("diff_matrix_2/256", |b| b.iter(|| diff_matrix_2(&g)));
    let sol = focusing_soliton();
    c.bench_function("assemble_stability_matrix/256", |b| {
        b.iter(|| assemble_for_solution(&sol, &g).unwrap())
    });
}

fn eigensolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigenspectrum");
    group.sample_size(10);
    let sol = focusing_soliton();
    for n in [64, 128] {
        let mat = assemble_for_solution(&sol, &grid(n)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(4 * n), &n, |b, _| {
            b.iter(|| eigenspectrum(&mat).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spectral, rk4, assembly, eigensolve);
criterion_main!(benches);
