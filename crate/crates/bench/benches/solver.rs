use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use translab_core::elliptic::{self, SolveOptions};
use translab_core::fem::{assemble, Grid};
use translab_core::oracle::ScalarOracle;

fn bench_assembly(c: &mut Criterion) {
    let problem = ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 }.problem().unwrap();
    let mut group = c.benchmark_group("assemble");
    for cells in [32usize, 64, 128] {
        let grid = Grid::new(2, cells).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(cells), &grid, |b, grid| {
            b.iter(|| assemble(&problem, grid).unwrap())
        });
    }
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let problem = ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 }.problem().unwrap();
    let opts = SolveOptions { tol: 1e-10, max_iter: 50_000 };
    let mut group = c.benchmark_group("solve_transmission");
    group.sample_size(10);
    for cells in [32usize, 64] {
        let grid = Grid::new(2, cells).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(cells), &grid, |b, grid| {
            b.iter(|| elliptic::solve_transmission(&problem, grid, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_assembly, bench_solve);
criterion_main!(benches);
