use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use translab_core::fem::{DiscreteField, Grid};
use translab_core::oracle::{self, ScalarOracle};
use translab_core::problem::{rescaled_density, IndicatorDomain};
use translab_core::regularity::{affine_fit, analyze_center, AnalysisParams};

fn setup_field(cells: usize) -> DiscreteField {
    let grid = Grid::new(2, cells).unwrap();
    DiscreteField::from_fn(grid, 1, |x| vec![oracle::disk_inclusion(2.0, 0.5, x).unwrap().0])
}

fn bench_affine_fit(c: &mut Criterion) {
    let u = setup_field(128);
    let mut group = c.benchmark_group("affine_fit");
    for r in [0.25f64, 0.125, 0.0625] {
        group.bench_with_input(BenchmarkId::from_parameter(r), &r, |b, &r| {
            b.iter(|| affine_fit(&u, &[0.3, 0.1], r).unwrap())
        });
    }
    group.finish();
}

fn bench_density(c: &mut Criterion) {
    let d = IndicatorDomain::ball(vec![0.0, 0.0], 0.5).unwrap();
    let mut group = c.benchmark_group("rescaled_density");
    for res in [128usize, 512] {
        group.bench_with_input(BenchmarkId::from_parameter(res), &res, |b, &res| {
            b.iter(|| rescaled_density(&d, &[0.1, 0.0], 0.25, res).unwrap())
        });
    }
    group.finish();
}

fn bench_analyze_center(c: &mut Criterion) {
    let problem = ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 }.problem().unwrap();
    let u = setup_field(128);
    let params = AnalysisParams {
        r0: 0.25,
        k_max: 3,
        threshold_m: 10.0,
        density_resolution: 128,
        c_fit: None,
    };
    c.bench_function("analyze_center", |b| {
        b.iter(|| analyze_center(&problem, &u, &[0.4, 0.1], &params).unwrap())
    });
}

criterion_group!(benches, bench_affine_fit, bench_density, bench_analyze_center);
criterion_main!(benches);
