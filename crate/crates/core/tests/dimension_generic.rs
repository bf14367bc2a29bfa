//! The data model carries general n; these smoke tests drive the
//! 3-dimensional code paths (indexing, assembly, densities, fits) that
//! the 2-d reference runs never touch.

use std::sync::Arc;

use translab_core::elliptic::{self, SolveOptions};
use translab_core::fem::{assemble, DiscreteField, Grid};
use translab_core::problem::{rescaled_density, IndicatorDomain, TransmissionProblem};
use translab_core::regularity::affine_fit;

fn laplace_3d() -> TransmissionProblem {
    TransmissionProblem::scalar_two_phase(
        3,
        1.0,
        1.0,
        IndicatorDomain::empty(),
        Arc::new(|x: &[f64], _| vec![x[0] - 2.0 * x[2]]),
    )
    .unwrap()
}

#[test]
fn trilinear_solve_reproduces_affine_data() {
    let grid = Grid::new(3, 16).unwrap();
    let opts = SolveOptions { tol: 1e-12, max_iter: 50_000 };
    let (u, _) = elliptic::solve_transmission(&laplace_3d(), &grid, &opts).unwrap();
    let mut worst = 0.0f64;
    for node in 0..grid.node_count() {
        let x = grid.node_point(node);
        worst = worst.max((u.value(0, node) - (x[0] - 2.0 * x[2])).abs());
    }
    assert!(worst < 1e-9, "max nodal error {worst}");
}

#[test]
fn interior_stencil_rows_sum_to_zero_3d() {
    let grid = Grid::new(3, 8).unwrap();
    let sys = assemble(&laplace_3d(), &grid).unwrap();
    let node = grid.node_index(&[4, 4, 4]);
    let (cols, vals) = sys.matrix.row(node);
    assert_eq!(cols.len(), 27);
    let sum: f64 = vals.iter().sum();
    assert!(sum.abs() < 1e-12);
    assert!(sys.matrix.is_symmetric());
}

#[test]
fn half_space_density_is_half_the_unit_ball_3d() {
    // |B_1| = 4π/3 in three dimensions
    let d = IndicatorDomain::half_space(vec![0.0, 0.0, 1.0], 0.0).unwrap();
    let v = rescaled_density(&d, &[0.0, 0.0, 0.0], 0.25, 128).unwrap();
    let expected = 2.0 * std::f64::consts::PI / 3.0;
    assert!((v - expected).abs() < 5e-3, "{v} vs {expected}");
}

#[test]
fn affine_fit_in_three_dimensions() {
    let grid = Grid::new(3, 32).unwrap();
    let u = DiscreteField::from_fn(grid, 1, |x| vec![0.5 * x[0] - x[1] + 2.0 * x[2]]);
    let fit = affine_fit(&u, &[0.0, 0.125, 0.0], 0.3).unwrap();
    for (g, e) in fit.gradient.iter().zip([0.5, -1.0, 2.0]) {
        assert!((g - e).abs() < 1e-12, "{g} vs {e}");
    }
    assert!(fit.residual < 1e-16);
}
