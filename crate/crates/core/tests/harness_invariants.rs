//! Cross-module invariants of the analysis harness, checked against
//! closed-form fields and hand-computed values.

use proptest::prelude::*;

use translab_core::fem::{DiscreteField, Grid};
use translab_core::oracle::{self, ScalarOracle};
use translab_core::problem::{rescaled_density, rescaled_density_within, IndicatorDomain};
use translab_core::regularity::{affine_fit, affine_fit_analytic, bmo_profile};

fn flat_oracle_field(grid: Grid) -> DiscreteField {
    DiscreteField::from_fn(grid, 1, |x| vec![oracle::flat_interface(1.0, 4.0, x).unwrap().0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Projection property: the fit of an affine interpolant returns that
    /// affine map exactly — gradient at any admissible (z, r); the
    /// constant part needs a point-symmetric quadrature, i.e. lattice z
    /// (at generic z it carries the quadrature-centroid offset, which is
    /// checked separately with an O(h) bound in the unit tests).
    #[test]
    fn affine_fit_projection(
        gx in -2.0f64..2.0,
        gy in -2.0f64..2.0,
        c in -1.0f64..1.0,
        zi in -14i32..=14,
        zj in -14i32..=14,
        r in 0.15f64..0.5,
    ) {
        let grid = Grid::new(2, 64).unwrap();
        let h = grid.h();
        let (zx, zy) = (zi as f64 * h, zj as f64 * h);
        prop_assume!((zx * zx + zy * zy).sqrt() + r <= 1.0);
        let u = DiscreteField::from_fn(grid, 1, |x| vec![gx * x[0] + gy * x[1] + c]);
        let fit = affine_fit(&u, &[zx, zy], r).unwrap();
        prop_assert!((fit.gradient[0] - gx).abs() < 1e-12);
        prop_assert!((fit.gradient[1] - gy).abs() < 1e-12);
        prop_assert!(fit.residual < 1e-16);
        let probe = [zx + 0.3 * r, zy - 0.2 * r];
        let expected = gx * probe[0] + gy * probe[1] + c;
        prop_assert!((fit.eval(&probe)[0] - expected).abs() < 1e-10);
    }

    /// Half-space densities are scale-invariant by similarity.
    #[test]
    fn half_space_density_scaling(zx in -0.4f64..0.4, k in 0u32..4) {
        let d = IndicatorDomain::half_space(vec![0.0, 1.0], 0.0).unwrap();
        let r = 0.25 * 0.5f64.powi(k as i32);
        let v = rescaled_density(&d, &[zx, 0.0], r, 256).unwrap();
        prop_assert!((v - std::f64::consts::PI / 2.0).abs() < 1e-3, "{v}");
    }
}

/// Rescaling covariance of the fit (u_r(x) = u(rx)/r): evaluated
/// analytically at corresponding quadrature points, the gradient parts
/// agree to rounding.
#[test]
fn affine_fit_rescaling_covariance() {
    let oracle = ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 };
    let eval_u = |x: &[f64]| {
        let (u, g) = oracle.eval(x).unwrap();
        (vec![u], g)
    };
    let r = 0.3;
    let fit_direct = affine_fit_analytic(eval_u, 2, 1, &[0.0, 0.0], r, 64);

    let eval_u_r = |x: &[f64]| {
        let scaled = [r * x[0], r * x[1]];
        let (u, g) = oracle.eval(&scaled).unwrap();
        // u_r(x) = u(rx)/r, ∇u_r(x) = ∇u(rx)
        (vec![u / r], g)
    };
    let fit_rescaled = affine_fit_analytic(eval_u_r, 2, 1, &[0.0, 0.0], 1.0, 64);

    for d in 0..2 {
        assert!(
            (fit_direct.gradient[d] - fit_rescaled.gradient[d]).abs() < 1e-13,
            "gradient component {d}: {} vs {}",
            fit_direct.gradient[d],
            fit_rescaled.gradient[d]
        );
    }
}

/// Dyadic gradient drift: |∇ℓ_r − ∇ℓ_{r/2}|² ≤ 2^{n+1} (C_r + C_{r/2}),
/// assertable from the report's own columns.
#[test]
fn dyadic_gradient_drift_bound() {
    let grid = Grid::new(2, 256).unwrap();
    let u = DiscreteField::from_fn(grid, 1, |x| {
        vec![oracle::disk_inclusion(2.0, 0.5, x).unwrap().0]
    });
    let bound_factor = 2.0f64.powi(3); // 2^{n+1}, n = 2
    for z in [[0.0, 0.0], [0.5, 0.0], [0.3, 0.2], [0.0, -0.5]] {
        let rep = bmo_profile(&u, &z, 0.25, 4).unwrap();
        for w in rep.rows.windows(2) {
            let (coarse, fine) = (&w[0], &w[1]);
            if !(coarse.resolved && fine.resolved) {
                continue;
            }
            let drift = (coarse.grad_l_norm.unwrap() - fine.grad_l_norm.unwrap()).powi(2);
            let bound = bound_factor * (coarse.bmo_c.unwrap() + fine.bmo_c.unwrap());
            assert!(
                drift <= bound + 1e-12,
                "z={z:?} r={}: drift² {drift} exceeds {bound}",
                coarse.r
            );
        }
    }
}

/// Flat-interface oracle at a center on the interface: the gradient is
/// (0,1) below and (0,1/4) above, so C_r equals the hand-computed jump
/// variance (3/8)²·|B_1| ≈ 9π/64 at every scale (scale-invariant field).
#[test]
fn bmo_constant_matches_flat_interface_jump_variance() {
    // scales kept well above the 4h floor so quadrature error stays ≤ 2%
    let grid = Grid::new(2, 256).unwrap();
    let u = flat_oracle_field(grid);
    let rep = bmo_profile(&u, &[0.0, 0.0], 0.25, 2).unwrap();
    let hand = 9.0 * std::f64::consts::PI / 64.0;
    for row in &rep.rows {
        let c = row.bmo_c.unwrap();
        assert!((c - hand).abs() / hand < 0.02, "r={}: C={c} vs {hand}", row.r);
    }
    // scale-invariance: constants equal across scales
    let c0 = rep.rows[0].bmo_c.unwrap();
    for row in &rep.rows[1..] {
        assert!((row.bmo_c.unwrap() - c0).abs() / c0 < 0.02);
    }
}

/// Away from the interface the disk oracle is smooth: C_r decays with
/// Taylor rate (slope of log C against log r at least 1.5). Evaluated
/// analytically so grid error does not floor the fine scales.
#[test]
fn bmo_decays_on_smooth_fields() {
    let oracle = ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 };
    let eval = |x: &[f64]| {
        let (u, g) = oracle.eval(x).unwrap();
        (vec![u], g)
    };
    let z = [0.72, 0.0];
    let mut cs = Vec::new();
    let mut rs = Vec::new();
    for k in 0..4 {
        let r = 0.2 * 0.5f64.powi(k);
        let fit = affine_fit_analytic(eval, 2, 1, &z, r, 96);
        cs.push(fit.residual);
        rs.push(r);
    }
    let slope = (cs[0].ln() - cs[3].ln()) / (rs[0].ln() - rs[3].ln());
    assert!(slope >= 1.5, "log-C slope {slope}");
}

/// The grid fit of the disk-inclusion interpolant at an interface center
/// agrees with the directly-integrated residual of the closed-form
/// gradient (high-resolution analytic quadrature) to 5%.
#[test]
fn affine_fit_residual_matches_analytic_oracle_at_interface() {
    let oracle = ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 };
    let grid = Grid::new(2, 256).unwrap();
    let u = DiscreteField::from_fn(grid, 1, |x| vec![oracle.eval(x).unwrap().0]);
    let z = [0.5, 0.0];
    let r = 0.25;
    let grid_fit = affine_fit(&u, &z, r).unwrap();

    let eval = |x: &[f64]| {
        let (v, g) = oracle.eval(x).unwrap();
        (vec![v], g)
    };
    let analytic_fit = affine_fit_analytic(eval, 2, 1, &z, r, 512);
    let rel = (grid_fit.residual - analytic_fit.residual).abs() / analytic_fit.residual;
    assert!(
        rel < 0.05,
        "residual {} vs directly integrated {} ({:.1}%)",
        grid_fit.residual,
        analytic_fit.residual,
        100.0 * rel
    );
}

/// Flat-interface oracle norms by hand: sup |∇u| = 1 (lower phase),
/// ‖∇u‖_{L∞(D)} = 1/4, and ‖u‖²_{L²(B_1)} = (1 + 1/16)·∫_{half disk} x₂²
/// = 17π/128.
#[test]
fn lipschitz_ratio_matches_hand_norms_for_flat_oracle() {
    let grid = Grid::new(2, 256).unwrap();
    let u = flat_oracle_field(grid);
    let p = ScalarOracle::FlatInterface { a: 1.0, b: 4.0 }.problem().unwrap();
    let rep = translab_core::regularity::lipschitz_ratio(&p, &u);
    assert!((rep.sup_grad - 1.0).abs() < 1e-10, "sup grad {}", rep.sup_grad);
    assert!((rep.norm_lip_d - 0.25).abs() < 1e-10, "lip_d {}", rep.norm_lip_d);
    let hand_l2 = (17.0 * std::f64::consts::PI / 128.0f64).sqrt();
    assert!((rep.norm_l2 - hand_l2).abs() / hand_l2 < 1e-2, "L2 {} vs {hand_l2}", rep.norm_l2);
    let hand_ratio = 1.0 / (hand_l2 + 0.25);
    assert!((rep.ratio - hand_ratio).abs() / hand_ratio < 1e-2);
}

/// Doubling identity |D_{z,r/2}| = 2^n |D_{z,r} ∩ B_{1/2}| through the
/// density pipeline.
#[test]
fn doubling_identity_midres() {
    let disk = IndicatorDomain::ball(vec![0.1, -0.1], 0.45).unwrap();
    for &(z, r) in &[([0.0, 0.0], 0.25), ([0.2, 0.1], 0.125), ([-0.3, 0.0], 0.25)] {
        let lhs = rescaled_density(&disk, &z, r / 2.0, 1024).unwrap();
        let within = rescaled_density_within(&disk, &z, r, 1024, 0.5).unwrap();
        assert!((lhs - 4.0 * within).abs() < 1e-3, "z={z:?} r={r}");
    }
}

/// The harness is component-generic: a two-component affine field fits
/// exactly with stacked gradients.
#[test]
fn affine_fit_vector_valued() {
    let grid = Grid::new(2, 64).unwrap();
    let u = DiscreteField::from_fn(grid, 2, |x| {
        vec![1.5 * x[0] - 0.5 * x[1], -2.0 * x[0] + 0.25 * x[1] + 1.0]
    });
    let fit = affine_fit(&u, &[0.0, 0.125], 0.3).unwrap();
    let expected = [1.5, -0.5, -2.0, 0.25];
    for (g, e) in fit.gradient.iter().zip(expected) {
        assert!((g - e).abs() < 1e-12, "{g} vs {e}");
    }
    assert!(fit.residual < 1e-16);
}

/// The full strong-form oracle residual suite at one million fixed
/// low-discrepancy points.
#[test]
fn oracle_residual_suite_full() {
    for oracle in [
        ScalarOracle::FlatInterface { a: 1.0, b: 4.0 },
        ScalarOracle::DiskInclusion { k: 2.0, r_disk: 0.5 },
    ] {
        let r = oracle::strong_form_residuals(oracle, 1_000_000).unwrap();
        assert!(
            r.max_strong_residual < oracle::STRONG_RESIDUAL_TOL,
            "{oracle:?}: {}",
            r.max_strong_residual
        );
        assert!(r.max_flux_jump < 1e-10, "{oracle:?}: {}", r.max_flux_jump);
        assert!(r.max_gradient_mismatch < 1e-10, "{oracle:?}: {}", r.max_gradient_mismatch);
    }
}
