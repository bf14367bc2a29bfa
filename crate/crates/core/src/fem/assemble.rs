//! Q1 stiffness and mass assembly.
//!
//! The effective tensor A + (B−A)χ_D is sampled at the 2^n Gauss points
//! of each cell (unfitted interface), forcing F contributes
//! −∫ F_α^i ∂_α φ^i, and Dirichlet data is interpolated on ∂[-1,1]^n.
//! Local matrices are computed on the upper triangle and mirrored, so an
//! (i,α)↔(j,β)-symmetric tensor yields a bitwise-symmetric matrix.

use rayon::prelude::*;

use super::grid::Grid;
use super::sparse::CsrMatrix;
use super::SparseSystem;
use crate::error::{Error, Result};
use crate::problem::TransmissionProblem;

/// Sample count used for the implicit condition check run by `assemble`.
pub const VERIFY_SAMPLES: usize = 64;

/// Tolerance for the (i,α)↔(j,β) tensor symmetry restriction; CG needs a
/// symmetric system, so asymmetric tensors are rejected at assembly.
const PAIR_SYMMETRY_TOL: f64 = 1e-12;

struct GaussRule {
    /// Reference-cell points in [0,1]^n.
    points: Vec<Vec<f64>>,
    /// Weight per point (uniform for the tensor 2-point rule).
    weight: f64,
    /// Shape gradients dphi[g][a][d] on the reference cell.
    dphi: Vec<Vec<Vec<f64>>>,
    /// Shape values phi[g][a].
    phi: Vec<Vec<f64>>,
}

fn gauss_rule(n: usize) -> GaussRule {
    let offset = 0.5 / 3.0f64.sqrt();
    let pts_1d = [0.5 - offset, 0.5 + offset];
    let count = 1usize << n;
    let mut points = Vec::with_capacity(count);
    for mask in 0..count {
        points.push((0..n).map(|d| pts_1d[(mask >> d) & 1]).collect::<Vec<f64>>());
    }
    let corners = 1usize << n;
    let mut dphi = Vec::with_capacity(count);
    let mut phi = Vec::with_capacity(count);
    for p in &points {
        let mut dp = vec![vec![0.0; n]; corners];
        let mut ph = vec![0.0; corners];
        for a in 0..corners {
            let mut v = 1.0;
            for (d, &l) in p.iter().enumerate() {
                v *= if (a >> d) & 1 == 1 { l } else { 1.0 - l };
            }
            ph[a] = v;
            for d in 0..n {
                let mut g = if (a >> d) & 1 == 1 { 1.0 } else { -1.0 };
                for (e, &l) in p.iter().enumerate() {
                    if e != d {
                        g *= if (a >> e) & 1 == 1 { l } else { 1.0 - l };
                    }
                }
                dp[a][d] = g;
            }
        }
        dphi.push(dp);
        phi.push(ph);
    }
    GaussRule { points, weight: 0.5f64.powi(n as i32), dphi, phi }
}

struct CellContribution {
    cell: usize,
    /// Upper-triangle-mirrored local stiffness, (2^n·m)².
    k_local: Vec<f64>,
    /// Local forcing vector, or empty when the problem has no forcing.
    b_local: Vec<f64>,
}

/// Assemble the stiffness system for the elliptic problem (t = 0).
pub fn assemble(problem: &TransmissionProblem, grid: &Grid) -> Result<SparseSystem> {
    assemble_at(problem, grid, 0.0)
}

/// Assemble the stiffness system with the effective tensor, forcing, and
/// boundary data evaluated at time `t`. The problem's structure
/// conditions are verified first; violations reject the assembly.
pub fn assemble_at(problem: &TransmissionProblem, grid: &Grid, t: f64) -> Result<SparseSystem> {
    if grid.dim() != problem.n {
        return Err(Error::Parameter("grid and problem dimensions differ".into()));
    }
    problem.verify_conditions_at(VERIFY_SAMPLES, t)?;

    let n = grid.dim();
    let m = problem.m;
    let rule = gauss_rule(n);
    let corners = 1usize << n;
    let ldof = corners * m;
    let h = grid.h();
    let detj = h.powi(n as i32);
    let grad_scale = 1.0 / h;

    let cells: Vec<usize> = (0..grid.cell_count()).collect();
    let contributions: Result<Vec<CellContribution>> = cells
        .par_iter()
        .map(|&cell| {
            let origin = grid.cell_origin(cell);
            let mut k_local = vec![0.0; ldof * ldof];
            let mut b_local = if problem.forcing.is_some() { vec![0.0; ldof] } else { Vec::new() };
            let mut xg = vec![0.0; n];
            for (g, ref_pt) in rule.points.iter().enumerate() {
                for d in 0..n {
                    xg[d] = origin[d] + h * ref_pt[d];
                }
                let tensor = problem.effective_tensor_at(&xg, t);
                if tensor.pair_asymmetry() > PAIR_SYMMETRY_TOL * (1.0 + tensor.max_abs_entry()) {
                    return Err(Error::NonSymmetric(format!(
                        "tensor is not (i,α)↔(j,β)-symmetric at {xg:?}; CG assembly requires it"
                    )));
                }
                let w = rule.weight * detj;
                let dp = &rule.dphi[g];
                for p in 0..ldof {
                    let (ai, aa) = (p / corners, p % corners);
                    for q in p..ldof {
                        let (bj, bb) = (q / corners, q % corners);
                        let mut acc = 0.0;
                        for al in 0..n {
                            for be in 0..n {
                                acc += dp[aa][al] * tensor.get(ai, bj, al, be) * dp[bb][be];
                            }
                        }
                        k_local[p * ldof + q] += w * grad_scale * grad_scale * acc;
                    }
                }
                if let Some(forcing) = &problem.forcing {
                    let f = forcing(&xg, t);
                    debug_assert_eq!(f.len(), m * n);
                    for p in 0..ldof {
                        let (ai, aa) = (p / corners, p % corners);
                        let mut acc = 0.0;
                        for al in 0..n {
                            acc += f[ai * n + al] * dp[aa][al];
                        }
                        b_local[p] -= w * grad_scale * acc;
                    }
                }
            }
            // mirror the upper triangle
            for p in 0..ldof {
                for q in 0..p {
                    k_local[p * ldof + q] = k_local[q * ldof + p];
                }
            }
            Ok(CellContribution { cell, k_local, b_local })
        })
        .collect();
    let contributions = contributions?;

    let nn = grid.node_count();
    let ndof = m * nn;
    let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(contributions.len() * ldof * ldof);
    let mut rhs = vec![0.0; ndof];
    for contrib in &contributions {
        let corner_nodes = grid.cell_corner_nodes(contrib.cell);
        for p in 0..ldof {
            let (ai, aa) = (p / corners, p % corners);
            let row = ai * nn + corner_nodes[aa];
            if !contrib.b_local.is_empty() {
                rhs[row] += contrib.b_local[p];
            }
            for q in 0..ldof {
                let (bj, bb) = (q / corners, q % corners);
                let col = bj * nn + corner_nodes[bb];
                let v = contrib.k_local[p * ldof + q];
                if v != 0.0 {
                    trips.push((row as u32, col as u32, v));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(ndof, ndof, trips);

    let mut dirichlet = vec![None; ndof];
    for node in 0..nn {
        if grid.is_boundary_node(node) {
            let x = grid.node_point(node);
            let g = (problem.boundary)(&x, t);
            for c in 0..m {
                dirichlet[c * nn + node] = Some(g[c]);
            }
        }
    }

    Ok(SparseSystem { matrix, rhs, dirichlet })
}

/// The forcing vector −∫ F_α^i ∂_α φ^i at time `t` (zero when the
/// problem has no forcing). Lets time steppers refresh a time-varying
/// source without re-assembling the stiffness.
pub fn assemble_forcing(problem: &TransmissionProblem, grid: &Grid, t: f64) -> Vec<f64> {
    let n = grid.dim();
    let m = problem.m;
    let nn = grid.node_count();
    let mut rhs = vec![0.0; m * nn];
    let Some(forcing) = &problem.forcing else {
        return rhs;
    };
    let rule = gauss_rule(n);
    let h = grid.h();
    let detj = h.powi(n as i32);
    let mut xg = vec![0.0; n];
    for cell in 0..grid.cell_count() {
        let origin = grid.cell_origin(cell);
        let nodes = grid.cell_corner_nodes(cell);
        for (g, ref_pt) in rule.points.iter().enumerate() {
            for d in 0..n {
                xg[d] = origin[d] + h * ref_pt[d];
            }
            let f = forcing(&xg, t);
            let w = rule.weight * detj / h;
            for i in 0..m {
                for (a, &node) in nodes.iter().enumerate() {
                    let mut acc = 0.0;
                    for al in 0..n {
                        acc += f[i * n + al] * rule.dphi[g][a][al];
                    }
                    rhs[i * nn + node] -= w * acc;
                }
            }
        }
    }
    rhs
}

/// Component-block-diagonal Q1 mass matrix (exact for the 2-point Gauss
/// rule on multilinear elements).
pub fn assemble_mass(grid: &Grid, m: usize) -> CsrMatrix {
    let n = grid.dim();
    let rule = gauss_rule(n);
    let corners = 1usize << n;
    let h = grid.h();
    let detj = h.powi(n as i32);

    let mut local = vec![0.0; corners * corners];
    for (g, _) in rule.points.iter().enumerate() {
        for a in 0..corners {
            for b in a..corners {
                local[a * corners + b] += rule.weight * detj * rule.phi[g][a] * rule.phi[g][b];
            }
        }
    }
    for a in 0..corners {
        for b in 0..a {
            local[a * corners + b] = local[b * corners + a];
        }
    }

    let nn = grid.node_count();
    let mut trips = Vec::with_capacity(grid.cell_count() * corners * corners * m);
    for cell in 0..grid.cell_count() {
        let nodes = grid.cell_corner_nodes(cell);
        for c in 0..m {
            for a in 0..corners {
                for b in 0..corners {
                    trips.push((
                        (c * nn + nodes[a]) as u32,
                        (c * nn + nodes[b]) as u32,
                        local[a * corners + b],
                    ));
                }
            }
        }
    }
    CsrMatrix::from_triplets(m * nn, m * nn, trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{IndicatorDomain, TransmissionProblem};
    use std::sync::Arc;

    fn laplace_problem() -> TransmissionProblem {
        TransmissionProblem::scalar_two_phase(
            2,
            1.0,
            1.0,
            IndicatorDomain::empty(),
            Arc::new(|_: &[f64], _| vec![0.0]),
        )
        .unwrap()
    }

    #[test]
    fn laplace_interior_stencil() {
        // Constant-coefficient Q1 Laplacian: center 8/3, all eight
        // neighbours −1/3, interior row sums zero.
        let grid = Grid::new(2, 8).unwrap();
        let sys = assemble(&laplace_problem(), &grid).unwrap();
        let node = grid.node_index(&[4, 4]);
        let (cols, vals) = sys.matrix.row(node);
        assert_eq!(cols.len(), 9);
        let mut sum = 0.0;
        for (c, v) in cols.iter().zip(vals) {
            sum += v;
            if *c == node {
                assert!((v - 8.0 / 3.0).abs() < 1e-13, "center {v}");
            } else {
                assert!((v + 1.0 / 3.0).abs() < 1e-13, "neighbour {v}");
            }
        }
        assert!(sum.abs() < 1e-13);
    }

    #[test]
    fn assembled_matrix_is_exactly_symmetric() {
        let grid = Grid::new(2, 16).unwrap();
        let d = IndicatorDomain::ball(vec![0.1, -0.2], 0.4).unwrap();
        let p = TransmissionProblem::scalar_two_phase(
            2,
            1.0,
            4.0,
            d,
            Arc::new(|x: &[f64], _| vec![x[0]]),
        )
        .unwrap();
        let sys = assemble(&p, &grid).unwrap();
        assert!(sys.matrix.is_symmetric());
    }

    #[test]
    fn two_identical_blocks_decouple() {
        // m = 2 with identical scalar blocks: the system must contain two
        // decoupled copies of the scalar system.
        let grid = Grid::new(2, 4).unwrap();
        let scalar = laplace_problem();
        let sys1 = assemble(&scalar, &grid).unwrap();

        let ct = crate::problem::CoefficientTensor::new(
            2,
            2,
            crate::problem::TensorField::Constant(crate::problem::TensorValue::identity_block(2, 2, 1.0)),
            0.5,
            1.0,
            crate::modulus::Modulus::power(1.0, 1.0).unwrap(),
        )
        .unwrap();
        let p2 = TransmissionProblem::new(
            ct.clone(),
            ct,
            IndicatorDomain::empty(),
            Arc::new(|_: &[f64], _| vec![0.0, 0.0]),
        )
        .unwrap();
        let sys2 = assemble(&p2, &grid).unwrap();

        let nn = grid.node_count();
        for r in 0..nn {
            let (c1, v1) = sys1.matrix.row(r);
            let (c2, v2) = sys2.matrix.row(r);
            assert_eq!(c1, c2);
            assert_eq!(v1, v2);
            // second block shifted by nn
            let (c2b, v2b) = sys2.matrix.row(nn + r);
            let shifted: Vec<usize> = c2b.iter().map(|c| c - nn).collect();
            assert_eq!(c1, &shifted[..]);
            assert_eq!(v1, v2b);
        }
    }

    #[test]
    fn aligned_interface_rows_match_hand_stencil() {
        // a=1 below, b=4 above a grid-aligned interface at x2=0. The row of
        // an interface node must equal the per-cell sum of the constant
        // Laplace stencil weighted by that cell's coefficient. Hand
        // assembly of the two-coefficient stencil for the center entry:
        // two below-cells contribute 2·(2/3)·1, two above contribute
        // 2·(2/3)·4.
        let grid = Grid::new(2, 8).unwrap();
        let d = IndicatorDomain::half_space(vec![0.0, 1.0], 0.0).unwrap();
        let p = TransmissionProblem::scalar_two_phase(
            2,
            1.0,
            4.0,
            d,
            Arc::new(|x: &[f64], _| vec![x[1]]),
        )
        .unwrap();
        let sys = assemble(&p, &grid).unwrap();
        let node = grid.node_index(&[4, 4]); // on the interface line
        let (cols, vals) = sys.matrix.row(node);
        let center = cols.iter().zip(vals).find(|(c, _)| **c == node).unwrap().1;
        let expected = 2.0 * (2.0 / 3.0) * 1.0 + 2.0 * (2.0 / 3.0) * 4.0;
        assert!((center - expected).abs() < 1e-12, "{center} vs {expected}");
    }

    #[test]
    fn forcing_enters_rhs_with_divergence_sign() {
        // Constant F has zero divergence: −∫F·∇φ_i vanishes for every
        // interior tent. F = (x1, 0) has div F = 1 and integration by
        // parts gives b_i = −∫ x1 ∂_1 φ_i = +∫ φ_i = h² at interior nodes.
        let grid = Grid::new(2, 8).unwrap();
        let h = grid.h();

        let p0 = laplace_problem().with_forcing(Arc::new(|_: &[f64], _| vec![1.0, 0.0]));
        let sys0 = assemble(&p0, &grid).unwrap();
        let interior = grid.node_index(&[4, 4]);
        assert!(sys0.rhs[interior].abs() < 1e-14);

        let p1 = laplace_problem().with_forcing(Arc::new(|x: &[f64], _| vec![x[0], 0.0]));
        let sys1 = assemble(&p1, &grid).unwrap();
        for coords in [[4usize, 4], [2, 5], [6, 3]] {
            let node = grid.node_index(&coords);
            assert!(
                (sys1.rhs[node] - h * h).abs() < 1e-13,
                "rhs {} vs h² {}",
                sys1.rhs[node],
                h * h
            );
        }
    }

    #[test]
    fn unverified_problem_is_rejected() {
        // Declared lambda too optimistic: entries of B exceed 1/lambda.
        let ta = crate::problem::CoefficientTensor::constant_scalar(2, 1, 1.0, 0.9).unwrap();
        let tb = crate::problem::CoefficientTensor::constant_scalar(2, 1, 4.0, 0.9).unwrap();
        let p = TransmissionProblem::new(
            ta,
            tb,
            IndicatorDomain::half_space(vec![0.0, 1.0], 0.0).unwrap(),
            Arc::new(|_: &[f64], _| vec![0.0]),
        )
        .unwrap();
        let grid = Grid::new(2, 4).unwrap();
        assert!(matches!(assemble(&p, &grid), Err(Error::Conditions(_))));
    }

    #[test]
    fn mass_matrix_row_sums_are_cell_volumes() {
        // Σ_j M_ij = ∫ φ_i: interior node of an h-grid → h².
        let grid = Grid::new(2, 8).unwrap();
        let mass = assemble_mass(&grid, 1);
        let node = grid.node_index(&[3, 5]);
        let (_, vals) = mass.row(node);
        let sum: f64 = vals.iter().sum();
        let h = grid.h();
        assert!((sum - h * h).abs() < 1e-14);
        assert!(mass.is_symmetric());
    }
}
