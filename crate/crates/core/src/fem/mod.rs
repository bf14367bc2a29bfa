//! Q1 discretization of the weak form on the uniform grid, sparse
//! systems, and the CG front end.

pub mod assemble;
pub mod grid;
pub mod sparse;

pub use assemble::{assemble, assemble_at, assemble_mass};
pub use grid::Grid;
pub use sparse::{pcg, CsrMatrix, PcgStats, DEFAULT_CG_MAX_ITER, DEFAULT_CG_TOL};

use crate::error::{Error, Result};

/// Nodal values of u: grid → R^m, stored component-major
/// (`values[c * node_count + node]`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    grid: Grid,
    m: usize,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        let len = m * grid.node_count();
        DiscreteField { grid, m, values: vec![0.0; len] }
    }

    pub fn from_values(grid: Grid, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * grid.node_count() {
            return Err(Error::Parameter(format!(
                "value vector length {} does not match m * node_count = {}",
                values.len(),
                m * grid.node_count()
            )));
        }
        Ok(DiscreteField { grid, m, values })
    }

    /// Nodal interpolant of a callable.
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(grid: Grid, m: usize, f: F) -> Self {
        let nn = grid.node_count();
        let mut values = vec![0.0; m * nn];
        for node in 0..nn {
            let x = grid.node_point(node);
            let v = f(&x);
            debug_assert_eq!(v.len(), m);
            for (c, vc) in v.iter().enumerate() {
                values[c * nn + node] = *vc;
            }
        }
        DiscreteField { grid, m, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn value(&self, comp: usize, node: usize) -> f64 {
        self.values[comp * self.grid.node_count() + node]
    }

    /// Multilinear interpolation at x ∈ [-1,1]^n.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_with_gradient(x)?.0)
    }

    /// Value and spatial gradient (m×n, row-major `g[c*n + d]`) of the
    /// multilinear interpolant. The gradient is taken on the cell
    /// containing x.
    pub fn eval_with_gradient(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.grid.dim();
        if x.len() != n {
            return Err(Error::Parameter("point dimension mismatch".into()));
        }
        for &xi in x {
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&xi) {
                return Err(Error::Domain(format!("point {x:?} outside [-1,1]^n")));
            }
        }
        let cell_coords = self.grid.cell_containing(x);
        let cell = self.grid.cell_index(&cell_coords);
        let origin = self.grid.cell_origin(cell);
        let h = self.grid.h();
        let local: Vec<f64> = x
            .iter()
            .zip(&origin)
            .map(|(xi, oi)| ((xi - oi) / h).clamp(0.0, 1.0))
            .collect();

        let corners = self.grid.cell_corner_nodes(cell);
        let nn = self.grid.node_count();
        let mut value = vec![0.0; self.m];
        let mut grad = vec![0.0; self.m * n];
        for (a, &node) in corners.iter().enumerate() {
            let mut phi = 1.0;
            for (d, &l) in local.iter().enumerate() {
                phi *= if (a >> d) & 1 == 1 { l } else { 1.0 - l };
            }
            for c in 0..self.m {
                value[c] += phi * self.values[c * nn + node];
            }
            for d in 0..n {
                let mut dphi = if (a >> d) & 1 == 1 { 1.0 } else { -1.0 };
                for (e, &l) in local.iter().enumerate() {
                    if e != d {
                        dphi *= if (a >> e) & 1 == 1 { l } else { 1.0 - l };
                    }
                }
                for c in 0..self.m {
                    grad[c * n + d] += dphi / h * self.values[c * nn + node];
                }
            }
        }
        Ok((value, grad))
    }

    /// Gradient of the multilinear interpolant at a cell center
    /// (m×n, row-major).
    pub fn gradient_at(&self, cell: usize) -> Vec<f64> {
        let n = self.grid.dim();
        let h = self.grid.h();
        let corners = self.grid.cell_corner_nodes(cell);
        let nn = self.grid.node_count();
        let scale = 0.5f64.powi(n as i32 - 1) / h;
        let mut grad = vec![0.0; self.m * n];
        for (a, &node) in corners.iter().enumerate() {
            for d in 0..n {
                let sign = if (a >> d) & 1 == 1 { 1.0 } else { -1.0 };
                for c in 0..self.m {
                    grad[c * n + d] += sign * scale * self.values[c * nn + node];
                }
            }
        }
        grad
    }

    /// Interpolant value at a cell center (= corner average).
    pub fn cell_center_value(&self, cell: usize) -> Vec<f64> {
        let corners = self.grid.cell_corner_nodes(cell);
        let nn = self.grid.node_count();
        let inv = 1.0 / corners.len() as f64;
        (0..self.m)
            .map(|c| corners.iter().map(|&node| self.values[c * nn + node]).sum::<f64>() * inv)
            .collect()
    }

    /// Restrict a field on a finer nested grid to this field's grid.
    pub fn restrict_from(fine: &DiscreteField, coarse_grid: Grid) -> Result<DiscreteField> {
        let ratio = fine.grid.cells_per_side() / coarse_grid.cells_per_side();
        if ratio * coarse_grid.cells_per_side() != fine.grid.cells_per_side() || ratio == 0 {
            return Err(Error::Parameter("grids are not nested".into()));
        }
        let nn_c = coarse_grid.node_count();
        let nn_f = fine.grid.node_count();
        let mut values = vec![0.0; fine.m * nn_c];
        for node in 0..nn_c {
            let coords = coarse_grid.node_coords(node);
            let fine_coords: Vec<usize> = coords.iter().map(|&c| c * ratio).collect();
            let fnode = fine.grid.node_index(&fine_coords);
            for c in 0..fine.m {
                values[c * nn_c + node] = fine.values[c * nn_f + fnode];
            }
        }
        DiscreteField::from_values(coarse_grid, fine.m, values)
    }
}

/// The assembled discrete system: full symmetric matrix, forcing vector,
/// and the Dirichlet mask/values (not yet eliminated).
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<Option<f64>>,
}

impl SparseSystem {
    /// Symmetric elimination of Dirichlet rows/columns.
    pub fn eliminated(&self) -> EliminatedSystem {
        EliminatedSystem::new(&self.matrix, &self.dirichlet)
    }

    /// Eliminate, solve with Jacobi-PCG, and return the full nodal vector
    /// with Dirichlet values reinstated.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<(Vec<f64>, PcgStats)> {
        let elim = self.eliminated();
        let values: Vec<f64> = self.dirichlet.iter().map(|d| d.unwrap_or(0.0)).collect();
        let b = elim.fold_rhs(&self.rhs, &values);
        elim.solve(&b, Some(&values), tol, max_iter)
    }
}

/// Convenience entry point: eliminate Dirichlet rows and run PCG.
pub fn solve_cg(system: &SparseSystem, tol: f64, max_iter: usize) -> Result<(Vec<f64>, PcgStats)> {
    system.solve(tol, max_iter)
}

/// A Dirichlet-eliminated operator, reusable across right-hand sides
/// (the parabolic stepper re-folds a new rhs each step).
#[derive(Debug, Clone)]
pub struct EliminatedSystem {
    pub matrix: CsrMatrix,
    mask: Vec<bool>,
    /// Original entries (free row, dirichlet col, value) removed by the
    /// elimination; needed to fold boundary values into the rhs.
    coupling: Vec<(usize, usize, f64)>,
}

impl EliminatedSystem {
    pub fn new(matrix: &CsrMatrix, dirichlet: &[Option<f64>]) -> Self {
        let ndof = matrix.nrows();
        let mask: Vec<bool> = dirichlet.iter().map(Option::is_some).collect();
        let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(matrix.nnz());
        let mut coupling = Vec::new();
        for r in 0..ndof {
            if mask[r] {
                trips.push((r as u32, r as u32, 1.0));
                continue;
            }
            let (cols, vals) = matrix.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if mask[*c] {
                    coupling.push((r, *c, *v));
                } else {
                    trips.push((r as u32, *c as u32, *v));
                }
            }
        }
        EliminatedSystem { matrix: CsrMatrix::from_triplets(ndof, ndof, trips), mask, coupling }
    }

    /// Fold Dirichlet values into a raw right-hand side: free rows get
    /// `b_i - Σ_j K_ij g_j`, constrained rows are set to g_i.
    pub fn fold_rhs(&self, raw_rhs: &[f64], values: &[f64]) -> Vec<f64> {
        let mut b = raw_rhs.to_vec();
        for &(r, c, v) in &self.coupling {
            b[r] -= v * values[c];
        }
        for (i, &constrained) in self.mask.iter().enumerate() {
            if constrained {
                b[i] = values[i];
            }
        }
        b
    }

    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, PcgStats)> {
        pcg(&self.matrix, b, x0, tol, max_iter)
    }
}
