//! Elliptic solver front end: single solves with run logs and mesh
//! refinement studies.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fem::{assemble, DiscreteField, Grid, DEFAULT_CG_MAX_ITER, DEFAULT_CG_TOL};
use crate::problem::TransmissionProblem;
use crate::regularity::ball_quadrature;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: DEFAULT_CG_TOL, max_iter: DEFAULT_CG_MAX_ITER }
    }
}

/// One structured record per solve.
#[derive(Debug, Clone)]
pub struct SolveLog {
    pub problem_hash: String,
    pub cells_per_side: usize,
    pub iterations: usize,
    pub residual: f64,
    pub wall_seconds: f64,
}

/// Minimum grid resolution accepted by the solver front end.
pub const MIN_SOLVE_RESOLUTION: usize = 16;

/// Galerkin solution of the transmission problem with the problem's
/// boundary data.
pub fn solve_transmission(
    p: &TransmissionProblem,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<(DiscreteField, SolveLog)> {
    if grid.cells_per_side() < MIN_SOLVE_RESOLUTION {
        return Err(Error::Parameter(format!(
            "grid resolution {} below minimum {MIN_SOLVE_RESOLUTION}",
            grid.cells_per_side()
        )));
    }
    let start = Instant::now();
    let system = assemble(p, grid)?;
    let (values, stats) = system.solve(opts.tol, opts.max_iter)?;
    let field = DiscreteField::from_values(*grid, p.m, values)?;
    let log = SolveLog {
        problem_hash: format!("{:016x}", p.fingerprint()),
        cells_per_side: grid.cells_per_side(),
        iterations: stats.iterations,
        residual: stats.relative_residual,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((field, log))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateLabel {
    /// First row of a study: no previous error to compare against.
    First,
    /// Errors at solver tolerance; the ratio is meaningless.
    Exact,
    Observed(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct RefineRow {
    pub cells_per_side: usize,
    pub h: f64,
    pub error: f64,
    pub rate: RateLabel,
}

/// Errors below this are reported as "exact" (solver-tolerance regime).
const EXACT_ERROR_FLOOR: f64 = 1e-11;

/// Relative L²(B_1) error of the discrete solution against a reference
/// callable, by in-ball weighted cell-center quadrature.
pub fn l2_relative_error<F: Fn(&[f64]) -> Vec<f64>>(u: &DiscreteField, reference: F) -> f64 {
    let grid = u.grid();
    let origin = vec![0.0; grid.dim()];
    let quad = ball_quadrature(grid, &origin, 1.0);
    let mut err = 0.0;
    let mut norm = 0.0;
    for &(cell, w) in &quad.cells {
        let center = grid.cell_center(cell);
        let uh = u.cell_center_value(cell);
        let ur = reference(&center);
        for c in 0..u.components() {
            err += w * (uh[c] - ur[c]) * (uh[c] - ur[c]);
            norm += w * ur[c] * ur[c];
        }
    }
    if norm == 0.0 {
        return err.sqrt();
    }
    (err / norm).sqrt()
}

/// Convergence study over strictly increasing power-of-two resolutions.
/// With an analytic reference, every resolution gets an error row; without
/// one, errors are measured against the finest solve (which is consumed
/// as the reference and gets no row).
pub fn refine_study(
    p: &TransmissionProblem,
    resolutions: &[usize],
    reference: Option<&(dyn Fn(&[f64]) -> Vec<f64> + Sync)>,
    opts: &SolveOptions,
) -> Result<Vec<RefineRow>> {
    if resolutions.len() < 2 {
        return Err(Error::Parameter("refine_study needs at least two resolutions".into()));
    }
    for w in resolutions.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Parameter("resolutions must be strictly increasing".into()));
        }
    }

    let mut fields = Vec::with_capacity(resolutions.len());
    for &cells in resolutions {
        let grid = Grid::new(p.n, cells)?;
        let (u, _) = solve_transmission(p, &grid, opts)?;
        fields.push(u);
    }

    let mut rows: Vec<RefineRow> = Vec::new();
    let evaluated: Vec<(usize, f64)> = match reference {
        Some(r) => fields
            .iter()
            .zip(resolutions)
            .map(|(u, &cells)| (cells, l2_relative_error(u, r)))
            .collect(),
        None => {
            let finest = fields.last().unwrap();
            fields[..fields.len() - 1]
                .iter()
                .zip(resolutions)
                .map(|(u, &cells)| {
                    (cells, l2_relative_error(u, |x: &[f64]| finest.eval(x).unwrap()))
                })
                .collect()
        }
    };

    for (i, &(cells, error)) in evaluated.iter().enumerate() {
        let rate = if i == 0 {
            RateLabel::First
        } else {
            let (prev_cells, prev_error) = evaluated[i - 1];
            if error < EXACT_ERROR_FLOOR || prev_error < EXACT_ERROR_FLOOR {
                RateLabel::Exact
            } else {
                let ratio = cells as f64 / prev_cells as f64;
                RateLabel::Observed((prev_error / error).ln() / ratio.ln())
            }
        };
        rows.push(RefineRow { cells_per_side: cells, h: 2.0 / cells as f64, error, rate });
    }
    Ok(rows)
}
