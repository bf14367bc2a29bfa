//! Implicit time stepping for the parabolic transmission problem on
//! Q_1 = B_1 × (−1, 0), embedded in [−1,1]^n × (−1, 0).

use crate::error::{Error, Result};
use crate::fem::{
    assemble::VERIFY_SAMPLES, assemble_at, assemble_mass, CsrMatrix, DiscreteField,
    EliminatedSystem, Grid,
};
use crate::problem::TransmissionProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    BackwardEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn theta(&self) -> f64 {
        match self {
            Scheme::BackwardEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::BackwardEuler => "backward_euler",
            Scheme::CrankNicolson => "crank_nicolson",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParabolicOptions {
    pub dt: f64,
    pub scheme: Scheme,
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every k-th frame (and the final one); must divide the step count.
    pub store_every: usize,
    /// Integrate from −1 up to this time (0 for the full cylinder).
    pub t_end: f64,
}

impl ParabolicOptions {
    /// Defaults: backward Euler with Δt = h² (the parabolic scaling),
    /// integrated over the whole of (−1, 0).
    pub fn for_grid(grid: &Grid) -> Self {
        ParabolicOptions {
            dt: grid.h() * grid.h(),
            scheme: Scheme::BackwardEuler,
            tol: 1e-10,
            max_iter: 50_000,
            store_every: 1,
            t_end: 0.0,
        }
    }
}

/// Per-step solver record.
#[derive(Debug, Clone, Copy)]
pub struct StepLog {
    pub step: usize,
    pub t: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Mass-weighted norm ‖u‖_M = √(uᵀMu).
    pub mass_norm: f64,
    /// Stiffness energy uᵀKu.
    pub energy: f64,
}

/// A time-indexed sequence of nodal fields at uniform cadence.
#[derive(Debug, Clone)]
pub struct TimeField {
    grid: Grid,
    m: usize,
    t0: f64,
    dt: f64,
    frames: Vec<DiscreteField>,
}

impl TimeField {
    pub fn new(grid: Grid, m: usize, t0: f64, dt: f64) -> Self {
        TimeField { grid, m, t0, dt, frames: Vec::new() }
    }

    /// Analytic construction: interpolate f(x, t) on `frame_count` slices
    /// starting at t0.
    pub fn from_fn<F: Fn(&[f64], f64) -> Vec<f64>>(
        grid: Grid,
        m: usize,
        t0: f64,
        dt: f64,
        frame_count: usize,
        f: F,
    ) -> Self {
        let mut tf = TimeField::new(grid, m, t0, dt);
        for k in 0..frame_count {
            let t = t0 + k as f64 * dt;
            tf.frames.push(DiscreteField::from_fn(grid, m, |x| f(x, t)));
        }
        tf
    }

    pub fn push_frame(&mut self, frame: DiscreteField) {
        debug_assert_eq!(frame.components(), self.m);
        self.frames.push(frame);
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn last_time(&self) -> f64 {
        self.time_of(self.frames.len().saturating_sub(1))
    }

    pub fn frame(&self, k: usize) -> &DiscreteField {
        &self.frames[k]
    }

    /// Stored times inside the half-open window (t_lo, t_hi].
    pub fn frames_in_window(&self, t_lo: f64, t_hi: f64) -> Vec<usize> {
        (0..self.frames.len())
            .filter(|&k| {
                let t = self.time_of(k);
                t > t_lo && t <= t_hi + 1e-14
            })
            .collect()
    }

    /// Multilinear in space, linear in time: value and spatial gradient
    /// at (x, t).
    pub fn sample_spacetime(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.frames.is_empty() {
            return Err(Error::Domain("time field has no frames".into()));
        }
        let t_last = self.last_time();
        if t < self.t0 - 1e-12 || t > t_last + 1e-12 {
            return Err(Error::Domain(format!(
                "time {t} outside computed range [{}, {t_last}]",
                self.t0
            )));
        }
        let pos = ((t - self.t0) / self.dt).clamp(0.0, (self.frames.len() - 1) as f64);
        let k = (pos.floor() as usize).min(self.frames.len() - 1);
        let frac = pos - k as f64;
        let (v0, g0) = self.frames[k].eval_with_gradient(x)?;
        if frac <= 1e-14 || k + 1 >= self.frames.len() {
            return Ok((v0, g0));
        }
        let (v1, g1) = self.frames[k + 1].eval_with_gradient(x)?;
        let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x0, x1)| (1.0 - frac) * x0 + frac * x1).collect()
        };
        Ok((lerp(&v0, &v1), lerp(&g0, &g1)))
    }
}

/// Integrate the parabolic problem from t = −1 to 0.
///
/// Each step solves
/// `(M + θ Δt K(t^{k+1})) u^{k+1} = M u^k − (1−θ) Δt K(t^{k+1}) u^k + Δt f(t^{k+1})`
/// with Dirichlet data applied at the new time level. Static problems
/// assemble K once; time-dependent coefficients/domains re-assemble per
/// step.
pub fn solve_parabolic(
    p: &TransmissionProblem,
    grid: &Grid,
    opts: &ParabolicOptions,
    initial: &DiscreteField,
) -> Result<(TimeField, Vec<StepLog>)> {
    if !(opts.dt > 0.0 && opts.dt < 1.0) {
        return Err(Error::Parameter(format!("time step {} outside (0,1)", opts.dt)));
    }
    if initial.grid() != grid || initial.components() != p.m {
        return Err(Error::Parameter("initial field does not match grid/problem".into()));
    }
    if !(opts.t_end > -1.0 && opts.t_end <= 0.0) {
        return Err(Error::Parameter(format!("t_end {} outside (-1, 0]", opts.t_end)));
    }
    let nsteps = ((opts.t_end + 1.0) / opts.dt).round() as usize;
    if nsteps == 0 || opts.store_every == 0 || nsteps % opts.store_every != 0 {
        return Err(Error::Parameter(format!(
            "store_every {} must divide the step count {nsteps}",
            opts.store_every
        )));
    }
    p.verify_conditions_at(VERIFY_SAMPLES, -1.0)?;

    let theta = opts.scheme.theta();
    let t0 = -1.0;
    let mass = assemble_mass(grid, p.m);
    let time_dependent = p.is_time_dependent();

    // static fast path: one stiffness, one elimination
    let mut cached: Option<(CsrMatrix, EliminatedSystem, Vec<f64>)> = None;
    if !time_dependent {
        let sys = assemble_at(p, grid, t0)?;
        let a_step = add_scaled(&mass, &sys.matrix, 1.0, theta * opts.dt);
        let elim = EliminatedSystem::new(&a_step, &sys.dirichlet);
        cached = Some((sys.matrix, elim, sys.rhs));
    }

    let nn = grid.node_count();
    let ndof = p.m * nn;
    let mut u = initial.values().to_vec();
    let mut field = TimeField::new(*grid, p.m, t0, opts.dt * opts.store_every as f64);
    field.push_frame(initial.clone());
    let mut logs = Vec::with_capacity(nsteps);

    for step in 0..nsteps {
        let t_next = t0 + (step + 1) as f64 * opts.dt;

        let (stiff, elim);
        let (stiff_ref, elim_ref): (&CsrMatrix, &EliminatedSystem) =
            if let Some((k, e, _)) = &cached {
                (k, e)
            } else {
                let sys = assemble_at(p, grid, t_next)?;
                let a_step = add_scaled(&mass, &sys.matrix, 1.0, theta * opts.dt);
                stiff = sys.matrix;
                elim = EliminatedSystem::new(&a_step, &sys.dirichlet);
                (&stiff, &elim)
            };
        // the forcing closure may vary in time even when the operator is
        // static, so its vector is refreshed every step
        let forcing_vec;
        let forcing_ref: &Vec<f64> = if p.forcing.is_none() {
            match &cached {
                Some((_, _, f)) => f,
                None => {
                    forcing_vec = vec![0.0; ndof];
                    &forcing_vec
                }
            }
        } else {
            forcing_vec = crate::fem::assemble::assemble_forcing(p, grid, t_next);
            &forcing_vec
        };

        // raw rhs: M u − (1−θ)Δt K u + Δt f
        let mu = mass.apply(&u);
        let ku = stiff_ref.apply(&u);
        let mut rhs = vec![0.0; ndof];
        for i in 0..ndof {
            rhs[i] = mu[i] - (1.0 - theta) * opts.dt * ku[i] + opts.dt * forcing_ref[i];
        }

        // Dirichlet values at the new time level
        let mut values = vec![0.0; ndof];
        for node in 0..nn {
            if grid.is_boundary_node(node) {
                let x = grid.node_point(node);
                let g = (p.boundary)(&x, t_next);
                for c in 0..p.m {
                    values[c * nn + node] = g[c];
                }
            }
        }
        let b = elim_ref.fold_rhs(&rhs, &values);

        // warm-start from the previous level with updated boundary values
        let mut x0 = u.clone();
        for node in 0..nn {
            if grid.is_boundary_node(node) {
                for c in 0..p.m {
                    x0[c * nn + node] = values[c * nn + node];
                }
            }
        }
        let (u_next, stats) = elim_ref.solve(&b, Some(&x0), opts.tol, opts.max_iter).map_err(
            |e| match e {
                Error::Convergence { residual, iterations } => Error::Convergence {
                    residual,
                    iterations: iterations.max(step), // keep context: which step failed
                },
                other => other,
            },
        )?;
        u = u_next;

        let mass_norm = dot(&u, &mass.apply(&u)).max(0.0).sqrt();
        let energy = dot(&u, &stiff_ref.apply(&u));
        logs.push(StepLog {
            step,
            t: t_next,
            iterations: stats.iterations,
            residual: stats.relative_residual,
            mass_norm,
            energy,
        });

        if (step + 1) % opts.store_every == 0 {
            field.push_frame(DiscreteField::from_values(*grid, p.m, u.clone())?);
        }
    }

    Ok((field, logs))
}

/// The two summands of the normalization check
/// `ess sup_t ∫_{B_1} |u|² dx + ‖∇u‖_{L∞(D ∩ Q_1)}`, measured over the
/// stored frames.
#[derive(Debug, Clone, Copy)]
pub struct NormalizationCheck {
    pub sup_l2_squared: f64,
    pub lip_d: f64,
}

impl NormalizationCheck {
    pub fn total(&self) -> f64 {
        self.sup_l2_squared + self.lip_d
    }
}

pub fn normalization_check(p: &TransmissionProblem, u: &TimeField) -> NormalizationCheck {
    let grid = u.grid();
    let n = grid.dim();
    let h = grid.h();
    let corners = 1usize << n;
    let origin_z = vec![0.0; n];
    let quad = crate::regularity::ball_quadrature(grid, &origin_z, 1.0);

    let mut sup_l2 = 0.0f64;
    let mut lip = 0.0f64;
    for k in 0..u.frame_count() {
        let t = u.time_of(k);
        let frame = u.frame(k);
        let mut l2 = 0.0;
        for &(cell, w) in &quad.cells {
            let v = frame.cell_center_value(cell);
            l2 += w * v.iter().map(|x| x * x).sum::<f64>();
        }
        sup_l2 = sup_l2.max(l2 * quad.cell_volume);

        for cell in 0..grid.cell_count() {
            let origin = grid.cell_origin(cell);
            let fully_in_d = (0..corners).all(|mask| {
                let corner: Vec<f64> = (0..n)
                    .map(|d| origin[d] + if (mask >> d) & 1 == 1 { h } else { 0.0 })
                    .collect();
                corner.iter().map(|v| v * v).sum::<f64>() < 1.0
                    && p.domain.contains_at(&corner, t)
            });
            if fully_in_d {
                let g = frame.gradient_at(cell);
                lip = lip.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
            }
        }
    }
    NormalizationCheck { sup_l2_squared: sup_l2, lip_d: lip }
}

fn add_scaled(a: &CsrMatrix, b: &CsrMatrix, alpha: f64, beta: f64) -> CsrMatrix {
    let mut trips = Vec::with_capacity(a.nnz() + b.nnz());
    for r in 0..a.nrows() {
        let (cols, vals) = a.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trips.push((r as u32, *c as u32, alpha * v));
        }
    }
    for r in 0..b.nrows() {
        let (cols, vals) = b.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trips.push((r as u32, *c as u32, beta * v));
        }
    }
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), trips)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
