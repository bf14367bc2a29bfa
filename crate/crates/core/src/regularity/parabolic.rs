//! Parabolic harness operations: time-independent affine fits over
//! cylinders Q_r(Z), the 2^{n+2} density decay, and Hölder-in-time
//! exponents.

use crate::error::{Error, Result};
use crate::parabolic::TimeField;
use crate::problem::{parabolic_rescaled_density, parabolic_rescaled_density_within, TransmissionProblem};

use super::{
    ball_quadrature, classify_rows, AnalysisParams, DyadicReport, ScaleRow, MIN_CELLS_PER_RADIUS,
};

/// Fit of a time-independent linear map over the cylinder Q_r(Z):
/// ∇ℓ is the space-time average of the spatial gradients, the residual
/// is max over sampled time levels of
/// r^{-n-2} ∫_{B_r(z)} |u(·,t) − u(Z) − ∇ℓ·(· − z)|².
#[derive(Debug, Clone)]
pub struct ParabolicAffineFit {
    pub center: Vec<f64>,
    pub center_time: f64,
    pub radius: f64,
    /// u(Z) ∈ R^m.
    pub value: Vec<f64>,
    /// ∇ℓ ∈ R^{m×n}.
    pub gradient: Vec<f64>,
    pub sup_t_residual: f64,
    /// |∇ℓ| / |log r|.
    pub log_bound_ratio: f64,
    /// Number of time levels sampled in (s − r², s].
    pub levels: usize,
}

impl ParabolicAffineFit {
    pub fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

pub fn parabolic_affine_fit(
    u: &TimeField,
    z: &[f64],
    s: f64,
    r: f64,
) -> Result<ParabolicAffineFit> {
    let grid = u.grid();
    let n = grid.dim();
    let m = u.components();
    let h = grid.h();
    if r < MIN_CELLS_PER_RADIUS * h {
        return Err(Error::Resolution(format!(
            "cylinder radius {r} below {MIN_CELLS_PER_RADIUS} cells (h = {h})"
        )));
    }
    if r * r < 4.0 * u.dt() {
        return Err(Error::Resolution(format!(
            "cylinder depth r² = {} below 4Δt = {}",
            r * r,
            4.0 * u.dt()
        )));
    }
    let z_norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if z_norm + r > 1.0 + 1e-12 {
        return Err(Error::Geometry(format!("ball B_{r}({z:?}) not contained in B_1")));
    }
    let levels = u.frames_in_window(s - r * r, s);
    if levels.is_empty() {
        return Err(Error::Domain(format!(
            "no stored time levels inside ({}, {s}]",
            s - r * r
        )));
    }

    let quad = ball_quadrature(grid, z, r);
    if quad.cells.is_empty() {
        return Err(Error::Resolution(format!("no cell centers inside B_{r}({z:?})")));
    }
    let wsum: f64 = quad.cells.iter().map(|(_, w)| w).sum();

    // space-time average of spatial gradients
    let mut grad = vec![0.0; m * n];
    for &k in &levels {
        let frame = u.frame(k);
        for &(cell, w) in &quad.cells {
            let g = frame.gradient_at(cell);
            for i in 0..m * n {
                grad[i] += w * g[i];
            }
        }
    }
    let denom = wsum * levels.len() as f64;
    for g in grad.iter_mut() {
        *g /= denom;
    }

    let (value, _) = u.sample_spacetime(z, s)?;

    // residual: honest discrete sup over the sampled levels
    let mut sup_residual = 0.0f64;
    for &k in &levels {
        let frame = u.frame(k);
        let mut acc = 0.0;
        for &(cell, w) in &quad.cells {
            let center = grid.cell_center(cell);
            let v = frame.cell_center_value(cell);
            let mut dev2 = 0.0;
            for c in 0..m {
                let lin: f64 = (0..n).map(|d| grad[c * n + d] * (center[d] - z[d])).sum();
                let dv = v[c] - value[c] - lin;
                dev2 += dv * dv;
            }
            acc += w * dev2;
        }
        sup_residual = sup_residual.max(acc * quad.cell_volume / r.powi(n as i32 + 2));
    }

    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let log_r = r.ln().abs().max(1e-12);
    Ok(ParabolicAffineFit {
        center: z.to_vec(),
        center_time: s,
        radius: r,
        value,
        gradient: grad,
        sup_t_residual: sup_residual,
        log_bound_ratio: grad_norm / log_r,
        levels: levels.len(),
    })
}

/// Parabolic density-decay report: |D_{Z,r/2}| against |D_{Z,r}|/2^{n+2}
/// with slack normalized by ω(r)^{3n+4}, plus the parabolic doubling gap
/// |D_{Z,r/2}| − 2^{n+2}|D_{Z,r} ∩ Q_{1/2}|.
pub fn parabolic_density_decay(
    p: &TransmissionProblem,
    u: &TimeField,
    z: &[f64],
    s: f64,
    params: &AnalysisParams,
) -> Result<DyadicReport> {
    let n = p.n;
    let factor = 2.0f64.powi(n as i32 + 2);
    let h = u.grid().h();

    let mut rows: Vec<ScaleRow> = Vec::with_capacity(params.k_max + 1);
    for k in 0..=params.k_max {
        let r = params.r0 * 0.5f64.powi(k as i32);
        let fit = parabolic_affine_fit(u, z, s, r);
        let (grad_l_norm, sup_t_residual, log_bound_ratio, resolved) = match &fit {
            Ok(f) => (
                Some(f.gradient_norm()),
                Some(f.sup_t_residual),
                Some(f.log_bound_ratio),
                r >= MIN_CELLS_PER_RADIUS * h && r * r >= 4.0 * u.dt(),
            ),
            Err(Error::Resolution(_)) | Err(Error::Domain(_)) => (None, None, None, false),
            Err(e) => return Err(clone_err(e)),
        };
        let density = Some(parabolic_rescaled_density(&p.domain, z, s, r, params.density_resolution)?);
        rows.push(ScaleRow {
            r,
            grad_l_norm,
            bmo_c: None,
            resolved,
            density,
            sup_t_residual,
            log_bound_ratio,
            ..ScaleRow::default()
        });
    }

    let mut c_required: Option<f64> = None;
    for k in 1..rows.len() {
        let r_parent = rows[k - 1].r;
        let parent_density = rows[k - 1].density.unwrap();
        let lhs = rows[k].density.unwrap();
        let rhs = parent_density / factor;
        rows[k].density_rhs = Some(rhs);
        let met = rows[k - 1].grad_l_norm.map(|g| g >= params.threshold_m);
        rows[k].hypothesis_met = met;
        if met == Some(true) {
            let omega = p.tensor_a.modulus.eval(r_parent.min(1.0))?;
            let slack = (lhs - rhs) / omega.powi(3 * n as i32 + 4);
            rows[k].slack = Some(slack);
            c_required = Some(c_required.map_or(slack, |c: f64| c.max(slack)));
        }
        let within =
            parabolic_rescaled_density_within(&p.domain, z, s, r_parent, params.density_resolution, 0.5)?;
        rows[k].doubling_gap = Some(lhs - factor * within);
    }

    let case = classify_rows(&rows, params.threshold_m);
    Ok(DyadicReport {
        center: z.to_vec(),
        center_time: Some(s),
        threshold_m: params.threshold_m,
        rows,
        case,
        c_required,
        consistent: match (params.c_fit, c_required) {
            (Some(c), Some(req)) => Some(req <= c),
            _ => None,
        },
    })
}

fn clone_err(e: &Error) -> Error {
    Error::Domain(format!("{e}"))
}

/// A space-time point.
pub type SpaceTimePoint = (Vec<f64>, f64);

/// Fitted time regularity: `Static` when all time-only increments vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeExponent {
    Static,
    Undetermined,
    Fitted(f64),
}

#[derive(Debug, Clone)]
pub struct HolderReport {
    /// |u(X) − u(Y)| / d_p(X, Y) per supplied pair.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Least-squares exponent of log|Δu| against log|Δt| over the
    /// time-only pairs (same spatial point).
    pub time_exponent: TimeExponent,
}

/// Parabolic distance √(|x−y|² + |t−s|).
pub fn parabolic_distance(x: &SpaceTimePoint, y: &SpaceTimePoint) -> f64 {
    let d2: f64 = x.0.iter().zip(&y.0).map(|(a, b)| (a - b) * (a - b)).sum();
    (d2 + (x.1 - y.1).abs()).sqrt()
}

/// Per-pair d_p ratios and the fitted time exponent. Pairs must lie in
/// Q_{1/2} and be separated by at least 2·max(h, √Δt) in parabolic
/// distance; time-only pairs (equal spatial points) feed the exponent fit.
pub fn holder_time_exponent(
    u: &TimeField,
    pairs: &[(SpaceTimePoint, SpaceTimePoint)],
) -> Result<HolderReport> {
    if pairs.is_empty() {
        return Err(Error::Parameter("holder_time_exponent needs at least one pair".into()));
    }
    let h = u.grid().h();
    let min_sep = 2.0 * h.max(u.dt().sqrt());

    let mut ratios = Vec::with_capacity(pairs.len());
    let mut gaps: Vec<(f64, f64)> = Vec::new(); // (log gap, log |Δu|)
    let mut time_only = 0usize;
    let mut nonzero_increments = 0usize;

    for (a, b) in pairs {
        for (x, t) in [a, b] {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.5 + 1e-12 || *t > 1e-12 || *t < -0.25 - 1e-12 {
                return Err(Error::Parameter(format!(
                    "pair point ({x:?}, {t}) outside Q_1/2"
                )));
            }
        }
        let dp = parabolic_distance(a, b);
        if dp < min_sep {
            return Err(Error::Parameter(format!(
                "pair separation {dp} below 2·max(h, √Δt) = {min_sep}"
            )));
        }
        let (ua, _) = u.sample_spacetime(&a.0, a.1)?;
        let (ub, _) = u.sample_spacetime(&b.0, b.1)?;
        let du: f64 = ua.iter().zip(&ub).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        ratios.push(du / dp);

        let same_x = a.0.iter().zip(&b.0).all(|(p, q)| (p - q).abs() < 1e-14);
        if same_x {
            time_only += 1;
            if du > 1e-14 {
                nonzero_increments += 1;
                gaps.push(((a.1 - b.1).abs().ln(), du.ln()));
            }
        }
    }

    let time_exponent = if time_only == 0 {
        TimeExponent::Undetermined
    } else if nonzero_increments == 0 {
        TimeExponent::Static
    } else if gaps.len() < 2 {
        TimeExponent::Undetermined
    } else {
        // least squares slope of log|Δu| vs log|Δt|
        let n = gaps.len() as f64;
        let sx: f64 = gaps.iter().map(|g| g.0).sum();
        let sy: f64 = gaps.iter().map(|g| g.1).sum();
        let sxx: f64 = gaps.iter().map(|g| g.0 * g.0).sum();
        let sxy: f64 = gaps.iter().map(|g| g.0 * g.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() < 1e-14 {
            TimeExponent::Undetermined
        } else {
            TimeExponent::Fitted((n * sxy - sx * sy) / denom)
        }
    };

    let max_ratio = ratios.iter().cloned().fold(0.0f64, f64::max);
    Ok(HolderReport { ratios, max_ratio, time_exponent })
}
