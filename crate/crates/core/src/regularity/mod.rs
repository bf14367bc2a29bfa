//! The dyadic analysis harness: affine fits of ∇u over balls, BMO
//! profiles, rescaled-density decay, the Case-1/Case-2 dichotomy,
//! Lipschitz transmission ratios, and frozen-coefficient comparisons.

pub mod parabolic;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble::VERIFY_SAMPLES, CsrMatrix, DiscreteField, EliminatedSystem, Grid};
use crate::problem::{rescaled_density, rescaled_density_within, TransmissionProblem};

pub use parabolic::{
    holder_time_exponent, parabolic_affine_fit, parabolic_density_decay, parabolic_distance,
    HolderReport, ParabolicAffineFit, TimeExponent,
};

/// Balls must span at least this many cells per radius for a fit to be
/// considered resolved.
pub const MIN_CELLS_PER_RADIUS: f64 = 4.0;

/// Subsample resolution per axis for in-ball cell fractions.
const SUBSAMPLES: usize = 8;

/// Weighted cell-center quadrature over B_r(z): cells whose centers lie
/// in the ball, boundary cells weighted by their in-ball subsample
/// fraction.
#[derive(Debug, Clone)]
pub(crate) struct BallQuad {
    /// (cell index, weight in [0,1])
    pub cells: Vec<(usize, f64)>,
    pub cell_volume: f64,
}

impl BallQuad {
    #[cfg(test)]
    pub fn measure(&self) -> f64 {
        self.cells.iter().map(|(_, w)| w).sum::<f64>() * self.cell_volume
    }
}

pub(crate) fn ball_quadrature(grid: &Grid, z: &[f64], r: f64) -> BallQuad {
    let n = grid.dim();
    let h = grid.h();
    let cps = grid.cells_per_side();
    let r2 = r * r;

    // cell-coordinate bounding box of the ball
    let mut lo = vec![0usize; n];
    let mut hi = vec![0usize; n];
    for d in 0..n {
        let lo_f = ((z[d] - r + 1.0) / h - 0.5).floor().max(0.0);
        let hi_f = ((z[d] + r + 1.0) / h - 0.5).ceil().min(cps as f64 - 1.0);
        lo[d] = lo_f as usize;
        hi[d] = hi_f.max(0.0) as usize;
    }

    let mut cells = Vec::new();
    let mut coords = lo.clone();
    'outer: loop {
        let cell = grid.cell_index(&coords);
        let center = grid.cell_center(cell);
        let dist2: f64 = center.iter().zip(z).map(|(c, zi)| (c - zi) * (c - zi)).sum();
        if dist2 < r2 {
            let origin = grid.cell_origin(cell);
            let corners = 1usize << n;
            let fully_inside = (0..corners).all(|mask| {
                let mut d2 = 0.0;
                for d in 0..n {
                    let x = origin[d] + if (mask >> d) & 1 == 1 { h } else { 0.0 };
                    d2 += (x - z[d]) * (x - z[d]);
                }
                d2 <= r2
            });
            let weight = if fully_inside {
                1.0
            } else {
                let total = SUBSAMPLES.pow(n as u32);
                let mut inside = 0usize;
                let sub_h = h / SUBSAMPLES as f64;
                let mut sub = vec![0usize; n];
                loop {
                    let mut d2 = 0.0;
                    for d in 0..n {
                        let x = origin[d] + (sub[d] as f64 + 0.5) * sub_h;
                        d2 += (x - z[d]) * (x - z[d]);
                    }
                    if d2 < r2 {
                        inside += 1;
                    }
                    let mut carry = true;
                    for s in sub.iter_mut() {
                        if carry {
                            *s += 1;
                            if *s == SUBSAMPLES {
                                *s = 0;
                            } else {
                                carry = false;
                            }
                        }
                    }
                    if carry {
                        break;
                    }
                }
                inside as f64 / total as f64
            };
            if weight > 0.0 {
                cells.push((cell, weight));
            }
        }
        // advance the bounding-box walk
        for d in 0..n {
            coords[d] += 1;
            if coords[d] <= hi[d] {
                continue 'outer;
            }
            coords[d] = lo[d];
        }
        break;
    }
    BallQuad { cells, cell_volume: h.powi(n as i32) }
}

/// The affine map ℓ_{z,r} with ∇ℓ equal to the ball average of ∇u and
/// constant part the in-ball average of u, plus the normalized fit
/// residual r^{-n} ∫_{B_r(z)} |∇u − ∇ℓ|².
#[derive(Debug, Clone)]
pub struct AffineFit {
    pub center: Vec<f64>,
    pub radius: f64,
    /// ℓ(z) ∈ R^m.
    pub value: Vec<f64>,
    /// ∇ℓ ∈ R^{m×n}, row-major.
    pub gradient: Vec<f64>,
    pub residual: f64,
}

impl AffineFit {
    pub fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// ℓ(x) = ℓ(z) + ∇ℓ (x − z).
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = self.center.len();
        let m = self.value.len();
        (0..m)
            .map(|c| {
                self.value[c]
                    + (0..n)
                        .map(|d| self.gradient[c * n + d] * (x[d] - self.center[d]))
                        .sum::<f64>()
            })
            .collect()
    }
}

fn check_ball_in_unit(z: &[f64], r: f64) -> Result<()> {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm + r > 1.0 + 1e-12 {
        return Err(Error::Geometry(format!("ball B_{r}({z:?}) not contained in B_1")));
    }
    Ok(())
}

/// Affine fit over B_r(z); requires r ≥ 4h.
pub fn affine_fit(u: &DiscreteField, z: &[f64], r: f64) -> Result<AffineFit> {
    let h = u.grid().h();
    if r < MIN_CELLS_PER_RADIUS * h {
        return Err(Error::Resolution(format!(
            "radius {r} below {MIN_CELLS_PER_RADIUS} cells (h = {h})"
        )));
    }
    affine_fit_relaxed(u, z, r)
}

/// The same fit without the 4h floor; used by profile code that reports
/// under-resolved scales instead of failing (they are flagged in the
/// report rows).
pub fn affine_fit_relaxed(u: &DiscreteField, z: &[f64], r: f64) -> Result<AffineFit> {
    check_ball_in_unit(z, r)?;
    let quad = ball_quadrature(u.grid(), z, r);
    fit_from_quadrature(u, z, r, &quad)
}

fn fit_from_quadrature(u: &DiscreteField, z: &[f64], r: f64, quad: &BallQuad) -> Result<AffineFit> {
    if quad.cells.is_empty() {
        return Err(Error::Resolution(format!("no cell centers inside B_{r}({z:?})")));
    }
    let n = u.grid().dim();
    let m = u.components();
    let mut wsum = 0.0;
    let mut grad = vec![0.0; m * n];
    let mut value = vec![0.0; m];
    for &(cell, w) in &quad.cells {
        let g = u.gradient_at(cell);
        let v = u.cell_center_value(cell);
        for i in 0..m * n {
            grad[i] += w * g[i];
        }
        for c in 0..m {
            value[c] += w * v[c];
        }
        wsum += w;
    }
    for gi in grad.iter_mut() {
        *gi /= wsum;
    }
    for vi in value.iter_mut() {
        *vi /= wsum;
    }
    let mut residual = 0.0;
    for &(cell, w) in &quad.cells {
        let g = u.gradient_at(cell);
        let dev: f64 = g.iter().zip(&grad).map(|(a, b)| (a - b) * (a - b)).sum();
        residual += w * dev;
    }
    residual *= quad.cell_volume / r.powi(n as i32);
    Ok(AffineFit { center: z.to_vec(), radius: r, value, gradient: grad, residual })
}

/// Affine fit of an analytically evaluated field (value, gradient) using
/// the same center/fraction quadrature on a virtual `cells_across`-cell
/// grid over the bounding box of B_r(z). Lets harness identities (e.g.
/// the rescaling covariance of the fit) be tested without grid
/// interpolation error.
pub fn affine_fit_analytic<F>(f: F, n: usize, m: usize, z: &[f64], r: f64, cells_across: usize) -> AffineFit
where
    F: Fn(&[f64]) -> (Vec<f64>, Vec<f64>),
{
    let h = 2.0 * r / cells_across as f64;
    let r2 = r * r;
    let mut wsum = 0.0;
    let mut grad = vec![0.0; m * n];
    let mut value = vec![0.0; m];
    let mut residual_cells: Vec<(Vec<f64>, f64)> = Vec::new();

    let mut coords = vec![0usize; n];
    loop {
        let center: Vec<f64> = (0..n).map(|d| z[d] - r + (coords[d] as f64 + 0.5) * h).collect();
        let dist2: f64 = center.iter().zip(z).map(|(c, zi)| (c - zi) * (c - zi)).sum();
        if dist2 < r2 {
            let origin: Vec<f64> = (0..n).map(|d| z[d] - r + coords[d] as f64 * h).collect();
            let corners = 1usize << n;
            let fully_inside = (0..corners).all(|mask| {
                let mut d2 = 0.0;
                for d in 0..n {
                    let x = origin[d] + if (mask >> d) & 1 == 1 { h } else { 0.0 };
                    d2 += (x - z[d]) * (x - z[d]);
                }
                d2 <= r2
            });
            let w = if fully_inside {
                1.0
            } else {
                let total = SUBSAMPLES.pow(n as u32);
                let mut inside = 0usize;
                let sub_h = h / SUBSAMPLES as f64;
                let mut sub = vec![0usize; n];
                loop {
                    let mut d2 = 0.0;
                    for d in 0..n {
                        let x = origin[d] + (sub[d] as f64 + 0.5) * sub_h;
                        d2 += (x - z[d]) * (x - z[d]);
                    }
                    if d2 < r2 {
                        inside += 1;
                    }
                    let mut carry = true;
                    for s in sub.iter_mut() {
                        if carry {
                            *s += 1;
                            if *s == SUBSAMPLES {
                                *s = 0;
                            } else {
                                carry = false;
                            }
                        }
                    }
                    if carry {
                        break;
                    }
                }
                inside as f64 / total as f64
            };
            if w > 0.0 {
                let (v, g) = f(&center);
                for i in 0..m * n {
                    grad[i] += w * g[i];
                }
                for c in 0..m {
                    value[c] += w * v[c];
                }
                wsum += w;
                residual_cells.push((g, w));
            }
        }
        let mut carry = true;
        for c in coords.iter_mut() {
            if carry {
                *c += 1;
                if *c == cells_across {
                    *c = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    for gi in grad.iter_mut() {
        *gi /= wsum;
    }
    for vi in value.iter_mut() {
        *vi /= wsum;
    }
    let mut residual = 0.0;
    for (g, w) in &residual_cells {
        let dev: f64 = g.iter().zip(&grad).map(|(a, b)| (a - b) * (a - b)).sum();
        residual += w * dev;
    }
    residual *= h.powi(n as i32) / r.powi(n as i32);
    AffineFit { center: z.to_vec(), radius: r, value, gradient: grad, residual }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    Case1,
    Case2,
    Undetermined,
}

impl CaseTag {
    pub fn label(&self) -> &'static str {
        match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::Undetermined => "undetermined",
        }
    }
}

/// One scale of a dyadic report. Optional columns are absent when the
/// producing operation did not compute them.
#[derive(Debug, Clone, Default)]
pub struct ScaleRow {
    pub r: f64,
    /// |∇ℓ_{z,r}| (Frobenius).
    pub grad_l_norm: Option<f64>,
    /// BMO constant C_r = r^{-n} ∫_{B_r} |∇u − (∇u)_{z,r}|².
    pub bmo_c: Option<f64>,
    /// The ball spans at least [`MIN_CELLS_PER_RADIUS`] cells per radius.
    pub resolved: bool,
    /// |D_{z,r}|.
    pub density: Option<f64>,
    /// |D_{z,2r}| / 2^n — the decay-inequality right-hand side matched
    /// against this row's density.
    pub density_rhs: Option<f64>,
    /// (|D_{z,r}| − |D_{z,2r}|/2^n) / ω(2r)^{3n}: the constant that Eq.-style
    /// decay would require at this scale (None when the |∇ℓ| ≥ M
    /// hypothesis is not met at the parent scale).
    pub slack: Option<f64>,
    pub hypothesis_met: Option<bool>,
    /// |D_{z,r}| − 2^n |D_{z,2r} ∩ B_{1/2}| (doubling-identity gap).
    pub doubling_gap: Option<f64>,
    /// Parabolic: sup_t fit residual.
    pub sup_t_residual: Option<f64>,
    /// Parabolic: |∇ℓ| / |log r|.
    pub log_bound_ratio: Option<f64>,
}

/// Per-center dyadic record across the scales r_k = r0 · 2^{-k}.
#[derive(Debug, Clone)]
pub struct DyadicReport {
    pub center: Vec<f64>,
    /// Center time for parabolic reports.
    pub center_time: Option<f64>,
    pub threshold_m: f64,
    pub rows: Vec<ScaleRow>,
    pub case: CaseTag,
    /// max slack over scales where the hypothesis was met: the smallest
    /// constant for which the measured decay is consistent.
    pub c_required: Option<f64>,
    /// Set when a candidate constant `c_fit` was supplied.
    pub consistent: Option<bool>,
}

/// Parameters shared by the per-center analyses.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisParams {
    pub r0: f64,
    pub k_max: usize,
    pub threshold_m: f64,
    pub density_resolution: usize,
    pub c_fit: Option<f64>,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            r0: 0.25,
            k_max: 4,
            threshold_m: 1.0,
            density_resolution: 256,
            c_fit: None,
        }
    }
}

/// BMO profile: C_{r_k} for k = 0..=k_max. Scales below the 4h floor are
/// still computed (the quadrature degrades gracefully) but flagged
/// `resolved = false`.
pub fn bmo_profile(u: &DiscreteField, z: &[f64], r0: f64, k_max: usize) -> Result<DyadicReport> {
    check_ball_in_unit(z, r0)?;
    let h = u.grid().h();
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let r = r0 * 0.5f64.powi(k as i32);
        let fit = match affine_fit_relaxed(u, z, r) {
            Ok(fit) => fit,
            // a scale with no quadrature cells ends the profile
            Err(Error::Resolution(_)) => break,
            Err(e) => return Err(e),
        };
        rows.push(ScaleRow {
            r,
            grad_l_norm: Some(fit.gradient_norm()),
            bmo_c: Some(fit.residual),
            resolved: r >= MIN_CELLS_PER_RADIUS * h,
            ..ScaleRow::default()
        });
    }
    Ok(DyadicReport {
        center: z.to_vec(),
        center_time: None,
        threshold_m: f64::NAN,
        rows,
        case: CaseTag::Undetermined,
        c_required: None,
        consistent: None,
    })
}

/// Case-1/Case-2 dichotomy over the resolvable scales: Case1 when some
/// |∇ℓ_{z,r_k}| < 2M, Case2 when all computed scales stay ≥ 2M,
/// undetermined with fewer than 3 resolvable scales.
pub fn dichotomy_classify(
    u: &DiscreteField,
    z: &[f64],
    threshold_m: f64,
    r0: f64,
    k_max: usize,
) -> Result<CaseTag> {
    let report = bmo_profile(u, z, r0, k_max)?;
    Ok(classify_rows(&report.rows, threshold_m))
}

fn classify_rows(rows: &[ScaleRow], threshold_m: f64) -> CaseTag {
    let grads: Vec<f64> = rows
        .iter()
        .filter(|row| row.resolved)
        .filter_map(|row| row.grad_l_norm)
        .collect();
    if grads.len() < 3 {
        return CaseTag::Undetermined;
    }
    if grads.iter().cloned().fold(f64::INFINITY, f64::min) < 2.0 * threshold_m {
        CaseTag::Case1
    } else {
        CaseTag::Case2
    }
}

/// Full per-center analysis: BMO columns, rescaled densities, the decay
/// comparison |D_{z,r/2}| vs |D_{z,r}|/2^n + c·ω(r)^{3n}, the doubling
/// cross-check, and the dichotomy tag.
pub fn analyze_center(
    p: &TransmissionProblem,
    u: &DiscreteField,
    z: &[f64],
    params: &AnalysisParams,
) -> Result<DyadicReport> {
    let mut report = bmo_profile(u, z, params.r0, params.k_max)?;
    report.threshold_m = params.threshold_m;
    let n = p.n;
    let factor = 2.0f64.powi(n as i32);

    for k in 0..report.rows.len() {
        let r = report.rows[k].r;
        report.rows[k].density = Some(rescaled_density(&p.domain, z, r, params.density_resolution)?);
    }
    let mut c_required: Option<f64> = None;
    for k in 1..report.rows.len() {
        let r_parent = report.rows[k - 1].r;
        let parent_density = report.rows[k - 1].density.unwrap();
        let parent_grad = report.rows[k - 1].grad_l_norm.unwrap();
        let lhs = report.rows[k].density.unwrap();
        let rhs = parent_density / factor;
        report.rows[k].density_rhs = Some(rhs);
        let met = parent_grad >= params.threshold_m;
        report.rows[k].hypothesis_met = Some(met);
        if met {
            let omega = p.tensor_a.modulus.eval(r_parent.min(1.0))?;
            let slack = (lhs - rhs) / omega.powi(3 * n as i32);
            report.rows[k].slack = Some(slack);
            c_required = Some(c_required.map_or(slack, |c: f64| c.max(slack)));
        }
        let within = rescaled_density_within(&p.domain, z, r_parent, params.density_resolution, 0.5)?;
        report.rows[k].doubling_gap = Some(lhs - factor * within);
    }
    report.c_required = c_required;
    report.consistent = match (params.c_fit, c_required) {
        (Some(c), Some(req)) => Some(req <= c),
        _ => None,
    };
    report.case = classify_rows(&report.rows, params.threshold_m);
    Ok(report)
}

/// The density-columns view of [`analyze_center`]: the per-scale decay
/// record |D_{z,r/2}| vs |D_{z,r}|/2^n + c·ω(r)^{3n}.
pub fn density_decay_report(
    p: &TransmissionProblem,
    u: &DiscreteField,
    z: &[f64],
    params: &AnalysisParams,
) -> Result<DyadicReport> {
    analyze_center(p, u, z, params)
}

/// Analyses at many centers, in parallel, results in input order.
pub fn analyze_centers(
    p: &TransmissionProblem,
    u: &DiscreteField,
    centers: &[Vec<f64>],
    params: &AnalysisParams,
) -> Result<Vec<DyadicReport>> {
    centers
        .par_iter()
        .map(|z| analyze_center(p, u, z, params))
        .collect()
}

/// The empirical constant of the Lipschitz transmission estimate:
/// `sup_grad` over B_{1/2} against ‖u‖_{L²(B_1)} + ‖∇u‖_{L∞(D ∩ B_1)}.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzReport {
    pub sup_grad: f64,
    pub norm_l2: f64,
    pub norm_lip_d: f64,
    pub ratio: f64,
}

pub fn lipschitz_ratio(p: &TransmissionProblem, u: &DiscreteField) -> LipschitzReport {
    let grid = u.grid();
    let n = grid.dim();

    let mut sup_grad = 0.0f64;
    let mut norm_lip_d = 0.0f64;
    for cell in 0..grid.cell_count() {
        let center = grid.cell_center(cell);
        let c2: f64 = center.iter().map(|v| v * v).sum();
        let grad_norm = || {
            let g = u.gradient_at(cell);
            g.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        if c2 < 0.25 {
            sup_grad = sup_grad.max(grad_norm());
        }
        // cells fully inside D ∩ B_1: all corners in D and in the ball
        let origin = grid.cell_origin(cell);
        let h = grid.h();
        let corners = 1usize << n;
        let fully_in_d = (0..corners).all(|mask| {
            let corner: Vec<f64> = (0..n)
                .map(|d| origin[d] + if (mask >> d) & 1 == 1 { h } else { 0.0 })
                .collect();
            corner.iter().map(|v| v * v).sum::<f64>() < 1.0 && p.domain.contains(&corner)
        });
        if fully_in_d {
            norm_lip_d = norm_lip_d.max(grad_norm());
        }
    }

    let norm_l2 = l2_norm_unit_ball(u);
    let denom = norm_l2 + norm_lip_d;
    let ratio = if denom > 0.0 { sup_grad / denom } else { 0.0 };
    LipschitzReport { sup_grad, norm_l2, norm_lip_d, ratio }
}

/// ‖u‖_{L²(B_1)} by the in-ball weighted cell-center quadrature.
pub fn l2_norm_unit_ball(u: &DiscreteField) -> f64 {
    let origin = vec![0.0; u.grid().dim()];
    let quad = ball_quadrature(u.grid(), &origin, 1.0);
    let mut acc = 0.0;
    for &(cell, w) in &quad.cells {
        let v = u.cell_center_value(cell);
        acc += w * v.iter().map(|x| x * x).sum::<f64>();
    }
    (acc * quad.cell_volume).sqrt()
}

/// The default dichotomy threshold: 10 × (‖u‖_{L²(B_1)} + ‖∇u‖_{L∞(D∩B_1)}).
pub fn default_threshold(p: &TransmissionProblem, u: &DiscreteField) -> f64 {
    let lip = lipschitz_ratio(p, u);
    10.0 * (lip.norm_l2 + lip.norm_lip_d)
}

/// Result of the frozen-coefficient comparison on B_r(z): v solves the
/// constant-coefficient system with tensor A(z) on the staircase ball,
/// with boundary data u − ℓ_{z,r} on the discrete ball boundary.
#[derive(Debug, Clone)]
pub struct FrozenComparison {
    /// v, embedded in a full-grid field (zero outside the ball).
    pub v: DiscreteField,
    /// ‖∇v‖_{L∞(B_{2r/3}(z))} over cell centers.
    pub sup_grad_inner: f64,
    /// ‖∇v‖²_{L²} / ‖∇(u − ℓ)‖²_{L²} over the ball cells (Gauss rule).
    pub energy_ratio: f64,
    pub iterations: usize,
}

/// Minimum cells per radius for the frozen comparison's sub-solve.
pub const MIN_FROZEN_CELLS_PER_RADIUS: f64 = 16.0;

pub fn frozen_comparison(
    p: &TransmissionProblem,
    u: &DiscreteField,
    z: &[f64],
    r: f64,
) -> Result<FrozenComparison> {
    let grid = *u.grid();
    let n = grid.dim();
    let m = u.components();
    let h = grid.h();
    if r < MIN_FROZEN_CELLS_PER_RADIUS * h {
        return Err(Error::Resolution(format!(
            "frozen comparison needs r ≥ {MIN_FROZEN_CELLS_PER_RADIUS} h, got r = {r}, h = {h}"
        )));
    }
    check_ball_in_unit(z, r)?;
    p.verify_conditions(VERIFY_SAMPLES)?;

    let fit = affine_fit(u, z, r)?;

    // staircase ball: cells with every corner within r of z
    let r2 = r * r;
    let corners = 1usize << n;
    let quad = ball_quadrature(&grid, z, r);
    let mut active = Vec::new();
    for &(cell, _) in &quad.cells {
        let origin = grid.cell_origin(cell);
        let inside = (0..corners).all(|mask| {
            let mut d2 = 0.0;
            for d in 0..n {
                let x = origin[d] + if (mask >> d) & 1 == 1 { h } else { 0.0 };
                d2 += (x - z[d]) * (x - z[d]);
            }
            d2 <= r2
        });
        if inside {
            active.push(cell);
        }
    }
    if active.is_empty() {
        return Err(Error::Resolution("staircase ball has no cells".into()));
    }
    let active_set: std::collections::BTreeSet<usize> = active.iter().copied().collect();

    // node classification: a node is constrained when any adjacent cell
    // is missing from the active set
    let mut node_set: std::collections::BTreeMap<usize, bool> = std::collections::BTreeMap::new();
    let cps = grid.cells_per_side();
    for &cell in &active {
        for node in grid.cell_corner_nodes(cell) {
            let coords = grid.node_coords(node);
            let mut interior = true;
            let mut adj = vec![0usize; n];
            'adj: for mask in 0..corners {
                for d in 0..n {
                    let c = coords[d] as isize - (((mask >> d) & 1) as isize);
                    if c < 0 || c >= cps as isize {
                        interior = false;
                        break 'adj;
                    }
                    adj[d] = c as usize;
                }
                if !active_set.contains(&grid.cell_index(&adj)) {
                    interior = false;
                    break;
                }
            }
            node_set.entry(node).and_modify(|e| *e &= interior).or_insert(interior);
        }
    }

    let nodes: Vec<usize> = node_set.keys().copied().collect();
    let node_local: std::collections::BTreeMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, &nd)| (nd, i)).collect();
    let ndof = m * nodes.len();

    // constant-coefficient stiffness with tensor A(z) over active cells
    let tensor = p.tensor_a.eval(z, 0.0);
    let rule_offset = 0.5 / 3.0f64.sqrt();
    let gauss_1d = [0.5 - rule_offset, 0.5 + rule_offset];
    let detj = h.powi(n as i32);
    let gauss_w = 0.5f64.powi(n as i32);

    let mut trips: Vec<(u32, u32, f64)> = Vec::new();
    for &cell in &active {
        let ldof = corners * m;
        let mut k_local = vec![0.0; ldof * ldof];
        for gmask in 0..corners {
            let gp: Vec<f64> = (0..n).map(|d| gauss_1d[(gmask >> d) & 1]).collect();
            let mut dphi = vec![vec![0.0; n]; corners];
            for a in 0..corners {
                for d in 0..n {
                    let mut g = if (a >> d) & 1 == 1 { 1.0 } else { -1.0 };
                    for (e, &l) in gp.iter().enumerate() {
                        if e != d {
                            g *= if (a >> e) & 1 == 1 { l } else { 1.0 - l };
                        }
                    }
                    dphi[a][d] = g;
                }
            }
            for pdof in 0..ldof {
                let (ai, aa) = (pdof / corners, pdof % corners);
                for qdof in pdof..ldof {
                    let (bj, bb) = (qdof / corners, qdof % corners);
                    let mut acc = 0.0;
                    for al in 0..n {
                        for be in 0..n {
                            acc += dphi[aa][al] * tensor.get(ai, bj, al, be) * dphi[bb][be];
                        }
                    }
                    k_local[pdof * ldof + qdof] += gauss_w * detj / (h * h) * acc;
                }
            }
        }
        for pdof in 0..ldof {
            for qdof in 0..pdof {
                k_local[pdof * ldof + qdof] = k_local[qdof * ldof + pdof];
            }
        }
        let cell_nodes = grid.cell_corner_nodes(cell);
        for pdof in 0..ldof {
            let (ai, aa) = (pdof / corners, pdof % corners);
            let row = ai * nodes.len() + node_local[&cell_nodes[aa]];
            for qdof in 0..ldof {
                let (bj, bb) = (qdof / corners, qdof % corners);
                let col = bj * nodes.len() + node_local[&cell_nodes[bb]];
                let v = k_local[pdof * ldof + qdof];
                if v != 0.0 {
                    trips.push((row as u32, col as u32, v));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(ndof, ndof, trips);

    // boundary data w = u − ℓ on constrained nodes
    let mut dirichlet: Vec<Option<f64>> = vec![None; ndof];
    let nn_full = grid.node_count();
    for (&node, &interior) in &node_set {
        if !interior {
            let x = grid.node_point(node);
            let lv = fit.eval(&x);
            for c in 0..m {
                let w = u.values()[c * nn_full + node] - lv[c];
                dirichlet[c * nodes.len() + node_local[&node]] = Some(w);
            }
        }
    }

    let elim = EliminatedSystem::new(&matrix, &dirichlet);
    let values: Vec<f64> = dirichlet.iter().map(|d| d.unwrap_or(0.0)).collect();
    let b = elim.fold_rhs(&vec![0.0; ndof], &values);
    let (sol, stats) = elim.solve(&b, Some(&values), 1e-13, 50_000)?;

    // embed v into a full-grid field
    let mut v = DiscreteField::zeros(grid, m);
    for (&node, _) in &node_set {
        for c in 0..m {
            v.values_mut()[c * nn_full + node] = sol[c * nodes.len() + node_local[&node]];
        }
    }

    // inner sup over cell centers in B_{2r/3}(z)
    let inner_r2 = (2.0 * r / 3.0) * (2.0 * r / 3.0);
    let mut sup_grad_inner = 0.0f64;
    for &cell in &active {
        let center = grid.cell_center(cell);
        let d2: f64 = center.iter().zip(z).map(|(c, zi)| (c - zi) * (c - zi)).sum();
        if d2 < inner_r2 {
            let g = v.gradient_at(cell);
            sup_grad_inner = sup_grad_inner.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
        }
    }

    // Gauss-rule energies over the active cells (the assembly quadrature,
    // so the discrete minimization property transfers to the ratio)
    let mut energy_v = 0.0;
    let mut energy_w = 0.0;
    for &cell in &active {
        let origin = grid.cell_origin(cell);
        for gmask in 0..corners {
            let gp: Vec<f64> =
                (0..n).map(|d| origin[d] + h * gauss_1d[(gmask >> d) & 1]).collect();
            let (_, gv) = v.eval_with_gradient(&gp)?;
            let (_, gu) = u.eval_with_gradient(&gp)?;
            let mut dev = 0.0;
            for c in 0..m {
                for d in 0..n {
                    let gw = gu[c * n + d] - fit.gradient[c * n + d];
                    dev += gw * gw;
                }
            }
            energy_v += gauss_w * detj * gv.iter().map(|x| x * x).sum::<f64>();
            energy_w += gauss_w * detj * dev;
        }
    }
    let energy_ratio = if energy_w > 1e-30 { energy_v / energy_w } else { 0.0 };

    Ok(FrozenComparison { v, sup_grad_inner, energy_ratio, iterations: stats.iterations })
}
