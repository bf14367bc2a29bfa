//! Moduli of continuity and their Dini calculus.
//!
//! A modulus is a positive non-decreasing function on (0, 1]. The module
//! evaluates moduli, integrates ω(r)/r with a computable convergence
//! verdict, evaluates the composite modulus
//! ψ(ρ) = ρ^{n/2} + (ρ^n ∫_ρ^1 ω(τ)^{3n}/τ^{n+1} dτ)^{1/2} + ω(ρ),
//! and checks the weighted nested integral that makes ψ itself a Dini
//! modulus.

use crate::error::{Error, Result};
use crate::quad;

/// Tail increments must shrink by at least this factor per decade of
/// cutoffs for an integral to be declared convergent. This deliberately
/// separates power-law decay (geometric increments) from logarithmic
/// decay (increments with ratio tending to 1).
pub const TAIL_DECAY_FACTOR: f64 = 1.2;

/// Minimum number of whole decades needed before a verdict is issued.
const MIN_DECADES: usize = 4;

/// Number of trailing decade ratios examined for the verdict.
const VERDICT_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Modulus {
    /// ω(r) = scale · r^alpha
    Power { alpha: f64, scale: f64 },
    /// ω(r) = scale · (log(e/r))^{-p}
    LogPower { p: f64, scale: f64 },
    /// Piecewise-linear through sorted breakpoints (r, ω(r)) on (0, 1],
    /// constant extension below the first breakpoint and above the last.
    Tabulated { breakpoints: Vec<(f64, f64)> },
}

impl Modulus {
    pub fn power(alpha: f64, scale: f64) -> Result<Self> {
        if alpha <= 0.0 || scale <= 0.0 {
            return Err(Error::Parameter(format!(
                "power modulus needs alpha > 0 and scale > 0, got alpha={alpha}, scale={scale}"
            )));
        }
        Ok(Modulus::Power { alpha, scale })
    }

    pub fn log_power(p: f64, scale: f64) -> Result<Self> {
        if p <= 0.0 || scale <= 0.0 {
            return Err(Error::Parameter(format!(
                "log_power modulus needs p > 0 and scale > 0, got p={p}, scale={scale}"
            )));
        }
        Ok(Modulus::LogPower { p, scale })
    }

    /// Breakpoints must be strictly increasing in r within (0, 1] with
    /// positive, non-decreasing values.
    pub fn tabulated(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Parameter("tabulated modulus needs at least one breakpoint".into()));
        }
        for (i, &(r, v)) in breakpoints.iter().enumerate() {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Parameter(format!("breakpoint radius {r} outside (0,1]")));
            }
            if v <= 0.0 {
                return Err(Error::Parameter(format!("breakpoint value {v} not positive")));
            }
            if i > 0 {
                let (rp, vp) = breakpoints[i - 1];
                if r <= rp {
                    return Err(Error::Parameter("breakpoint radii must be strictly increasing".into()));
                }
                if v < vp {
                    return Err(Error::Parameter("breakpoint values must be non-decreasing".into()));
                }
            }
        }
        Ok(Modulus::Tabulated { breakpoints })
    }

    /// ω(r) for r in (0, 1].
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::Domain(format!("modulus evaluated at r={r} outside (0,1]")));
        }
        Ok(self.eval_unchecked(r))
    }

    fn eval_unchecked(&self, r: f64) -> f64 {
        match self {
            Modulus::Power { alpha, scale } => scale * r.powf(*alpha),
            Modulus::LogPower { p, scale } => scale * (std::f64::consts::E / r).ln().powf(-p),
            Modulus::Tabulated { breakpoints } => {
                let first = breakpoints[0];
                let last = breakpoints[breakpoints.len() - 1];
                if r <= first.0 {
                    return first.1;
                }
                if r >= last.0 {
                    return last.1;
                }
                let idx = breakpoints.partition_point(|&(br, _)| br < r);
                let (r0, v0) = breakpoints[idx - 1];
                let (r1, v1) = breakpoints[idx];
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// The modulus with all values multiplied by `factor` (used when a
    /// run chooses to rescale a non-conforming modulus).
    pub fn scaled(&self, factor: f64) -> Modulus {
        match self {
            Modulus::Power { alpha, scale } => Modulus::Power { alpha: *alpha, scale: scale * factor },
            Modulus::LogPower { p, scale } => Modulus::LogPower { p: *p, scale: scale * factor },
            Modulus::Tabulated { breakpoints } => Modulus::Tabulated {
                breakpoints: breakpoints.iter().map(|&(r, v)| (r, v * factor)).collect(),
            },
        }
    }

    /// Radii where the modulus is non-smooth (tabulated breakpoints);
    /// handed to the quadrature as fixed subdivision points.
    fn kink_radii(&self) -> Vec<f64> {
        match self {
            Modulus::Tabulated { breakpoints } => breakpoints.iter().map(|&(r, _)| r).collect(),
            _ => Vec::new(),
        }
    }

    /// ∫_{r_min}^1 ω(r)/r dr plus a convergence verdict for the r → 0 tail.
    ///
    /// The verdict compares the integral's increments over the decade
    /// cutoffs 10^-k: they must shrink by [`TAIL_DECAY_FACTOR`] per
    /// decade (once they have left the coarse range), otherwise the
    /// integral is flagged divergent.
    pub fn dini_integral(&self, r_min: f64, tol: f64) -> Result<(f64, bool)> {
        if !(r_min > 0.0 && r_min < 1.0) {
            return Err(Error::Parameter(format!("r_min={r_min} outside (0,1)")));
        }
        let f = |r: f64| self.eval_unchecked(r) / r;
        let increments = decade_increments(&f, r_min, tol, &self.kink_radii())?;
        let value: f64 = increments.iter().sum();
        Ok((value, tail_is_geometric(&increments)))
    }

    /// The products ω(r)·log(1/r) along a user-supplied radius sequence.
    /// For a Dini modulus these tend to zero; see `dini_integral` for the
    /// computable convergence proxy.
    pub fn log_decay_profile(&self, radii: &[f64]) -> Result<Vec<f64>> {
        radii
            .iter()
            .map(|&r| {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::Domain(format!("radius {r} outside (0,1)")));
                }
                Ok(self.eval_unchecked(r) * (1.0 / r).ln())
            })
            .collect()
    }

    /// ψ(ρ) = ρ^{n/2} + (ρ^n ∫_ρ^1 ω(τ)^{3n}/τ^{n+1} dτ)^{1/2} + ω(ρ),
    /// for ρ in (0, 1/2] and dimension n ≥ 1.
    pub fn psi(&self, rho: f64, n: usize) -> Result<f64> {
        if !(rho > 0.0 && rho <= 0.5) {
            return Err(Error::Domain(format!("psi radius {rho} outside (0, 1/2]")));
        }
        if n == 0 {
            return Err(Error::Parameter("psi needs dimension n >= 1".into()));
        }
        let nf = n as f64;
        let p = 3.0 * nf;
        let integrand = |tau: f64| self.eval_unchecked(tau).powf(p) / tau.powf(nf + 1.0);
        let mut breaks = quad::decade_breaks(rho, 1.0);
        breaks.extend(self.kink_radii());
        let inner =
            quad::integrate_segmented(integrand, rho, 1.0, &breaks, quad::REL_TOL, quad::ABS_FLOOR)?;
        Ok(rho.powf(nf / 2.0) + (rho.powf(nf) * inner).sqrt() + self.eval_unchecked(rho))
    }

    /// The nested integral
    /// ∫_{r_min}^1 r^{α/2-1} (∫_r^1 ω(ρ)^{2α}/ρ^{α+1} dρ)^{1/2} dr
    /// with the same decade-tail convergence verdict as `dini_integral`.
    /// Requires α > 1.
    pub fn nested_dini_integral(&self, alpha: f64, r_min: f64) -> Result<(f64, bool)> {
        if alpha <= 1.0 {
            return Err(Error::Parameter(format!("nested_dini_integral needs alpha > 1, got {alpha}")));
        }
        if !(r_min > 0.0 && r_min < 1.0) {
            return Err(Error::Parameter(format!("r_min={r_min} outside (0,1)")));
        }
        let kinks = self.kink_radii();
        let inner = |r: f64| -> f64 {
            if r >= 1.0 {
                return 0.0;
            }
            let integrand = |rho: f64| self.eval_unchecked(rho).powf(2.0 * alpha) / rho.powf(alpha + 1.0);
            let mut breaks = quad::decade_breaks(r, 1.0);
            breaks.extend(kinks.iter().copied());
            // Inner integrand is monotone and smooth between decades; a
            // slightly looser tolerance keeps the nested cost reasonable.
            quad::integrate_segmented(integrand, r, 1.0, &breaks, 1e-9, 1e-15).unwrap_or(f64::NAN)
        };
        let outer = |r: f64| r.powf(alpha / 2.0 - 1.0) * inner(r).max(0.0).sqrt();
        // √inner vanishes like √(1−r) at r = 1; fixed breakpoints crowd
        // the endpoint so the Kronrod error estimate stays honest there.
        let mut extra = near_one_breaks();
        extra.extend(kinks.iter().copied());
        let increments = decade_increments(&outer, r_min, quad::REL_TOL, &extra)?;
        let value: f64 = increments.iter().sum();
        if !value.is_finite() {
            return Err(Error::Quadrature { partial: value, estimate: f64::NAN });
        }
        Ok((value, tail_is_geometric(&increments)))
    }
}

/// Breakpoints accumulating at 1 for integrands with a √(1−r) endpoint.
fn near_one_breaks() -> Vec<f64> {
    (1..=9).map(|k| 1.0 - 10.0f64.powi(-k)).collect()
}

/// Integral increments over [10^-(k+1), 10^-k] ∩ [r_min, 1], coarsest first.
fn decade_increments<F: Fn(f64) -> f64>(
    f: &F,
    r_min: f64,
    rel_tol: f64,
    extra_breaks: &[f64],
) -> Result<Vec<f64>> {
    let mut incs = Vec::new();
    let mut hi = 1.0f64;
    while hi > r_min {
        let lo = (hi / 10.0).max(r_min);
        incs.push(quad::integrate_segmented(f, lo, hi, extra_breaks, rel_tol, quad::ABS_FLOOR)?);
        hi = lo;
    }
    Ok(incs)
}

/// Verdict: the trailing decade increments decay geometrically.
fn tail_is_geometric(increments: &[f64]) -> bool {
    if increments.len() < MIN_DECADES {
        // Not enough tail to judge; treat the request as too coarse to
        // certify convergence.
        return false;
    }
    let total: f64 = increments.iter().map(|v| v.abs()).sum();
    let floor = 1e-14 * (total + 1.0);
    let start = increments.len().saturating_sub(VERDICT_WINDOW + 1);
    for w in increments[start..].windows(2) {
        let (prev, next) = (w[0], w[1]);
        if next <= floor {
            // Tail has effectively vanished.
            return true;
        }
        if next > prev / TAIL_DECAY_FACTOR {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_eval() {
        let m = Modulus::power(1.0, 1.0).unwrap();
        assert_eq!(m.eval(0.5).unwrap(), 0.5);
        let m = Modulus::power(0.5, 2.0).unwrap();
        assert_relative_eq!(m.eval(0.25).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn log_power_eval() {
        // (log(e * e^3))^{-2} = 4^{-2} = 1/16
        let m = Modulus::log_power(2.0, 1.0).unwrap();
        assert_relative_eq!(m.eval((-3.0f64).exp()).unwrap(), 1.0 / 16.0, epsilon = 1e-14);
    }

    #[test]
    fn eval_domain_errors() {
        let m = Modulus::power(1.0, 1.0).unwrap();
        assert!(matches!(m.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(m.eval(1.5), Err(Error::Domain(_))));
        assert!(m.eval(1.0).is_ok());
    }

    #[test]
    fn tabulated_interpolation_and_extension() {
        let m = Modulus::tabulated(vec![(0.1, 0.2), (0.5, 0.6), (1.0, 1.0)]).unwrap();
        assert_relative_eq!(m.eval(0.3).unwrap(), 0.4, epsilon = 1e-15);
        // constant extension below the first breakpoint
        assert_eq!(m.eval(0.01).unwrap(), 0.2);
        assert_eq!(m.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn every_kind_is_monotone() {
        let kinds = [
            Modulus::power(0.37, 1.4).unwrap(),
            Modulus::log_power(1.3, 0.8).unwrap(),
            Modulus::tabulated(vec![(0.05, 0.1), (0.3, 0.1), (0.6, 0.55), (1.0, 0.9)]).unwrap(),
        ];
        for m in kinds {
            let mut prev = 0.0;
            for i in 1..=200 {
                let r = i as f64 / 200.0;
                let v = m.eval(r).unwrap();
                assert!(v >= prev, "{m:?} decreased at r={r}");
                assert!(v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(Modulus::tabulated(vec![]).is_err());
        assert!(Modulus::tabulated(vec![(0.5, 1.0), (0.5, 1.0)]).is_err());
        assert!(Modulus::tabulated(vec![(0.2, 1.0), (0.5, 0.5)]).is_err());
        assert!(Modulus::tabulated(vec![(0.2, -1.0)]).is_err());
    }

    #[test]
    fn dini_integral_power_closed_form() {
        // ∫_0^1 scale * r^{alpha-1} dr = scale / alpha
        for &(alpha, scale) in &[(1.0, 1.0), (0.5, 1.0), (2.0, 3.0), (0.25, 0.7)] {
            let m = Modulus::power(alpha, scale).unwrap();
            let r_min = 1e-18;
            let (v, convergent) = m.dini_integral(r_min, quad::REL_TOL).unwrap();
            let exact = scale / alpha * (1.0 - r_min.powf(alpha));
            assert!(convergent, "power alpha={alpha} must be convergent");
            assert_relative_eq!(v, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn dini_integral_log_power_diverges() {
        // ∫ dr/(r log(e/r)) = log log(e/r): divergent tail
        let m = Modulus::log_power(1.0, 1.0).unwrap();
        let (_, convergent) = m.dini_integral(1e-12, quad::REL_TOL).unwrap();
        assert!(!convergent);
    }

    #[test]
    fn constant_extension_tail_flagged() {
        // Constant extension toward 0 gives increments ~ c*ln(10): not Dini.
        let m = Modulus::tabulated(vec![(0.5, 0.3), (1.0, 0.6)]).unwrap();
        let (_, convergent) = m.dini_integral(1e-10, quad::REL_TOL).unwrap();
        assert!(!convergent);
    }

    #[test]
    fn log_decay_profile_values() {
        let m = Modulus::power(1.0, 1.0).unwrap();
        let v = m.log_decay_profile(&[(-1.0f64).exp()]).unwrap();
        assert_relative_eq!(v[0], (-1.0f64).exp(), epsilon = 1e-15);

        // Direct arithmetic oracle: 1e-6^{1/2} * log(1e6) = 1e-3 * 6 ln 10
        let m = Modulus::power(0.5, 1.0).unwrap();
        let v = m.log_decay_profile(&[1e-6]).unwrap();
        assert_relative_eq!(v[0], 1e-3 * (1e6f64).ln(), epsilon = 1e-12);
        assert_relative_eq!(v[0], 0.0138155, max_relative = 1e-4);
    }

    #[test]
    fn log_decay_profile_non_dini_tends_to_one() {
        // log(1/r)/log(e/r) -> 1: a non-Dini modulus fails the vanishing test.
        let m = Modulus::log_power(1.0, 1.0).unwrap();
        let radii: Vec<f64> = (10..40).map(|k| 2.0f64.powi(-k)).collect();
        let v = m.log_decay_profile(&radii).unwrap();
        let last = *v.last().unwrap();
        assert!(last > 0.9 && last < 1.0, "profile should approach 1, got {last}");
    }

    #[test]
    fn psi_closed_form_power() {
        // n=2, ω(τ)=τ: inner = ∫_ρ^1 τ^3 dτ = (1-ρ^4)/4, hand-evaluated.
        let m = Modulus::power(1.0, 1.0).unwrap();
        let rho: f64 = 0.5;
        let inner = (1.0 - rho.powi(4)) / 4.0;
        let expected = rho + (rho * rho * inner).sqrt() + rho;
        let v = m.psi(rho, 2).unwrap();
        assert_relative_eq!(v, expected, epsilon = 1e-10);
        assert_relative_eq!(v, 1.2420614, max_relative = 1e-6);
    }

    #[test]
    fn psi_monotone_and_vanishing() {
        // slow moduli (alpha = 1/4) need deep scales before psi is small
        for m in [
            Modulus::power(1.0, 1.0).unwrap(),
            Modulus::power(0.5, 0.8).unwrap(),
            Modulus::power(0.25, 1.0).unwrap(),
        ] {
            let rhos: Vec<f64> = (1..=40).map(|k| 0.5f64.powi(k)).collect();
            let vals: Vec<f64> = rhos.iter().map(|&r| m.psi(r, 2).unwrap()).collect();
            for w in vals.windows(2) {
                assert!(w[1] <= w[0] + 1e-6, "psi must be non-decreasing in rho");
            }
            assert!(*vals.last().unwrap() < 0.05, "psi must vanish as rho -> 0");
        }
    }

    #[test]
    fn nested_integral_matches_quadrature_oracle() {
        // omega = r, alpha = 3: inner has closed form (1 - r^3)/3; the outer
        // integral is evaluated by an independent Simpson oracle.
        let alpha = 3.0f64;
        let outer = |r: f64| r.powf(alpha / 2.0 - 1.0) * ((1.0 - r.powi(3)) / 3.0).sqrt();
        let r_min = 1e-6f64;
        // Simpson oracle (independent of quad.rs): log-spaced on
        // [r_min, 0.99], then desingularized near 1 via r = 1 − s² where
        // the integrand behaves like √(1−r).
        let simpson = |g: &dyn Fn(f64) -> f64, a: f64, b: f64, segments: usize| -> f64 {
            let dl = (b - a) / segments as f64;
            (0..segments)
                .map(|i| {
                    let x0 = a + i as f64 * dl;
                    let x2 = x0 + dl;
                    let x1 = 0.5 * (x0 + x2);
                    dl / 6.0 * (g(x0) + 4.0 * g(x1) + g(x2))
                })
                .sum()
        };
        let log_part = simpson(
            &|l: f64| {
                let r = l.exp();
                outer(r) * r // dr = r dl
            },
            r_min.ln(),
            0.99f64.ln(),
            20000,
        );
        let tail_part = simpson(
            &|s: f64| {
                let r = 1.0 - s * s;
                // √((1−r³)/3) = s · √((1+r+r²)/3)
                r.powf(alpha / 2.0 - 1.0) * s * ((1.0 + r + r * r) / 3.0).sqrt() * 2.0 * s
            },
            0.0,
            0.01f64.sqrt(),
            4000,
        );
        let oracle = log_part + tail_part;

        let m = Modulus::power(1.0, 1.0).unwrap();
        let (v, convergent) = m.nested_dini_integral(alpha, r_min).unwrap();
        assert!(convergent);
        assert_relative_eq!(v, oracle, max_relative = 1e-6);
    }

    #[test]
    fn nested_integral_rejects_alpha_below_one() {
        let m = Modulus::power(1.0, 1.0).unwrap();
        assert!(matches!(m.nested_dini_integral(1.0, 1e-6), Err(Error::Parameter(_))));
    }

    #[test]
    fn nested_integral_log_power_flagged() {
        // The decade tail of the outer integral decays like 1/k² whose
        // consecutive ratios approach 1; deep cutoffs expose the failure
        // of geometric decay.
        let m = Modulus::log_power(1.0, 1.0).unwrap();
        let (_, convergent) = m.nested_dini_integral(2.0, 1e-40).unwrap();
        assert!(!convergent);
    }
}
