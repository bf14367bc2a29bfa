//! Adaptive one-dimensional quadrature.
//!
//! Gauss–Kronrod 7/15 rule with bisection refinement of the worst
//! interval. Every nested integral in the crate goes through here, with
//! relative tolerance 1e-8 and absolute floor 1e-14 unless a caller
//! overrides them.

use crate::error::{Error, Result};

/// Default relative tolerance for all moduli quadratures.
pub const REL_TOL: f64 = 1e-8;
/// Absolute floor below which refinement stops.
pub const ABS_FLOOR: f64 = 1e-14;

const MAX_INTERVALS: usize = 4000;

// Kronrod 15-point abscissae on [-1, 1] (positive half; the rule is symmetric).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Embedded 7-point Gauss weights (abscissae XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7/K15 evaluation on [a, b]: returns (kronrod value, |K15 - G7|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);

    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Adaptively integrate `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Parameter(format!("bad integration bounds [{a}, {b}]")));
    }
    // (lo, hi, value, error estimate)
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(&f, a, b);
    segs.push((a, b, v, e));

    loop {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        let target = (rel_tol * total.abs()).max(abs_floor);
        if err <= target {
            return Ok(total);
        }
        if segs.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { partial: total, estimate: err });
        }
        // Split the interval with the largest error estimate.
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval at floating-point resolution; accept its value.
            let (v, _) = gk15(&f, lo, hi);
            segs.push((lo, hi, v, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
}

/// Integrate over [a, b] split at the given interior breakpoints.
///
/// Useful for integrands spanning many orders of magnitude in scale
/// (decade splits keep the adaptive depth bounded).
pub fn integrate_segmented<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(a);
    for &c in breaks {
        if c > a && c < b {
            cuts.push(c);
        }
    }
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(&f, w[0], w[1], rel_tol, abs_floor)?;
    }
    Ok(total)
}

/// Decade cutoffs 10^-1, 10^-2, ... lying strictly inside (lo, hi).
pub fn decade_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut c = 0.1;
    while c > lo {
        if c < hi {
            out.push(c);
        }
        c /= 10.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1e-12, 1e-15).unwrap();
        // antiderivative x^4/4 - x^2 + x
        assert_relative_eq!(v, (4.0 - 4.0 + 2.0) - (0.25 - 1.0 - 1.0), epsilon = 1e-13);
    }

    #[test]
    fn near_singular_integrand() {
        // \int_eps^1 r^{-1/2} dr = 2(1 - sqrt(eps))
        let eps = 1e-12;
        let v = integrate_segmented(|r| r.powf(-0.5), eps, 1.0, &decade_breaks(eps, 1.0), 1e-10, 1e-14)
            .unwrap();
        assert_relative_eq!(v, 2.0 * (1.0 - eps.sqrt()), max_relative = 1e-9);
    }

    #[test]
    fn oscillatory() {
        let v = integrate(|x| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-10, 1e-14).unwrap();
        let exact = (1.0 - (10.0 * std::f64::consts::PI).cos()) / 10.0;
        assert_relative_eq!(v, exact, epsilon = 1e-10);
    }
}
