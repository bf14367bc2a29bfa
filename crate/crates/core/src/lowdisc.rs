//! Fixed low-discrepancy sampling.
//!
//! The pipeline contains no randomness; wherever "sampled points" are
//! needed (condition verification, oracle residual checks, pair
//! sampling) they come from the Halton sequence, so repeated runs are
//! bit-identical.

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical-inverse of `index` in the given base, in [0, 1).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base) as f64 * inv;
        index /= base;
        inv /= base as f64;
    }
    result
}

/// The `index`-th Halton point in [0,1)^dim (index starts at 1 to skip the origin).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton dimension too large");
    (0..dim).map(|d| radical_inverse(index, PRIMES[d])).collect()
}

/// The `index`-th Halton point mapped to the cube [-1, 1]^dim.
pub fn halton_in_cube(index: u64, dim: usize) -> Vec<f64> {
    halton(index, dim).into_iter().map(|v| 2.0 * v - 1.0).collect()
}

/// Deterministic sequence of points in the open unit ball of R^dim,
/// produced by rejection from the Halton cube sequence.
pub fn halton_in_ball(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut idx = 1u64;
    while out.len() < count {
        let p = halton_in_cube(idx, dim);
        if p.iter().map(|v| v * v).sum::<f64>() < 1.0 {
            out.push(p);
        }
        idx += 1;
    }
    out
}

/// Deterministic set of unit directions in R^dim: coordinate axes, all
/// two-axis diagonals, then Halton-generated directions up to `count`.
pub fn direction_set(count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for d in 0..dim {
        let mut e = vec![0.0; dim];
        e[d] = 1.0;
        out.push(e);
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..dim {
        for b in (a + 1)..dim {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[a] = inv_sqrt2;
                e[b] = sign * inv_sqrt2;
                out.push(e);
            }
        }
    }
    let mut idx = 1u64;
    while out.len() < count {
        let mut v = halton_in_cube(idx, dim);
        idx += 1;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        out.push(v);
    }
    out.truncate(count);
    out
}
