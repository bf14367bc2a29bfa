//! The phase region D as an indicator over analytic shapes, and the
//! rescaled densities
//!
//! ```text
//! D_{z,r} = {x ∈ B_1 : rx + z ∈ B_r(z) ∩ D}
//! D_{Z,r} = {(x,t) ∈ Q_1 : (rx, r²t) + Z ∈ Q_r(Z) ∩ D}
//! ```
//!
//! measured by deterministic midpoint quadrature.

use crate::error::{Error, Result};

/// Analytic shapes. Spatial membership is x-only; `TimeSlab` and the
/// `Motion` wrapper make space-time sets expressible for parabolic runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Empty,
    /// {x : x·normal > offset}
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    /// {x : (x-apex)_axis < -|(x-apex)_⊥|^{1/gamma}} ∩ B_1.
    /// gamma < 1 gives a region that degenerates at the apex; gamma = 1 is
    /// a Lipschitz cone.
    Cusp { gamma: f64, apex: Vec<f64>, axis: usize },
    /// {(x,t) : t < before} — only meaningful in space-time queries.
    TimeSlab { before: f64 },
    Complement(Box<Shape>),
    Union(Vec<Shape>),
}

impl Shape {
    fn contains(&self, x: &[f64], t: f64) -> bool {
        match self {
            Shape::Empty => false,
            Shape::HalfSpace { normal, offset } => {
                normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() > *offset
            }
            Shape::Ball { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                d2 < radius * radius
            }
            Shape::Cusp { gamma, apex, axis } => {
                let in_unit_ball = x.iter().map(|v| v * v).sum::<f64>() < 1.0;
                if !in_unit_ball {
                    return false;
                }
                let mut perp2 = 0.0;
                for (d, (&xv, &av)) in x.iter().zip(apex.iter()).enumerate() {
                    if d != *axis {
                        let y = xv - av;
                        perp2 += y * y;
                    }
                }
                let y_axis = x[*axis] - apex[*axis];
                y_axis < -perp2.sqrt().powf(1.0 / gamma)
            }
            Shape::TimeSlab { before } => t < *before,
            Shape::Complement(inner) => !inner.contains(x, t),
            Shape::Union(parts) => parts.iter().any(|s| s.contains(x, t)),
        }
    }
}

/// How the region moves in time.
#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Static,
    /// The shape translated by velocity·t.
    Moving(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorDomain {
    pub shape: Shape,
    pub motion: Motion,
}

impl IndicatorDomain {
    pub fn new(shape: Shape) -> Result<Self> {
        validate_shape(&shape)?;
        Ok(IndicatorDomain { shape, motion: Motion::Static })
    }

    pub fn moving(shape: Shape, velocity: Vec<f64>) -> Result<Self> {
        validate_shape(&shape)?;
        Ok(IndicatorDomain { shape, motion: Motion::Moving(velocity) })
    }

    pub fn empty() -> Self {
        IndicatorDomain { shape: Shape::Empty, motion: Motion::Static }
    }

    pub fn half_space(normal: Vec<f64>, offset: f64) -> Result<Self> {
        Self::new(Shape::HalfSpace { normal, offset })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(Shape::Ball { center, radius })
    }

    pub fn cusp(gamma: f64, apex: Vec<f64>, axis: usize) -> Result<Self> {
        Self::new(Shape::Cusp { gamma, apex, axis })
    }

    /// χ_D(x) at time 0.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_at(x, 0.0)
    }

    /// χ_D(x, t).
    pub fn contains_at(&self, x: &[f64], t: f64) -> bool {
        match &self.motion {
            Motion::Static => self.shape.contains(x, t),
            Motion::Moving(v) => {
                let shifted: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| xi - vi * t).collect();
                self.shape.contains(&shifted, t)
            }
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.motion, Motion::Moving(_)) || shape_mentions_time(&self.shape)
    }
}

fn shape_mentions_time(s: &Shape) -> bool {
    match s {
        Shape::TimeSlab { .. } => true,
        Shape::Complement(inner) => shape_mentions_time(inner),
        Shape::Union(parts) => parts.iter().any(shape_mentions_time),
        _ => false,
    }
}

fn validate_shape(s: &Shape) -> Result<()> {
    match s {
        Shape::HalfSpace { normal, .. } => {
            let n2: f64 = normal.iter().map(|v| v * v).sum();
            if n2 <= 0.0 {
                return Err(Error::Parameter("half-space normal must be nonzero".into()));
            }
        }
        Shape::Ball { radius, .. } => {
            if *radius <= 0.0 {
                return Err(Error::Parameter("ball radius must be positive".into()));
            }
        }
        Shape::Cusp { gamma, apex, axis } => {
            if *gamma <= 0.0 {
                return Err(Error::Parameter("cusp exponent must be positive".into()));
            }
            if *axis >= apex.len() {
                return Err(Error::Parameter("cusp axis outside dimension".into()));
            }
        }
        Shape::Complement(inner) => validate_shape(inner)?,
        Shape::Union(parts) => {
            for p in parts {
                validate_shape(p)?;
            }
        }
        Shape::Empty | Shape::TimeSlab { .. } => {}
    }
    Ok(())
}

pub const MIN_DENSITY_RESOLUTION: usize = 32;

/// |D_{z,r}|: deterministic midpoint quadrature on a resolution^n subgrid
/// of [-1,1]^n, counting points x with |x| < 1 and rx + z ∈ D.
/// Equals r^{-n} |D ∩ B_r(z)|.
pub fn rescaled_density(d: &IndicatorDomain, z: &[f64], r: f64, resolution: usize) -> Result<f64> {
    rescaled_density_within(d, z, r, resolution, 1.0)
}

/// |D_{z,r} ∩ B_rho| with the same quadrature; rho = 1 recovers
/// `rescaled_density`, rho = 1/2 feeds the doubling identity
/// |D_{z,r/2}| = 2^n |D_{z,r} ∩ B_{1/2}|.
pub fn rescaled_density_within(
    d: &IndicatorDomain,
    z: &[f64],
    r: f64,
    resolution: usize,
    rho: f64,
) -> Result<f64> {
    let n = z.len();
    check_density_args(z, r, resolution)?;

    let h = 2.0 / resolution as f64;
    let cell = h.powi(n as i32);
    let mut count = 0usize;
    let mut x = vec![0.0f64; n];
    let mut point = vec![0.0f64; n];
    let mut idx = vec![0usize; n];
    loop {
        for (d_, &i) in idx.iter().enumerate() {
            x[d_] = -1.0 + (i as f64 + 0.5) * h;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < rho * rho {
            for d_ in 0..n {
                point[d_] = r * x[d_] + z[d_];
            }
            if d.contains(&point) {
                count += 1;
            }
        }
        // mixed-radix increment
        let mut carry = true;
        for v in idx.iter_mut() {
            if carry {
                *v += 1;
                if *v == resolution {
                    *v = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    Ok(count as f64 * cell)
}

/// |D_{Z,r}|: the (n+1)-dimensional analogue with parabolic scaling
/// (rx, r²t) + Z over Q_1 = B_1 × (-1, 0).
pub fn parabolic_rescaled_density(
    d: &IndicatorDomain,
    z: &[f64],
    s: f64,
    r: f64,
    resolution: usize,
) -> Result<f64> {
    parabolic_rescaled_density_within(d, z, s, r, resolution, 1.0)
}

/// |D_{Z,r} ∩ Q_rho| (Q_rho = B_rho × (-rho², 0)); rho = 1/2 feeds the
/// parabolic doubling identity with factor 2^{n+2}.
pub fn parabolic_rescaled_density_within(
    d: &IndicatorDomain,
    z: &[f64],
    s: f64,
    r: f64,
    resolution: usize,
    rho: f64,
) -> Result<f64> {
    let n = z.len();
    if resolution < MIN_DENSITY_RESOLUTION {
        return Err(Error::Parameter(format!(
            "density resolution {resolution} below minimum {MIN_DENSITY_RESOLUTION}"
        )));
    }
    let z_norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if z_norm + r > 1.0 + 1e-12 || s > 1e-12 || s - r * r < -1.0 - 1e-12 {
        return Err(Error::Geometry(format!(
            "parabolic cylinder Q_{r}(({z:?}, {s})) not contained in Q_1"
        )));
    }

    let h = 2.0 / resolution as f64;
    let ht = 1.0 / resolution as f64;
    let cell = h.powi(n as i32) * ht;
    let mut count = 0usize;
    let mut x = vec![0.0f64; n];
    let mut point = vec![0.0f64; n];
    let mut idx = vec![0usize; n];
    loop {
        for (d_, &i) in idx.iter().enumerate() {
            x[d_] = -1.0 + (i as f64 + 0.5) * h;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < rho * rho {
            for d_ in 0..n {
                point[d_] = r * x[d_] + z[d_];
            }
            for j in 0..resolution {
                let t = -1.0 + (j as f64 + 0.5) * ht;
                if t >= -rho * rho && d.contains_at(&point, r * r * t + s) {
                    count += 1;
                }
            }
        }
        let mut carry = true;
        for v in idx.iter_mut() {
            if carry {
                *v += 1;
                if *v == resolution {
                    *v = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    Ok(count as f64 * cell)
}

fn check_density_args(z: &[f64], r: f64, resolution: usize) -> Result<()> {
    if resolution < MIN_DENSITY_RESOLUTION {
        return Err(Error::Parameter(format!(
            "density resolution {resolution} below minimum {MIN_DENSITY_RESOLUTION}"
        )));
    }
    if r <= 0.0 {
        return Err(Error::Parameter(format!("density radius {r} must be positive")));
    }
    // B_r(z) must lie inside the computational domain [-1,1]^n.
    for &zi in z {
        if zi.abs() + r > 1.0 + 1e-12 {
            return Err(Error::Geometry(format!("ball B_{r}({z:?}) leaves [-1,1]^n")));
        }
    }
    Ok(())
}
