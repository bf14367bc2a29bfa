//! Coefficient tensors A, B: fields x ↦ (a_{ij}^{αβ}) with declared
//! ellipticity, boundedness, and Dini-regularity metadata.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::modulus::Modulus;

/// A single tensor value (a_{ij}^{αβ}) for an m-component system in n
/// space dimensions, stored flat with index ((i*m + j)*n + α)*n + β.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    pub n: usize,
    pub m: usize,
    entries: Vec<f64>,
}

impl TensorValue {
    pub fn zeros(n: usize, m: usize) -> Self {
        TensorValue { n, m, entries: vec![0.0; n * n * m * m] }
    }

    /// scale · δ_{ij} δ_{αβ}: the identity-block tensor.
    pub fn identity_block(n: usize, m: usize, scale: f64) -> Self {
        let mut t = Self::zeros(n, m);
        for i in 0..m {
            for al in 0..n {
                t.set(i, i, al, al, scale);
            }
        }
        t
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, al: usize, be: usize) -> usize {
        ((i * self.m + j) * self.n + al) * self.n + be
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, al: usize, be: usize) -> f64 {
        self.entries[self.idx(i, j, al, be)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, al: usize, be: usize, v: f64) {
        let k = self.idx(i, j, al, be);
        self.entries[k] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn scaled(&self, s: f64) -> Self {
        TensorValue {
            n: self.n,
            m: self.m,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }

    /// The quadratic form a_{ij}^{αβ} ξ_α^i ξ_β^j with ξ stored as ξ[i*n + α].
    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.m * self.n);
        let mut acc = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                for al in 0..self.n {
                    for be in 0..self.n {
                        acc += self.get(i, j, al, be) * xi[i * self.n + al] * xi[j * self.n + be];
                    }
                }
            }
        }
        acc
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Largest deviation from symmetry in the pair (i,α) ↔ (j,β).
    pub fn pair_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m {
            for j in 0..self.m {
                for al in 0..self.n {
                    for be in 0..self.n {
                        worst = worst.max((self.get(i, j, al, be) - self.get(j, i, be, al)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_entry_distance(&self, other: &TensorValue) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
    }
}

/// A scalar field used to modulate the identity-block tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    /// c0 + g · x
    Affine { c0: f64, grad: Vec<f64> },
    /// c0 + c1 |x|
    RadialAffine { c0: f64, c1: f64 },
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Affine { c0, grad } => {
                c0 + grad.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>()
            }
            ScalarField::RadialAffine { c0, c1 } => {
                c0 + c1 * x.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        }
    }
}

type TensorFn = dyn Fn(&[f64], f64) -> TensorValue + Send + Sync;

/// How tensor entries vary over the domain (and, for parabolic runs, time).
#[derive(Clone)]
pub enum TensorField {
    Constant(TensorValue),
    /// field(x) · identity-block
    ScalarIdentity(ScalarField),
    /// base + Σ_k x_k slope_k
    AffineInX { base: TensorValue, slopes: Vec<TensorValue> },
    /// Library-level escape hatch; receives (x, t).
    Custom(Arc<TensorFn>),
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorField::Constant(t) => f.debug_tuple("Constant").field(t).finish(),
            TensorField::ScalarIdentity(s) => f.debug_tuple("ScalarIdentity").field(s).finish(),
            TensorField::AffineInX { .. } => f.write_str("AffineInX{..}"),
            TensorField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A coefficient tensor with its declared structure constants.
#[derive(Debug, Clone)]
pub struct CoefficientTensor {
    pub n: usize,
    pub m: usize,
    pub field: TensorField,
    /// Declared ellipticity constant λ ∈ (0, 1).
    pub lambda: f64,
    /// Declared bound on the Dini seminorm.
    pub dini_bound: f64,
    pub modulus: Modulus,
}

impl CoefficientTensor {
    pub fn new(
        n: usize,
        m: usize,
        field: TensorField,
        lambda: f64,
        dini_bound: f64,
        modulus: Modulus,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Parameter(format!("ellipticity constant {lambda} outside (0,1)")));
        }
        if dini_bound < 0.0 {
            return Err(Error::Parameter("Dini bound must be non-negative".into()));
        }
        Ok(CoefficientTensor { n, m, field, lambda, dini_bound, modulus })
    }

    /// Constant scalar multiple of the identity block.
    pub fn constant_scalar(n: usize, m: usize, value: f64, lambda: f64) -> Result<Self> {
        Self::new(
            n,
            m,
            TensorField::Constant(TensorValue::identity_block(n, m, value)),
            lambda,
            1.0,
            Modulus::power(1.0, 1.0)?,
        )
    }

    pub fn eval(&self, x: &[f64], t: f64) -> TensorValue {
        match &self.field {
            TensorField::Constant(v) => v.clone(),
            TensorField::ScalarIdentity(s) => TensorValue::identity_block(self.n, self.m, s.eval(x)),
            TensorField::AffineInX { base, slopes } => {
                let mut v = base.clone();
                for (k, slope) in slopes.iter().enumerate() {
                    for (dst, src) in v.entries.iter_mut().zip(&slope.entries) {
                        *dst += x[k] * src;
                    }
                }
                v
            }
            TensorField::Custom(f) => f(x, t),
        }
    }

    /// Whether the entries can change with time.
    pub fn is_time_dependent(&self) -> bool {
        matches!(self.field, TensorField::Custom(_))
    }
}
