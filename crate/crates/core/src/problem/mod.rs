//! Transmission-problem instances: tensors A and B, the phase region D,
//! boundary data, and optional divergence-form forcing.

pub mod domain;
pub mod tensor;

use std::fmt;
use std::sync::Arc;

pub use domain::{
    parabolic_rescaled_density, parabolic_rescaled_density_within, rescaled_density,
    rescaled_density_within, IndicatorDomain, Motion, Shape, MIN_DENSITY_RESOLUTION,
};
pub use tensor::{CoefficientTensor, ScalarField, TensorField, TensorValue};

use crate::error::{Error, Result};
use crate::lowdisc;

/// Boundary data g(x, t) ∈ R^m (elliptic callers pass t = 0).
pub type BoundaryFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;
/// Divergence-form forcing F(x, t) ∈ R^{m·n}, stored as F[i*n + α].
pub type ForcingFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct TransmissionProblem {
    pub n: usize,
    pub m: usize,
    /// Coefficient away from D; must satisfy ellipticity, boundedness and
    /// Dini regularity.
    pub tensor_a: CoefficientTensor,
    /// Coefficient on D; only ellipticity and boundedness are required.
    pub tensor_b: CoefficientTensor,
    pub domain: IndicatorDomain,
    pub boundary: Arc<BoundaryFn>,
    pub forcing: Option<Arc<ForcingFn>>,
}

impl fmt::Debug for TransmissionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransmissionProblem")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("tensor_a", &self.tensor_a)
            .field("tensor_b", &self.tensor_b)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl TransmissionProblem {
    pub fn new(
        tensor_a: CoefficientTensor,
        tensor_b: CoefficientTensor,
        domain: IndicatorDomain,
        boundary: Arc<BoundaryFn>,
    ) -> Result<Self> {
        if tensor_a.n != tensor_b.n || tensor_a.m != tensor_b.m {
            return Err(Error::Parameter("tensors A and B must share (n, m)".into()));
        }
        Ok(TransmissionProblem {
            n: tensor_a.n,
            m: tensor_a.m,
            tensor_a,
            tensor_b,
            domain,
            boundary,
            forcing: None,
        })
    }

    pub fn with_forcing(mut self, forcing: Arc<ForcingFn>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    /// Scalar two-phase problem: a·I away from D, b·I on D.
    pub fn scalar_two_phase(
        n: usize,
        a: f64,
        b: f64,
        domain: IndicatorDomain,
        boundary: Arc<BoundaryFn>,
    ) -> Result<Self> {
        if a <= 0.0 || b <= 0.0 {
            return Err(Error::Parameter("phase coefficients must be positive".into()));
        }
        // λ must sit below min(a, b) and below 1/max(a, b).
        let lambda = (a.min(b).min(1.0 / a.max(b)) * 0.8).min(0.9);
        let ta = CoefficientTensor::constant_scalar(n, 1, a, lambda)?;
        let tb = CoefficientTensor::constant_scalar(n, 1, b, lambda)?;
        TransmissionProblem::new(ta, tb, domain, boundary)
    }

    /// The effective tensor A + (B - A) χ_D at a point (elliptic, t = 0).
    pub fn effective_tensor(&self, x: &[f64]) -> TensorValue {
        self.effective_tensor_at(x, 0.0)
    }

    pub fn effective_tensor_at(&self, x: &[f64], t: f64) -> TensorValue {
        if self.domain.contains_at(x, t) {
            self.tensor_b.eval(x, t)
        } else {
            self.tensor_a.eval(x, t)
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        self.domain.is_time_dependent()
            || self.tensor_a.is_time_dependent()
            || self.tensor_b.is_time_dependent()
    }

    /// Sample the structure conditions on quasi-random points and
    /// directions: ellipticity (strong Legendre form), boundedness, and
    /// the Dini seminorm of A. Violations return `Error::Conditions`
    /// carrying the witness; the report carries the observed extrema.
    pub fn verify_conditions(&self, samples: usize) -> Result<ConditionsReport> {
        self.verify_conditions_at(samples, 0.0)
    }

    pub fn verify_conditions_at(&self, samples: usize, t: f64) -> Result<ConditionsReport> {
        if samples == 0 {
            return Err(Error::Parameter("verify_conditions needs samples >= 1".into()));
        }
        let points = lowdisc::halton_in_ball(samples, self.n);
        let dirs = lowdisc::direction_set(8.max(2 * self.n * self.m), self.n * self.m);

        let mut report = ConditionsReport {
            lambda_declared: self.tensor_a.lambda.min(self.tensor_b.lambda),
            bound_declared: 1.0 / self.tensor_a.lambda.min(self.tensor_b.lambda),
            dini_declared: self.tensor_a.dini_bound,
            lambda_observed: f64::INFINITY,
            bound_observed: 0.0,
            dini_seminorm_observed: 0.0,
            samples,
            violation: None,
        };

        for x in &points {
            for (name, tensor) in [("A", &self.tensor_a), ("B", &self.tensor_b)] {
                let v = tensor.eval(x, t);
                let bound = v.max_abs_entry();
                report.bound_observed = report.bound_observed.max(bound);
                if bound > 1.0 / tensor.lambda + 1e-12 {
                    report.violation = Some(ConditionViolation {
                        condition: format!("boundedness of {name}: |entry| = {bound} > 1/lambda"),
                        point: x.clone(),
                        direction: None,
                    });
                    return Err(report.into_error());
                }
                for xi in &dirs {
                    let q = v.quadratic_form(xi);
                    report.lambda_observed = report.lambda_observed.min(q);
                    if q < tensor.lambda - 1e-12 {
                        report.violation = Some(ConditionViolation {
                            condition: format!(
                                "ellipticity of {name}: xi·({name} xi) = {q} < lambda = {}",
                                tensor.lambda
                            ),
                            point: x.clone(),
                            direction: Some(xi.clone()),
                        });
                        return Err(report.into_error());
                    }
                }
            }
        }

        // Dini quotient |a(x) - a(y)| / ω(|x - y|) for A only (B is merely
        // bounded measurable). Pairs: consecutive Halton points plus short
        // dyadic offsets, which probe small separations.
        let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for w in points.windows(2) {
            pairs.push((w[0].clone(), w[1].clone()));
        }
        for (i, x) in points.iter().enumerate() {
            let delta = 2.0f64.powi(-((i % 8) as i32 + 2));
            let mut y = x.clone();
            y[i % self.n] += delta;
            if y.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                pairs.push((x.clone(), y));
            }
        }
        for (x, y) in &pairs {
            let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist < 1e-14 {
                continue;
            }
            let va = self.tensor_a.eval(x, t);
            let vb = self.tensor_a.eval(y, t);
            let omega = self.tensor_a.modulus.eval(dist.min(1.0))?;
            let quotient = va.max_entry_distance(&vb) / omega;
            report.dini_seminorm_observed = report.dini_seminorm_observed.max(quotient);
            if quotient > self.tensor_a.dini_bound + 1e-9 {
                report.violation = Some(ConditionViolation {
                    condition: format!(
                        "Dini seminorm of A: quotient {quotient} exceeds declared bound {}",
                        self.tensor_a.dini_bound
                    ),
                    point: x.clone(),
                    direction: Some(y.clone()),
                });
                return Err(report.into_error());
            }
        }

        Ok(report)
    }

    /// Structural fingerprint used in run logs: hashes dimensions,
    /// declared constants, and tensor/domain/boundary samples at fixed
    /// deterministic points.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.n as u64);
        h.write_u64(self.m as u64);
        h.write_f64(self.tensor_a.lambda);
        h.write_f64(self.tensor_b.lambda);
        h.write_f64(self.tensor_a.dini_bound);
        for (i, x) in lowdisc::halton_in_ball(16, self.n).iter().enumerate() {
            let t = -(i as f64) / 16.0;
            for v in self.tensor_a.eval(x, t).entries() {
                h.write_f64(*v);
            }
            for v in self.tensor_b.eval(x, t).entries() {
                h.write_f64(*v);
            }
            h.write_u64(self.domain.contains_at(x, t) as u64);
            let mut edge = x.clone();
            edge[0] = 1.0;
            for v in (self.boundary)(&edge, t) {
                h.write_f64(v);
            }
        }
        h.finish()
    }
}

#[derive(Debug, Clone)]
pub struct ConditionViolation {
    pub condition: String,
    pub point: Vec<f64>,
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ConditionsReport {
    pub lambda_declared: f64,
    pub lambda_observed: f64,
    pub bound_declared: f64,
    pub bound_observed: f64,
    pub dini_declared: f64,
    pub dini_seminorm_observed: f64,
    pub samples: usize,
    pub violation: Option<ConditionViolation>,
}

impl ConditionsReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }

    fn into_error(self) -> Error {
        let v = self.violation.as_ref().expect("violation present");
        let dir = v
            .direction
            .as_ref()
            .map(|d| format!(", witness direction/pair {d:?}"))
            .unwrap_or_default();
        Error::Conditions(format!("{} at witness point {:?}{dir}", v.condition, v.point))
    }
}

/// Minimal FNV-1a accumulator for deterministic fingerprints.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}
