//! Run configuration: a TOML file with nested sections (problem, grid,
//! solver, parabolic, analysis, modulus). Defaults are applied on load
//! and the effective configuration is echoed into the run log, from
//! which it re-parses to an equivalent run.
//!
//! A complete annotated example lives in `configs/flat_interface.toml`
//! at the repository root.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use translab_core::modulus::Modulus;
use translab_core::oracle::ScalarOracle;
use translab_core::problem::{
    CoefficientTensor, IndicatorDomain, ScalarField, Shape, TensorField, TensorValue,
    TransmissionProblem,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub parabolic: ParabolicConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Standalone modulus for `modulus-check`; falls back to the
    /// problem's tensor_a modulus when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ModulusSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub domain: ShapeConfig,
    #[serde(default)]
    pub motion: MotionConfig,
    pub tensor_a: TensorConfig,
    pub tensor_b: TensorConfig,
    pub boundary: BoundaryConfig,
    /// Closed-form reference attached to the run (boundary traces,
    /// error measurement in `sweep`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
}

fn default_n() -> usize {
    2
}
fn default_m() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Empty,
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Cusp { gamma: f64, apex: Vec<f64>, axis: usize },
    TimeSlab { before: f64 },
    Complement { inner: Box<ShapeConfig> },
    Union { parts: Vec<ShapeConfig> },
}

impl ShapeConfig {
    fn to_shape(&self) -> Shape {
        match self {
            ShapeConfig::Empty => Shape::Empty,
            ShapeConfig::HalfSpace { normal, offset } => {
                Shape::HalfSpace { normal: normal.clone(), offset: *offset }
            }
            ShapeConfig::Ball { center, radius } => {
                Shape::Ball { center: center.clone(), radius: *radius }
            }
            ShapeConfig::Cusp { gamma, apex, axis } => {
                Shape::Cusp { gamma: *gamma, apex: apex.clone(), axis: *axis }
            }
            ShapeConfig::TimeSlab { before } => Shape::TimeSlab { before: *before },
            ShapeConfig::Complement { inner } => Shape::Complement(Box::new(inner.to_shape())),
            ShapeConfig::Union { parts } => {
                Shape::Union(parts.iter().map(|p| p.to_shape()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionConfig {
    #[default]
    Static,
    Moving {
        velocity: Vec<f64>,
    },
}

// no deny_unknown_fields: serde cannot combine it with #[serde(flatten)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorConfig {
    #[serde(flatten)]
    pub field: TensorFieldConfig,
    pub lambda: f64,
    #[serde(default = "default_dini_bound")]
    pub dini_bound: f64,
    #[serde(default)]
    pub modulus: ModulusConfig,
}

fn default_dini_bound() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TensorFieldConfig {
    /// value · identity-block
    ConstantScalar { value: f64 },
    /// Full constant matrix `entries[i][j][alpha][beta]`.
    ConstantMatrix { entries: Vec<Vec<Vec<Vec<f64>>>> },
    /// scalar field × identity-block
    ScalarIdentity { field: ScalarFieldConfig },
    /// base + Σ_k x_k · `slopes[k]` (entries as in constant_matrix)
    AffineInX {
        base: Vec<Vec<Vec<Vec<f64>>>>,
        slopes: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFieldConfig {
    Constant { value: f64 },
    Affine { constant: f64, gradient: Vec<f64> },
    RadialAffine { constant: f64, slope: f64 },
}

impl ScalarFieldConfig {
    fn to_field(&self) -> ScalarField {
        match self {
            ScalarFieldConfig::Constant { value } => ScalarField::Constant(*value),
            ScalarFieldConfig::Affine { constant, gradient } => {
                ScalarField::Affine { c0: *constant, grad: gradient.clone() }
            }
            ScalarFieldConfig::RadialAffine { constant, slope } => {
                ScalarField::RadialAffine { c0: *constant, c1: *slope }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulusConfig {
    Power { alpha: f64, scale: f64 },
    LogPower { p: f64, scale: f64 },
    /// Breakpoints inline or loaded from a two-column CSV (r, omega).
    Tabulated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        breakpoints: Option<Vec<(f64, f64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
    },
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig::Power { alpha: 1.0, scale: 1.0 }
    }
}

impl ModulusConfig {
    pub fn build(&self, base_dir: &Path) -> Result<Modulus, CliError> {
        match self {
            ModulusConfig::Power { alpha, scale } => Ok(Modulus::power(*alpha, *scale)?),
            ModulusConfig::LogPower { p, scale } => Ok(Modulus::log_power(*p, *scale)?),
            ModulusConfig::Tabulated { breakpoints, csv } => {
                let points = match (breakpoints, csv) {
                    (Some(b), None) => b.clone(),
                    (None, Some(path)) => read_modulus_csv(&base_dir.join(path))?,
                    _ => {
                        return Err(CliError::validation(
                            "tabulated modulus needs exactly one of 'breakpoints' or 'csv'",
                        ))
                    }
                };
                Ok(Modulus::tabulated(points)?)
            }
        }
    }
}

fn read_modulus_csv(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read modulus CSV {path:?}: {e}")))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',');
        let parse = |v: Option<&str>| -> Result<f64, CliError> {
            v.map(str::trim)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::validation(format!("{path:?} line {}: expected 'r,omega'", lineno + 1))
                })
        };
        let r = parse(cols.next())?;
        let w = parse(cols.next())?;
        points.push((r, w));
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// Trace of the oracle declared in [problem.oracle].
    Oracle,
    /// Per-component affine data: `constant[c] + gradient[c]·x`.
    Affine { constant: Vec<f64>, gradient: Vec<Vec<f64>> },
    /// Per-component amplitude·cos(π wave·x + phase).
    Trig { amplitude: Vec<f64>, wave: Vec<Vec<f64>>, phase: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    FlatInterface { a: f64, b: f64 },
    DiskInclusion { k: f64, radius: f64 },
}

impl OracleConfig {
    pub fn to_oracle(self) -> ScalarOracle {
        match self {
            OracleConfig::FlatInterface { a, b } => ScalarOracle::FlatInterface { a, b },
            OracleConfig::DiskInclusion { k, radius } => {
                ScalarOracle::DiskInclusion { k, r_disk: radius }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_cells")]
    pub cells_per_side: usize,
}

fn default_cells() -> usize {
    64
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { cells_per_side: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    50_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-10, max_iter: 50_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicConfig {
    /// Time step; 0 means "h² of the grid".
    #[serde(default)]
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeConfig,
    /// Keep every k-th time level in the stored field.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_initial")]
    pub initial: InitialConfig,
}

fn default_scheme() -> SchemeConfig {
    SchemeConfig::BackwardEuler
}
fn default_snapshot_every() -> usize {
    1
}
fn default_initial() -> InitialConfig {
    InitialConfig::Zero
}

impl Default for ParabolicConfig {
    fn default() -> Self {
        ParabolicConfig {
            dt: 0.0,
            scheme: SchemeConfig::BackwardEuler,
            snapshot_every: 1,
            initial: InitialConfig::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    BackwardEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Zero,
    /// The static oracle field.
    Oracle,
    /// Π sin(π p_i x_i), optionally on top of the oracle field.
    Eigenmode {
        modes: Vec<u32>,
        amplitude: f64,
        #[serde(default)]
        add_oracle: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// "gridN" (N×N lattice on [-1/2,1/2]²) or explicit "x,y;x,y;..."
    #[serde(default = "default_centers")]
    pub centers: String,
    /// "r0:k" — k dyadic scales r0·2^{0..-(k-1)}.
    #[serde(default = "default_scales")]
    pub scales: String,
    /// "auto" (10 × norm sum) or a number.
    #[serde(default = "default_threshold")]
    pub threshold_m: ThresholdConfig,
    #[serde(default = "default_density_resolution")]
    pub density_resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_fit: Option<f64>,
    /// Center time s for parabolic reports.
    #[serde(default = "default_center_time")]
    pub center_time: f64,
}

fn default_centers() -> String {
    "grid4".into()
}
fn default_scales() -> String {
    "0.25:3".into()
}
fn default_threshold() -> ThresholdConfig {
    ThresholdConfig::Auto
}
fn default_density_resolution() -> usize {
    256
}
fn default_center_time() -> f64 {
    -0.25
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            centers: "grid4".into(),
            scales: "0.25:3".into(),
            threshold_m: ThresholdConfig::Auto,
            density_resolution: 256,
            c_fit: None,
            center_time: -0.25,
        }
    }
}

/// Either the string "auto" or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdConfig {
    Value(f64),
    Auto,
}

impl ThresholdConfig {
    pub fn is_auto(&self) -> bool {
        matches!(self, ThresholdConfig::Auto)
    }
}

impl Serialize for ThresholdConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ThresholdConfig::Auto => serializer.serialize_str("auto"),
            ThresholdConfig::Value(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ThresholdConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(ThresholdConfig::Value(v)),
            Raw::Text(s) if s == "auto" => Ok(ThresholdConfig::Auto),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "threshold_m must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusSection {
    #[serde(flatten)]
    pub modulus: ModulusConfig,
    #[serde(default)]
    pub conformance: ConformancePolicy,
}

/// What to do when a modulus violates the normalization hypotheses
/// ω(1) ≤ 1/2 (elliptic) or ω(r)|log r| ≤ 1/2 (parabolic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConformancePolicy {
    #[default]
    Warn,
    Reject,
    Rescale,
}

impl Config {
    pub fn from_str_toml(text: &str) -> Result<Config, CliError> {
        toml::from_str(text).map_err(|e| CliError::validation(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {path:?}: {e}")))?;
        Self::from_str_toml(&text)
    }

    /// The effective configuration (defaults applied) as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn oracle(&self) -> Option<ScalarOracle> {
        self.problem.oracle.map(OracleConfig::to_oracle)
    }

    fn build_tensor(&self, t: &TensorConfig, base_dir: &Path) -> Result<CoefficientTensor, CliError> {
        let n = self.problem.n;
        let m = self.problem.m;
        let to_value = |entries: &Vec<Vec<Vec<Vec<f64>>>>| -> Result<TensorValue, CliError> {
            let mut v = TensorValue::zeros(n, m);
            if entries.len() != m {
                return Err(CliError::validation("tensor entries: outer length must be m"));
            }
            for (i, row) in entries.iter().enumerate() {
                if row.len() != m {
                    return Err(CliError::validation("tensor entries: second index must be m"));
                }
                for (j, block) in row.iter().enumerate() {
                    if block.len() != n || block.iter().any(|b| b.len() != n) {
                        return Err(CliError::validation("tensor entries: blocks must be n×n"));
                    }
                    for (al, brow) in block.iter().enumerate() {
                        for (be, val) in brow.iter().enumerate() {
                            v.set(i, j, al, be, *val);
                        }
                    }
                }
            }
            Ok(v)
        };
        let field = match &t.field {
            TensorFieldConfig::ConstantScalar { value } => {
                TensorField::Constant(TensorValue::identity_block(n, m, *value))
            }
            TensorFieldConfig::ConstantMatrix { entries } => TensorField::Constant(to_value(entries)?),
            TensorFieldConfig::ScalarIdentity { field } => TensorField::ScalarIdentity(field.to_field()),
            TensorFieldConfig::AffineInX { base, slopes } => {
                if slopes.len() != n {
                    return Err(CliError::validation("affine_in_x: need one slope tensor per axis"));
                }
                TensorField::AffineInX {
                    base: to_value(base)?,
                    slopes: slopes.iter().map(&to_value).collect::<Result<_, _>>()?,
                }
            }
        };
        Ok(CoefficientTensor::new(
            n,
            m,
            field,
            t.lambda,
            t.dini_bound,
            t.modulus.build(base_dir)?,
        )?)
    }

    fn build_boundary(&self) -> Result<Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>, CliError> {
        let m = self.problem.m;
        match &self.problem.boundary {
            BoundaryConfig::Oracle => {
                let oracle = self.oracle().ok_or_else(|| {
                    CliError::validation("boundary kind 'oracle' needs a [problem.oracle] section")
                })?;
                Ok(Arc::new(move |x: &[f64], _t: f64| {
                    let u = oracle.eval(x).expect("oracle eval").0;
                    vec![u; m]
                }))
            }
            BoundaryConfig::Affine { constant, gradient } => {
                if constant.len() != m || gradient.len() != m {
                    return Err(CliError::validation("affine boundary: need m components"));
                }
                let constant = constant.clone();
                let gradient = gradient.clone();
                Ok(Arc::new(move |x: &[f64], _t: f64| {
                    constant
                        .iter()
                        .zip(&gradient)
                        .map(|(c, g)| c + g.iter().zip(x).map(|(gi, xi)| gi * xi).sum::<f64>())
                        .collect()
                }))
            }
            BoundaryConfig::Trig { amplitude, wave, phase } => {
                if amplitude.len() != m || wave.len() != m || phase.len() != m {
                    return Err(CliError::validation("trig boundary: need m components"));
                }
                let amplitude = amplitude.clone();
                let wave = wave.clone();
                let phase = phase.clone();
                Ok(Arc::new(move |x: &[f64], _t: f64| {
                    (0..amplitude.len())
                        .map(|c| {
                            let arg: f64 =
                                wave[c].iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>();
                            amplitude[c] * (std::f64::consts::PI * arg + phase[c]).cos()
                        })
                        .collect()
                }))
            }
        }
    }

    /// Build the core problem instance. `base_dir` resolves relative
    /// paths (tabulated-modulus CSVs).
    pub fn build_problem(&self, base_dir: &Path) -> Result<TransmissionProblem, CliError> {
        let shape = self.problem.domain.to_shape();
        let domain = match &self.problem.motion {
            MotionConfig::Static => IndicatorDomain::new(shape)?,
            MotionConfig::Moving { velocity } => IndicatorDomain::moving(shape, velocity.clone())?,
        };
        let tensor_a = self.build_tensor(&self.problem.tensor_a, base_dir)?;
        let tensor_b = self.build_tensor(&self.problem.tensor_b, base_dir)?;
        let boundary = self.build_boundary()?;
        Ok(TransmissionProblem::new(tensor_a, tensor_b, domain, boundary)?)
    }

    pub fn build_grid(&self) -> Result<translab_core::fem::Grid, CliError> {
        Ok(translab_core::fem::Grid::new(self.problem.n, self.grid.cells_per_side)?)
    }
}

/// Parse a centers spec: "gridN" or "x,y;x,y;...".
pub fn parse_centers(spec: &str, n: usize) -> Result<Vec<Vec<f64>>, CliError> {
    if let Some(count) = spec.strip_prefix("grid") {
        let count: usize = count
            .parse()
            .map_err(|_| CliError::validation(format!("bad centers spec '{spec}'")))?;
        if count == 0 {
            return Err(CliError::validation("centers grid size must be >= 1"));
        }
        if n != 2 {
            return Err(CliError::validation("gridN centers are 2-dimensional"));
        }
        let coord = |i: usize| {
            if count == 1 {
                0.0
            } else {
                -0.5 + i as f64 / (count - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(count * count);
        for j in 0..count {
            for i in 0..count {
                out.push(vec![coord(i), coord(j)]);
            }
        }
        return Ok(out);
    }
    let mut out = Vec::new();
    for part in spec.split(';') {
        let coords: Result<Vec<f64>, _> = part.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let coords = coords.map_err(|_| CliError::validation(format!("bad center '{part}'")))?;
        if coords.len() != n {
            return Err(CliError::validation(format!("center '{part}' is not {n}-dimensional")));
        }
        out.push(coords);
    }
    Ok(out)
}

/// Parse a scales spec "r0:k" into (r0, k_max = k − 1).
pub fn parse_scales(spec: &str) -> Result<(f64, usize), CliError> {
    let (r0, k) = spec
        .split_once(':')
        .ok_or_else(|| CliError::validation(format!("bad scales spec '{spec}' (want r0:k)")))?;
    let r0: f64 = r0
        .trim()
        .parse()
        .map_err(|_| CliError::validation(format!("bad scales radius '{r0}'")))?;
    let k: usize = k
        .trim()
        .parse()
        .map_err(|_| CliError::validation(format!("bad scales count '{k}'")))?;
    if !(r0 > 0.0 && r0 < 1.0) || k == 0 {
        return Err(CliError::validation("scales need 0 < r0 < 1 and k >= 1"));
    }
    Ok((r0, k - 1))
}
