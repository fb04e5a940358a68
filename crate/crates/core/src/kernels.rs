//! Kernel catalog, hyperparameter boxes and Gram matrices.
//!
//! Hyperparameters are always strictly positive scales, so every box used for
//! search is (optionally) log-scaled and mapped onto the unit cube.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, Matrix};
use crate::math;

/// Kernel families the selection procedure chooses among.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `xᵀx′`
    Linear,
    /// `(1 + xᵀx′)³`
    PolynomialCubic,
    /// `exp(-‖x − x′‖² / φ₁²)`, no amplitude factor.
    Gaussian,
    /// `φ₀² exp(-Σᵢ (xᵢ − x′ᵢ)² / φᵢ²)`: amplitude followed by one
    /// lengthscale per input dimension.
    SquaredExponentialArd,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Linear,
        KernelFamily::PolynomialCubic,
        KernelFamily::Gaussian,
        KernelFamily::SquaredExponentialArd,
    ];

    /// Number of hyperparameters for inputs of dimension `input_dim`.
    pub fn arity(self, input_dim: usize) -> usize {
        match self {
            KernelFamily::Linear | KernelFamily::PolynomialCubic => 0,
            KernelFamily::Gaussian => 1,
            KernelFamily::SquaredExponentialArd => 1 + input_dim,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Linear => "Linear",
            KernelFamily::PolynomialCubic => "PolynomialCubic",
            KernelFamily::Gaussian => "Gaussian",
            KernelFamily::SquaredExponentialArd => "SquaredExponentialARD",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(name))
    }

    /// Stationary families depend on `x − x′` only.
    pub fn is_stationary(self) -> bool {
        matches!(
            self,
            KernelFamily::Gaussian | KernelFamily::SquaredExponentialArd
        )
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A kernel family together with concrete hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRepr", into = "KernelSpecRepr")]
pub struct KernelSpec {
    family: KernelFamily,
    phi: Vec<f64>,
    input_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct KernelSpecRepr {
    family: alloc::string::String,
    phi: Vec<f64>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    input_dim: usize,
}

fn one() -> usize {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

impl TryFrom<KernelSpecRepr> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelSpecRepr) -> Result<Self> {
        let family = KernelFamily::from_name(&r.family).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown kernel family {:?}", r.family))
        })?;
        KernelSpec::new(family, r.phi, r.input_dim)
    }
}

impl From<KernelSpec> for KernelSpecRepr {
    fn from(s: KernelSpec) -> Self {
        KernelSpecRepr {
            family: s.family.name().into(),
            phi: s.phi,
            input_dim: s.input_dim,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, phi: Vec<f64>, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be positive".into()));
        }
        let expected = family.arity(input_dim);
        if phi.len() != expected {
            return Err(Error::Arity {
                family: family.name(),
                expected,
                found: phi.len(),
            });
        }
        if let Some(bad) = phi.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "{} scale must be finite and positive, got {bad}",
                family.name()
            )));
        }
        Ok(Self {
            family,
            phi,
            input_dim,
        })
    }

    pub fn linear(input_dim: usize) -> Self {
        Self {
            family: KernelFamily::Linear,
            phi: Vec::new(),
            input_dim,
        }
    }

    pub fn cubic(input_dim: usize) -> Self {
        Self {
            family: KernelFamily::PolynomialCubic,
            phi: Vec::new(),
            input_dim,
        }
    }

    pub fn gaussian(scale: f64, input_dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, vec![scale], input_dim)
    }

    /// Squared-exponential kernel with per-dimension lengthscales.
    pub fn se_ard(amplitude: f64, lengthscales: &[f64]) -> Result<Self> {
        let mut phi = Vec::with_capacity(lengthscales.len() + 1);
        phi.push(amplitude);
        phi.extend_from_slice(lengthscales);
        Self::new(KernelFamily::SquaredExponentialArd, phi, lengthscales.len())
    }

    #[inline]
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    #[inline]
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Kernel value without dimension checks. Callers must pass slices of
    /// length `input_dim`.
    #[inline]
    pub fn value(&self, x: &[f64], x2: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Linear => dot(x, x2),
            KernelFamily::PolynomialCubic => {
                let s = 1.0 + dot(x, x2);
                s * s * s
            }
            KernelFamily::Gaussian => {
                let l = self.phi[0];
                math::exp(-squared_distance(x, x2) / (l * l))
            }
            KernelFamily::SquaredExponentialArd => {
                let amp = self.phi[0];
                let r2: f64 = x
                    .iter()
                    .zip(x2)
                    .zip(&self.phi[1..])
                    .map(|((a, b), l)| {
                        let d = (a - b) / l;
                        d * d
                    })
                    .sum();
                amp * amp * math::exp(-r2)
            }
        }
    }

    /// `k(x, x)` upper bound used for variance clamping; exact for
    /// stationary families.
    #[inline]
    pub fn diagonal(&self, x: &[f64]) -> f64 {
        self.value(x, x)
    }
}

/// Evaluates `k(x, x2)` after checking dimensions.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    for v in [x, x2] {
        if v.len() != spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.input_dim,
                found: v.len(),
            });
        }
    }
    let k = spec.value(x, x2);
    if k.is_finite() {
        Ok(k)
    } else {
        Err(Error::NonFinite("kernel value"))
    }
}

/// Gram matrix `K[i][j] = k(aᵢ, aⱼ)` over the rows of `a`.
pub fn gram_matrix(spec: &KernelSpec, a: &Matrix) -> Result<Matrix> {
    if a.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if a.cols() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            found: a.cols(),
        });
    }
    let m = a.rows();
    let mut k = Matrix::zeros(m, m);
    for i in 0..m {
        let ai = a.row(i);
        for j in 0..=i {
            let v = spec.value(ai, a.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if !k.is_finite() {
        return Err(Error::NonFinite("Gram matrix"));
    }
    Ok(k)
}

/// Cross-covariance vector `[k(x, aᵢ)]ᵢ`.
pub fn cross_covariance(spec: &KernelSpec, a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter_rows().map(|r| spec.value(x, r)).collect()
}

/// Axis-aligned search box for a hyperparameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr")]
pub struct HyperparameterDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    log_scale: Vec<bool>,
}

#[derive(Deserialize)]
struct DomainRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
    log_scale: Vec<bool>,
}

impl TryFrom<DomainRepr> for HyperparameterDomain {
    type Error = Error;

    fn try_from(r: DomainRepr) -> Result<Self> {
        HyperparameterDomain::new(r.lower, r.upper, r.log_scale)
    }
}

impl HyperparameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, log_scale: Vec<bool>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != log_scale.len() {
            return Err(Error::InvalidArgument(
                "domain bound vectors differ in length".into(),
            ));
        }
        for i in 0..lower.len() {
            let (lo, hi) = (lower[i], upper[i]);
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "bad bounds [{lo}, {hi}] in dim {i}"
                )));
            }
            if log_scale[i] && !(lo > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "log-scaled dim {i} needs a positive lower bound, got {lo}"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            log_scale,
        })
    }

    pub fn empty() -> Self {
        Self {
            lower: Vec::new(),
            upper: Vec::new(),
            log_scale: Vec::new(),
        }
    }

    /// One log-scaled dimension.
    pub fn log_interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![true])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn log_scale(&self) -> &[bool] {
        &self.log_scale
    }

    pub fn contains(&self, phi: &[f64]) -> bool {
        phi.len() == self.dim()
            && phi
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(p, (lo, hi))| *lo <= *p && *p <= *hi)
    }

    /// Concatenates two boxes.
    pub fn join(&self, other: &HyperparameterDomain) -> HyperparameterDomain {
        let mut out = self.clone();
        out.lower.extend_from_slice(&other.lower);
        out.upper.extend_from_slice(&other.upper);
        out.log_scale.extend_from_slice(&other.log_scale);
        out
    }

    /// Maps a coordinate onto `[0, 1]` (log-linearly where flagged).
    pub fn to_unit_coord(&self, i: usize, value: f64) -> f64 {
        let (lo, hi) = (self.lower[i], self.upper[i]);
        if hi == lo {
            return 0.5;
        }
        let u = if self.log_scale[i] {
            (math::ln(value) - math::ln(lo)) / (math::ln(hi) - math::ln(lo))
        } else {
            (value - lo) / (hi - lo)
        };
        u.clamp(0.0, 1.0)
    }

    /// Inverse of [`to_unit_coord`](Self::to_unit_coord); clamps `u` first.
    pub fn from_unit_coord(&self, i: usize, u: f64) -> f64 {
        let (lo, hi) = (self.lower[i], self.upper[i]);
        let u = if u.is_finite() {
            u.clamp(0.0, 1.0)
        } else {
            0.5
        };
        let v = if self.log_scale[i] {
            math::exp(math::ln(lo) + u * (math::ln(hi) - math::ln(lo)))
        } else {
            lo + u * (hi - lo)
        };
        v.clamp(lo, hi)
    }

    pub fn to_unit(&self, phi: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.to_unit_coord(i, phi[i]))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.from_unit_coord(i, u[i]))
            .collect()
    }

    /// Center of the box in unit coordinates mapped back (geometric mean on
    /// log-scaled dims).
    pub fn midpoint(&self) -> Vec<f64> {
        self.from_unit(&vec![0.5; self.dim()])
    }
}

/// Search box used when a configuration does not specify one.
pub fn default_domain(family: KernelFamily, input_dim: usize) -> HyperparameterDomain {
    let n = family.arity(input_dim);
    HyperparameterDomain {
        lower: vec![1e-2; n],
        upper: vec![1e2; n],
        log_scale: vec![true; n],
    }
}

/// Default box for the SVR tube width.
pub fn default_epsilon_domain() -> HyperparameterDomain {
    HyperparameterDomain {
        lower: vec![1e-3],
        upper: vec![1e1],
        log_scale: vec![true],
    }
}
