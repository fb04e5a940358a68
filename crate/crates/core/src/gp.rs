//! Exact Gaussian-process regression with a zero prior mean.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    cross_covariance, gram_matrix, HyperparameterDomain, KernelFamily, KernelSpec,
};
use crate::linalg::{self, dot, Matrix};
use crate::math;
use crate::optim::NelderMead;

/// Training pairs `(aᵢ, bᵢ)`; inputs are the rows of `inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Matrix,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Vec<f64>) -> Result<Self> {
        if inputs.rows() == 0 || inputs.cols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if inputs.rows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                found: targets.len(),
            });
        }
        if !inputs.is_finite() || targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self { inputs, targets })
    }

    /// Dataset with scalar inputs.
    pub fn from_scalar(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let inputs = Matrix::from_row_major(xs.len(), 1, xs.to_vec()).ok_or(Error::EmptyDataset)?;
        Self::new(inputs, ys.to_vec())
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let d = self.input_dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.inputs.row(i));
            targets.push(self.targets[i]);
        }
        let inputs = Matrix::from_row_major(indices.len(), d, data).ok_or(Error::EmptyDataset)?;
        Self::new(inputs, targets)
    }

    /// Appends the rows of `other`.
    pub fn extend(&self, other: &Dataset) -> Result<Self> {
        if other.input_dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: other.input_dim(),
            });
        }
        let mut data = self.inputs.as_slice().to_vec();
        data.extend_from_slice(other.inputs.as_slice());
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        let inputs = Matrix::from_row_major(targets.len(), self.input_dim(), data)
            .ok_or(Error::EmptyDataset)?;
        Self::new(inputs, targets)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        math::sqrt(self.variance)
    }
}

/// A fitted GP: caches the Cholesky factor of `K + σₙ²I` and the weights
/// `(K + σₙ²I)⁻¹ B`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GpModel {
    spec: KernelSpec,
    noise_sigma: f64,
    train: Dataset,
    factor: Matrix,
    alpha: Vec<f64>,
    /// Diagonal jitter that was needed on top of `σₙ²`, zero when none.
    jitter: f64,
}

/// Relative jitter ladder: `1e-10 · tr(K)/m`, escalating ×10 up to `1e-4 · tr(K)/m`.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Factorizes `K + σ²I`, adding escalating jitter when needed.
/// Returns the factor and the jitter that was used.
pub(crate) fn factorize_with_jitter(k: &Matrix, noise_var: f64) -> Result<(Matrix, f64)> {
    let m = k.rows();
    let mut a = k.clone();
    a.add_diagonal(noise_var);
    if let Some(l) = linalg::cholesky(&a) {
        return Ok((l, 0.0));
    }
    let mut scale = k.trace() / m as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        scale = 1.0;
    }
    let mut rel = JITTER_START;
    let mut last = 0.0;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut aj = a.clone();
        aj.add_diagonal(jitter);
        if let Some(l) = linalg::cholesky(&aj) {
            return Ok((l, jitter));
        }
        last = jitter;
        rel *= 10.0;
    }
    Err(Error::Factorization { jitter: last })
}

impl GpModel {
    pub fn fit(data: &Dataset, spec: &KernelSpec, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "noise sigma {noise_sigma}"
            )));
        }
        let k = gram_matrix(spec, data.inputs())?;
        let (factor, jitter) = factorize_with_jitter(&k, noise_sigma * noise_sigma)?;
        let alpha = linalg::cholesky_solve(&factor, data.targets());
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("GP weights"));
        }
        Ok(Self {
            spec: spec.clone(),
            noise_sigma,
            train: data.clone(),
            factor,
            alpha,
            jitter,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn predict(&self, a_star: &[f64]) -> Result<Prediction> {
        if a_star.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                found: a_star.len(),
            });
        }
        Ok(self.predict_unchecked(a_star))
    }

    pub(crate) fn predict_unchecked(&self, a_star: &[f64]) -> Prediction {
        let k_star = cross_covariance(&self.spec, self.train.inputs(), a_star);
        let mean = dot(&k_star, &self.alpha);
        let v = linalg::solve_lower(&self.factor, &k_star);
        let variance = (self.spec.diagonal(a_star) - dot(&v, &v)).max(0.0);
        Prediction { mean, variance }
    }

    /// Posterior mean only; skips the triangular solve.
    pub fn predict_mean(&self, a_star: &[f64]) -> Result<f64> {
        if a_star.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                found: a_star.len(),
            });
        }
        Ok(dot(
            &cross_covariance(&self.spec, self.train.inputs(), a_star),
            &self.alpha,
        ))
    }

    /// Negative log marginal likelihood of the training targets.
    pub fn nll(&self) -> f64 {
        let m = self.train.len() as f64;
        0.5 * (dot(self.train.targets(), &self.alpha)
            + linalg::cholesky_log_det(&self.factor)
            + m * math::ln(2.0 * PI))
    }
}

/// `½(Bᵀ(K+σₙ²I)⁻¹B + log|K+σₙ²I| + m log 2π)`.
pub fn nll(data: &Dataset, spec: &KernelSpec, noise_sigma: f64) -> Result<f64> {
    Ok(GpModel::fit(data, spec, noise_sigma)?.nll())
}

/// Centered finite-difference gradient of [`nll`] with respect to the log of
/// each hyperparameter, followed by the log noise.
pub fn nll_log_gradient(
    data: &Dataset,
    spec: &KernelSpec,
    noise_sigma: f64,
    step: f64,
) -> Result<Vec<f64>> {
    let mut params: Vec<f64> = spec.phi().iter().map(|p| math::ln(*p)).collect();
    params.push(math::ln(noise_sigma));
    let eval = |p: &[f64]| -> Result<f64> {
        let phi = p[..p.len() - 1].iter().map(|v| math::exp(*v)).collect();
        let s = KernelSpec::new(spec.family(), phi, spec.input_dim())?;
        nll(data, &s, math::exp(p[p.len() - 1]))
    };
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut up = params.clone();
        let mut down = params.clone();
        up[i] += step;
        down[i] -= step;
        grad.push((eval(&up)? - eval(&down)?) / (2.0 * step));
    }
    Ok(grad)
}

/// Outcome of likelihood-based hyperparameter fitting.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedHyperparameters {
    pub spec: KernelSpec,
    pub noise_sigma: f64,
    pub nll: f64,
    /// Best point in unit coordinates of the joint box, useful as a warm start.
    pub unit: Vec<f64>,
}

/// Minimizes the NLL over `domain × noise_domain` by multi-start Nelder–Mead
/// in (log-)unit coordinates. The first start is the box midpoint, the rest
/// are drawn from a seeded generator.
pub fn optimize_hyperparameters(
    data: &Dataset,
    family: KernelFamily,
    domain: &HyperparameterDomain,
    noise_domain: &HyperparameterDomain,
    restarts: usize,
    seed: u64,
) -> Result<FittedHyperparameters> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let dim = domain.dim() + noise_domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(restarts);
    starts.push(alloc::vec![0.5; dim]);
    for _ in 1..restarts {
        starts.push((0..dim).map(|_| rng.gen::<f64>()).collect());
    }
    optimize_hyperparameters_from(
        data,
        family,
        domain,
        noise_domain,
        &starts,
        &NelderMead::default(),
    )
}

/// Like [`optimize_hyperparameters`] with caller-supplied unit-cube starts.
pub fn optimize_hyperparameters_from(
    data: &Dataset,
    family: KernelFamily,
    domain: &HyperparameterDomain,
    noise_domain: &HyperparameterDomain,
    starts: &[Vec<f64>],
    search: &NelderMead,
) -> Result<FittedHyperparameters> {
    if noise_domain.dim() != 1 {
        return Err(Error::InvalidArgument(
            "noise domain must be one-dimensional".into(),
        ));
    }
    let expected = family.arity(data.input_dim());
    if domain.dim() != expected {
        return Err(Error::Arity {
            family: family.name(),
            expected,
            found: domain.dim(),
        });
    }
    let joint = domain.join(noise_domain);
    let decode = |u: &[f64]| -> Result<(KernelSpec, f64)> {
        let p = joint.from_unit(u);
        let spec = KernelSpec::new(family, p[..expected].to_vec(), data.input_dim())?;
        Ok((spec, p[expected]))
    };
    let objective = |u: &[f64]| -> f64 {
        decode(u)
            .and_then(|(s, n)| nll(data, &s, n))
            .unwrap_or(f64::INFINITY)
    };
    let best = search
        .minimize_multi(objective, starts)
        .ok_or(Error::Factorization { jitter: 0.0 })?;
    if !best.value.is_finite() {
        return Err(Error::Factorization { jitter: f64::NAN });
    }
    let (spec, noise_sigma) = decode(&best.x)?;
    Ok(FittedHyperparameters {
        spec,
        noise_sigma,
        nll: best.value,
        unit: best.x,
    })
}
