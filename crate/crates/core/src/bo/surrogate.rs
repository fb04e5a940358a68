use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gp::{optimize_hyperparameters_from, Dataset, GpModel, Prediction};
use crate::kernels::{HyperparameterDomain, KernelFamily};
use crate::linalg::Matrix;
use crate::math;
use crate::optim::NelderMead;
use crate::plant::PENALTY_COST;

use super::space::{transform, SearchSpace};
use super::Observation;

const AMPLITUDE: (f64, f64) = (1e-1, 1e1);
const INDEX_LENGTHSCALE: (f64, f64) = (1e-1, 1e1);
const UNIT_LENGTHSCALE: (f64, f64) = (1e-2, 1.0);
const NOISE: (f64, f64) = (1e-3, 1.0);

/// GP surrogate of the cost over encoded points.
///
/// Penalized evaluations enter at the worst successful cost. Costs `c` are
/// then mapped to `ln(1 + c − c_min)` and standardized. All predictions
/// are in these standardized units; the map is monotone, so minimizers agree.
#[derive(Clone, Debug)]
pub struct Surrogate {
    gp: GpModel,
    shift: f64,
    mean: f64,
    scale: f64,
    best: f64,
    unit: Vec<f64>,
}

/// SE-ARD hyperparameter box over encoded points, plus the noise box.
pub fn surrogate_domains(space: &SearchSpace) -> (HyperparameterDomain, HyperparameterDomain) {
    let d = space.encoded_dim();
    let mut lower = vec![AMPLITUDE.0, INDEX_LENGTHSCALE.0];
    let mut upper = vec![AMPLITUDE.1, INDEX_LENGTHSCALE.1];
    for _ in 1..d {
        lower.push(UNIT_LENGTHSCALE.0);
        upper.push(UNIT_LENGTHSCALE.1);
    }
    let logs = vec![true; lower.len()];
    let domain = HyperparameterDomain::new(lower, upper, logs).expect("static bounds are valid");
    let noise =
        HyperparameterDomain::log_interval(NOISE.0, NOISE.1).expect("static bounds are valid");
    (domain, noise)
}

impl Surrogate {
    /// Fits the surrogate to `history`, warm-starting the likelihood search
    /// from `warm` (unit coordinates) when its length matches.
    pub fn fit(
        space: &SearchSpace,
        history: &[Observation],
        warm: Option<&[f64]>,
        seed: u64,
    ) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = space.encoded_dim();
        let costs = imputed_costs(history);
        let shift = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = costs.iter().map(|c| math::ln(1.0 + (c - shift))).collect();
        let m = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / m;
        let var = raw.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / m;
        let scale = if var > 1e-24 { math::sqrt(var) } else { 1.0 };
        let targets: Vec<f64> = raw.iter().map(|y| (y - mean) / scale).collect();
        let best = targets.iter().copied().fold(f64::INFINITY, f64::min);

        let mut rows = Vec::with_capacity(history.len() * d);
        for o in history {
            rows.extend(transform(&space.encode(&o.point())));
        }
        let inputs = Matrix::from_row_major(history.len(), d, rows).ok_or(Error::EmptyDataset)?;
        let data = Dataset::new(inputs, targets)?;

        let (domain, noise) = surrogate_domains(space);
        let dim = domain.dim() + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts = Vec::with_capacity(3);
        match warm {
            Some(w) if w.len() == dim => starts.push(w.to_vec()),
            _ => starts.push(default_start(dim)),
        }
        for _ in 0..2 {
            starts.push((0..dim).map(|_| rng.gen::<f64>()).collect());
        }
        let search = NelderMead {
            max_evals: 250,
            initial_step: 0.2,
            ..NelderMead::default()
        };
        let fitted = optimize_hyperparameters_from(
            &data,
            KernelFamily::SquaredExponentialArd,
            &domain,
            &noise,
            &starts,
            &search,
        )?;
        let gp = GpModel::fit(&data, &fitted.spec, fitted.noise_sigma)?;
        Ok(Self {
            gp,
            shift,
            mean,
            scale,
            best,
            unit: fitted.unit,
        })
    }

    /// Posterior of the latent standardized cost at encoded point `z`.
    pub fn predict(&self, z: &[f64]) -> Prediction {
        self.gp.predict_unchecked(&transform(z))
    }

    /// Posterior mean mapped back to cost units.
    pub fn predict_cost(&self, z: &[f64]) -> f64 {
        let y = self.predict(z).mean * self.scale + self.mean;
        self.shift + math::exp(y) - 1.0
    }

    /// Lowest standardized observation.
    pub fn best(&self) -> f64 {
        self.best
    }

    /// Estimated observation-noise standard deviation, standardized units.
    pub fn noise_sigma(&self) -> f64 {
        self.gp.noise_sigma()
    }

    /// Fitted hyperparameters in unit coordinates, for warm starts.
    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    /// Surrogate covariance between two encoded points.
    pub fn kernel_value(&self, z1: &[f64], z2: &[f64]) -> f64 {
        self.gp.spec().value(&transform(z1), &transform(z2))
    }
}

/// Costs with penalized evaluations replaced by the worst successful cost,
/// when there is one.
fn imputed_costs(history: &[Observation]) -> Vec<f64> {
    let worst = history
        .iter()
        .map(|o| o.cost)
        .filter(|c| *c < PENALTY_COST)
        .fold(f64::NEG_INFINITY, f64::max);
    history
        .iter()
        .map(|o| {
            if o.cost >= PENALTY_COST && worst.is_finite() {
                worst
            } else {
                o.cost
            }
        })
        .collect()
}

/// Amplitude near 1, moderate lengthscales, small noise.
fn default_start(dim: usize) -> Vec<f64> {
    let mut s = vec![0.5; dim];
    if let Some(n) = s.last_mut() {
        *n = 0.25;
    }
    s
}
