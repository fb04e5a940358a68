//! Acquisition functions, written for minimization of the objective.

use crate::gp::Prediction;
use crate::math;

use super::surrogate::Surrogate;

/// Which acquisition drives proposals.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum AcquisitionKind {
    ExpectedImprovement,
    /// EI with an over-exploitation escape; see [`super::propose_next`].
    ExpectedImprovementPlus,
    /// Lower confidence bound with `βₜ = 2 log(t² + 1)`.
    UpperConfidenceBound,
}

/// `(best − μ)Φ(t) + σφ(t)` with `t = (best − μ)/σ`; zero improvement
/// is `max(best − μ, 0)` when `σ = 0`.
pub fn expected_improvement(p: &Prediction, best: f64) -> f64 {
    let sd = p.std_dev();
    let gain = best - p.mean;
    if !(sd > 0.0) {
        return gain.max(0.0);
    }
    let t = gain / sd;
    (gain * math::normal_cdf(t) + sd * math::normal_pdf(t)).max(0.0)
}

/// Lower confidence value `μ − √β σ`; proposals minimize it.
pub fn lower_confidence_bound(p: &Prediction, beta: f64) -> f64 {
    p.mean - math::sqrt(beta.max(0.0)) * p.std_dev()
}

/// The exploration schedule `βₜ = 2 log(t² + 1)`.
pub fn ucb_beta(t: usize) -> f64 {
    let t = t as f64;
    2.0 * math::ln(t * t + 1.0)
}

/// EI of an encoded point under `surrogate`, in standardized cost units.
pub fn acquisition_ei(surrogate: &Surrogate, best: f64, z: &[f64]) -> f64 {
    expected_improvement(&surrogate.predict(z), best)
}

/// EI of `z` and whether `z` is over-exploiting, i.e. its posterior standard
/// deviation is below `lambda` times the estimated noise level.
pub fn acquisition_ei_plus(
    surrogate: &Surrogate,
    best: f64,
    z: &[f64],
    lambda: f64,
) -> (f64, bool) {
    let p = surrogate.predict(z);
    (
        expected_improvement(&p, best),
        p.std_dev() < lambda * surrogate.noise_sigma(),
    )
}

/// `μ − √β σ` of an encoded point.
pub fn acquisition_ucb(surrogate: &Surrogate, z: &[f64], beta: f64) -> f64 {
    lower_confidence_bound(&surrogate.predict(z), beta)
}
