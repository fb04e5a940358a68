//! The scalar benchmark plant, its feedback-linearizing controller, closed-loop
//! rollouts and task costs.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::math;
use crate::svr::SvrModel;

/// Cost assigned to a rollout that left the divergence guard.
pub const PENALTY_COST: f64 = 1e6;
pub const DEFAULT_GUARD: f64 = 1e3;
pub const DEFAULT_HORIZON: usize = 10;

/// `x⁺ = exp(−x²/100)·sin(x) + x/3 + u`
#[inline]
pub fn step_plant(x: f64, u: f64) -> f64 {
    math::exp(-x * x / 100.0) * math::sin(x) + x / 3.0 + u
}

/// The model used by the controller to predict the unforced dynamics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ModelHandle {
    Svr(SvrModel),
    Gp(GpModel),
    /// The true unforced dynamics; only useful as a test oracle.
    Perfect,
    /// Predicts zero everywhere (no model).
    Zero,
}

impl ModelHandle {
    pub fn predict(&self, x: f64) -> Result<f64> {
        match self {
            ModelHandle::Svr(m) => m.predict(&[x]),
            ModelHandle::Gp(m) => m.predict_mean(&[x]),
            ModelHandle::Perfect => Ok(step_plant(x, 0.0)),
            ModelHandle::Zero => Ok(0.0),
        }
    }
}

/// Feedback linearization `u = −f̂(x) + x/2`.
pub fn control(x: f64, model: &ModelHandle) -> Result<f64> {
    let f_hat = model.predict(x)?;
    if !f_hat.is_finite() {
        return Err(Error::NonFinite("model prediction"));
    }
    Ok(-f_hat + 0.5 * x)
}

/// States, inputs and outputs of one closed-loop run. The reference is zero,
/// so outputs double as control errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopTrace {
    pub states: Vec<f64>,
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    pub diverged: bool,
}

impl ClosedLoopTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Transitions `(xₖ, xₖ₊₁ − uₖ)`: samples of the unforced dynamics.
    pub fn transitions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.inputs
            .iter()
            .enumerate()
            .map(move |(k, u)| (self.states[k], self.states[k + 1] - u))
    }
}

/// Runs `horizon` control steps from `x0`. Stops early and flags divergence
/// once `|xₖ|` exceeds `guard` or turns non-finite; the offending state is kept.
pub fn rollout(
    x0: f64,
    horizon: usize,
    model: &ModelHandle,
    guard: f64,
) -> Result<ClosedLoopTrace> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if !(guard > 0.0) {
        return Err(Error::InvalidArgument(
            "divergence guard must be positive".into(),
        ));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    states.push(x0);
    let mut diverged = !(x0.abs() <= guard);
    let mut x = x0;
    if !diverged {
        for _ in 0..horizon {
            let u = match control(x, model) {
                Ok(u) => u,
                Err(Error::NonFinite(_)) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let next = step_plant(x, u);
            inputs.push(u);
            states.push(next);
            if !(next.abs() <= guard) {
                diverged = true;
                break;
            }
            x = next;
        }
    }
    let outputs = states.clone();
    Ok(ClosedLoopTrace {
        states,
        inputs,
        outputs,
        diverged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    /// `c = k·yₖ²`
    TimeWeightedQuadraticState,
    /// `(1/n) Σ eₖ²`
    MeanSquaredError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSpec {
    pub kind: CostKind,
    pub horizon: usize,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            kind: CostKind::TimeWeightedQuadraticState,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Per-step cost terms `c(yₖ, uₖ)` for `k < horizon` (fewer when the trace is
/// shorter).
pub fn cost_increments(trace: &ClosedLoopTrace, spec: &CostSpec) -> Vec<f64> {
    let n = spec.horizon.min(trace.outputs.len());
    match spec.kind {
        CostKind::TimeWeightedQuadraticState => (0..n)
            .map(|k| k as f64 * trace.outputs[k] * trace.outputs[k])
            .collect(),
        CostKind::MeanSquaredError => {
            let h = spec.horizon.max(1) as f64;
            (0..n)
                .map(|k| trace.outputs[k] * trace.outputs[k] / h)
                .collect()
        }
    }
}

/// Total task cost; diverged traces cost [`PENALTY_COST`].
pub fn evaluate_cost(trace: &ClosedLoopTrace, spec: &CostSpec) -> f64 {
    if trace.diverged {
        return PENALTY_COST;
    }
    debug_assert!(
        trace.outputs.len() >= spec.horizon,
        "trace shorter than cost horizon"
    );
    let c: f64 = cost_increments(trace, spec).iter().sum();
    if c.is_finite() {
        c.min(PENALTY_COST)
    } else {
        PENALTY_COST
    }
}

/// `count` evenly spaced unforced transitions `(x, f(x, 0))` on `[lo, hi]`.
pub fn training_dataset(count: usize, lo: f64, hi: f64) -> Result<Dataset> {
    if count < 2 || !(hi > lo) {
        return Err(Error::InvalidArgument(
            "need at least two points on a non-empty interval".into(),
        ));
    }
    let xs: Vec<f64> = (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| step_plant(*x, 0.0)).collect();
    Dataset::from_scalar(&xs, &ys)
}

/// The 11-point training set on `[-10, 10]`.
pub fn simulation_dataset() -> Dataset {
    training_dataset(11, -10.0, 10.0).expect("static dataset is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn plant_values() {
        assert_eq!(step_plant(0.0, 0.0), 0.0);
        assert_eq!(step_plant(0.0, 0.5), 0.5);
        let expected = (-0.09f64).exp() * 3.0f64.sin() + 1.0;
        assert!((step_plant(3.0, 0.0) - expected).abs() < 1e-15);
        assert!((expected - 1.128_973_3).abs() < 1e-6);
    }

    #[test]
    fn control_values() {
        assert_eq!(control(3.0, &ModelHandle::Zero).unwrap(), 1.5);
        let u = control(3.0, &ModelHandle::Perfect).unwrap();
        assert!((u - (1.5 - step_plant(3.0, 0.0))).abs() < 1e-15);
        assert!((u - 0.371_026_7).abs() < 1e-6);
        assert!((step_plant(3.0, u) - 1.5).abs() < 1e-15);
        assert_eq!(control(0.0, &ModelHandle::Perfect).unwrap(), 0.0);
    }

    #[test]
    fn perfect_rollout_halves() {
        let t = rollout(3.0, 10, &ModelHandle::Perfect, DEFAULT_GUARD).unwrap();
        assert_eq!(t.states.len(), 11);
        for (k, x) in t.states.iter().enumerate() {
            assert!((x - 3.0 * 0.5f64.powi(k as i32)).abs() < 1e-12);
        }
        // 9 Σ_{k=1}^{9} k 4^{-k}, summed independently
        let oracle: f64 = (1..10).map(|k| 9.0 * k as f64 * 0.25f64.powi(k)).sum();
        let c = evaluate_cost(&t, &CostSpec::default());
        assert!((c - oracle).abs() < 1e-10);
        assert!((c - 4.0).abs() < 1e-3);
    }

    #[test]
    fn zero_state_stays_zero() {
        let t = rollout(0.0, 10, &ModelHandle::Perfect, DEFAULT_GUARD).unwrap();
        assert!(t.states.iter().chain(&t.inputs).all(|v| *v == 0.0));
        assert_eq!(evaluate_cost(&t, &CostSpec::default()), 0.0);
    }

    #[test]
    fn zero_model_leaves_residual_error() {
        let t = rollout(3.0, 10, &ModelHandle::Zero, DEFAULT_GUARD).unwrap();
        assert!(!t.diverged);
        // direct iteration of x⁺ = f(x) + x/2
        let mut x = 3.0;
        for k in 0..=10 {
            assert_eq!(t.states[k], x);
            x = step_plant(x, 0.5 * x);
        }
        assert!(t.states.iter().all(|x| x.abs() < 10.0));
        assert!(t.states[10].abs() > 0.5);
    }

    #[test]
    fn divergence_is_flagged_and_penalized() {
        let t = rollout(500.0, 10, &ModelHandle::Zero, 100.0).unwrap();
        assert!(t.diverged);
        assert_eq!(evaluate_cost(&t, &CostSpec::default()), PENALTY_COST);
    }

    #[test]
    fn mse_cost() {
        let t = ClosedLoopTrace {
            states: vec![1.0, 2.0, 0.0],
            inputs: vec![0.0, 0.0],
            outputs: vec![1.0, 2.0, 0.0],
            diverged: false,
        };
        let c = evaluate_cost(
            &t,
            &CostSpec {
                kind: CostKind::MeanSquaredError,
                horizon: 2,
            },
        );
        assert_eq!(c, 2.5);
    }

    #[test]
    fn dataset_is_evenly_spaced() {
        let d = simulation_dataset();
        assert_eq!(d.len(), 11);
        assert_eq!(d.input(0), &[-10.0]);
        assert_eq!(d.input(5), &[0.0]);
        assert_eq!(d.input(10), &[10.0]);
        assert_eq!(d.targets()[5], 0.0);
    }
}
