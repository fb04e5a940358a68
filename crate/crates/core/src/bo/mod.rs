//! Bayesian optimization over a mixed space of a kernel index and that
//! kernel's continuous hyperparameters.

mod acquisition;
mod design;
mod space;
mod surrogate;

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt::Display;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::optim::NelderMead;
use crate::plant::PENALTY_COST;

pub use acquisition::{
    acquisition_ei, acquisition_ei_plus, acquisition_ucb, expected_improvement,
    lower_confidence_bound, ucb_beta, AcquisitionKind,
};
pub use design::{halton, initial_design};
pub use space::{round_index, transform, BoPoint, Candidate, SearchSpace};
pub use surrogate::{surrogate_domains, Surrogate};

/// Default over-exploitation threshold of EI-plus, in units of the
/// surrogate noise standard deviation.
pub const DEFAULT_LAMBDA: f64 = 0.5;
/// Exploration weight of the EI-plus escape proposal. It doubles with every
/// escape in an unbroken run ending at the latest trial.
pub const ESCAPE_BETA: f64 = 16.0;
/// Quasi-random design points per candidate.
pub const DEFAULT_DESIGN_PER_CANDIDATE: usize = 3;

const RANDOM_SAMPLES: usize = 256;
const LOCAL_STARTS: usize = 10;

/// One evaluated point. `trial_index` is 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub kernel_index: usize,
    pub phi: Vec<f64>,
    pub cost: f64,
    pub trial_index: usize,
}

impl Observation {
    pub fn point(&self) -> BoPoint {
        BoPoint::new(self.kernel_index, self.phi.clone())
    }
}

/// Evaluation history plus what is needed to resume a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoState {
    pub history: Vec<Observation>,
    /// `incumbent_trace[t]` is the best cost among the first `t + 1` trials.
    pub incumbent_trace: Vec<f64>,
    /// Iterations where EI-plus replaced its proposal.
    pub escapes: Vec<usize>,
    /// Last surrogate hyperparameters in unit coordinates.
    pub surrogate_unit: Option<Vec<f64>>,
    pub seed: u64,
}

impl BoState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Lowest-cost observation; the earliest wins ties.
    pub fn incumbent(&self) -> Option<&Observation> {
        self.history
            .iter()
            .fold(None, |best: Option<&Observation>, o| match best {
                Some(b) if b.cost <= o.cost => Some(b),
                _ => Some(o),
            })
    }

    /// Records a cost. Non-finite costs are stored as the penalty.
    pub fn record(&mut self, point: BoPoint, cost: f64) -> &Observation {
        let cost = if cost.is_finite() { cost } else { PENALTY_COST };
        let best = self
            .incumbent_trace
            .last()
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(cost);
        self.history.push(Observation {
            kernel_index: point.kernel_index,
            phi: point.phi,
            cost,
            trial_index: self.history.len() + 1,
        });
        self.incumbent_trace.push(best);
        self.history.last().expect("just pushed")
    }
}

/// A proposal and how it was obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub point: BoPoint,
    /// True when EI-plus replaced the EI maximizer with the escape proposal.
    pub escaped: bool,
}

/// Settings of a full run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub budget: usize,
    pub acquisition: AcquisitionKind,
    pub seed: u64,
    /// Evaluated first, in order, before the quasi-random design.
    pub initial_points: Vec<BoPoint>,
    pub design_per_candidate: usize,
    pub lambda: f64,
}

impl BoConfig {
    pub fn new(budget: usize, acquisition: AcquisitionKind, seed: u64) -> Self {
        Self {
            budget,
            acquisition,
            seed,
            initial_points: Vec::new(),
            design_per_candidate: DEFAULT_DESIGN_PER_CANDIDATE,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_point(space: &SearchSpace, rng: &mut ChaCha8Rng) -> BoPoint {
    let j = rng.gen_range(1..=space.n_candidates());
    let u: Vec<f64> = (0..space.free_dims(j)).map(|_| rng.gen::<f64>()).collect();
    space.decode(&space.embed(j, &u))
}

/// Minimizes `f` over encoded points: per candidate, seeded random sampling,
/// then Nelder–Mead from the best samples and from observed points of that
/// candidate. Ties between candidates go to the lower index.
fn minimize_over_space<F>(
    space: &SearchSpace,
    history: &[Observation],
    f: F,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut best: Option<(Vec<f64>, f64)> = None;
    for j in 1..=space.n_candidates() {
        let d = space.free_dims(j);
        let local = |u: &[f64]| f(&space.embed(j, u));
        let found = if d == 0 {
            (space.embed(j, &[]), local(&[]))
        } else {
            let mut samples: Vec<(Vec<f64>, f64)> =
                Vec::with_capacity(RANDOM_SAMPLES + history.len());
            for o in history.iter().filter(|o| o.kernel_index == j) {
                let u = space.free_part(&space.encode(&o.point()));
                let v = local(&u);
                samples.push((u, v));
            }
            for _ in 0..RANDOM_SAMPLES {
                let u: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
                let v = local(&u);
                samples.push((u, v));
            }
            samples.sort_by(|a, b| a.1.total_cmp(&b.1));
            let starts: Vec<Vec<f64>> = samples
                .iter()
                .take(LOCAL_STARTS)
                .map(|s| s.0.clone())
                .collect();
            let search = NelderMead {
                max_evals: 40 + 40 * d,
                initial_step: 0.05,
                ..NelderMead::default()
            };
            let m = search
                .minimize_multi(local, &starts)
                .expect("at least one start");
            let (u, v) = if m.value <= samples[0].1 {
                (m.x, m.value)
            } else {
                samples.swap_remove(0)
            };
            (space.embed(j, &u), v)
        };
        if best.as_ref().is_none_or(|b| found.1 < b.1) {
            best = Some(found);
        }
    }
    best.expect("search space has candidates")
}

/// Next point to evaluate.
///
/// Refits the surrogate (warm-started from `state.surrogate_unit`) and
/// optimizes the acquisition over every candidate. With
/// [`AcquisitionKind::ExpectedImprovementPlus`], when the posterior standard
/// deviation at the EI maximizer is below `lambda` times the estimated noise
/// level, the proposal is replaced by the minimizer of `μ − 4σ`
/// (`β = 16`). Never fails: with an empty history, or when the surrogate
/// cannot be fitted, a seeded random point is returned.
/// [`ESCAPE_BETA`] times `2ᵏ`, where the last `k` trials were all escapes.
pub fn escape_beta(state: &BoState) -> f64 {
    let n = state.history.len();
    let streak = state
        .escapes
        .iter()
        .rev()
        .enumerate()
        .take_while(|(i, &t)| t + i == n)
        .count();
    ESCAPE_BETA * math::powi(2.0, streak.min(60) as i32)
}

pub fn propose_next(
    state: &mut BoState,
    space: &SearchSpace,
    kind: AcquisitionKind,
    lambda: f64,
    seed: u64,
) -> Proposal {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, state.history.len() as u64));
    let fitted = if state.history.is_empty() {
        None
    } else {
        Surrogate::fit(
            space,
            &state.history,
            state.surrogate_unit.as_deref(),
            rng.gen(),
        )
        .ok()
    };
    let Some(surrogate) = fitted else {
        return Proposal {
            point: random_point(space, &mut rng),
            escaped: false,
        };
    };
    state.surrogate_unit = Some(surrogate.unit().to_vec());

    let (z, escaped) = match kind {
        AcquisitionKind::UpperConfidenceBound => {
            let beta = ucb_beta(state.history.len());
            let (z, _) = minimize_over_space(
                space,
                &state.history,
                |z| acquisition_ucb(&surrogate, z, beta),
                &mut rng,
            );
            (z, false)
        }
        AcquisitionKind::ExpectedImprovement | AcquisitionKind::ExpectedImprovementPlus => {
            let best = surrogate.best();
            let (z, _) = minimize_over_space(
                space,
                &state.history,
                |z| -acquisition_ei(&surrogate, best, z),
                &mut rng,
            );
            let overexploiting = kind == AcquisitionKind::ExpectedImprovementPlus
                && acquisition_ei_plus(&surrogate, best, &z, lambda).1;
            if overexploiting {
                let beta = escape_beta(state);
                let (z, _) = minimize_over_space(
                    space,
                    &state.history,
                    |z| acquisition_ucb(&surrogate, z, beta),
                    &mut rng,
                );
                (z, true)
            } else {
                (z, false)
            }
        }
    };
    Proposal {
        point: space.decode(&z),
        escaped,
    }
}

/// Runs Bayesian optimization for `config.budget` evaluations.
///
/// The caller's initial points come first, then the quasi-random design, then
/// acquisition-driven proposals. An objective `Err` aborts the run and is
/// reported with the offending point; a non-finite cost is recorded as
/// [`PENALTY_COST`].
pub fn run_bo<F, E>(mut objective: F, space: &SearchSpace, config: &BoConfig) -> Result<BoState>
where
    F: FnMut(&BoPoint) -> core::result::Result<f64, E>,
    E: Display,
{
    if config.budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    if !(config.lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda {}", config.lambda)));
    }
    for p in &config.initial_points {
        if !space.contains(p) {
            return Err(Error::InvalidArgument(format!(
                "initial point {:?} of kernel {} is outside the search space",
                p.phi, p.kernel_index
            )));
        }
    }
    let mut state = BoState {
        seed: config.seed,
        ..BoState::new()
    };
    let mut queue: Vec<BoPoint> = config.initial_points.clone();
    queue.extend(initial_design(
        space,
        config.design_per_candidate,
        mix(config.seed, u64::MAX),
    ));
    queue.truncate(config.budget);

    let mut evaluate = |state: &mut BoState, p: BoPoint| -> Result<()> {
        match objective(&p) {
            Ok(c) => {
                state.record(p, c);
                Ok(())
            }
            Err(e) => Err(Error::Objective {
                kernel_index: p.kernel_index,
                phi: p.phi,
                message: e.to_string(),
            }),
        }
    };
    for p in queue {
        evaluate(&mut state, p)?;
    }
    while state.history.len() < config.budget {
        let proposal = propose_next(
            &mut state,
            space,
            config.acquisition,
            config.lambda,
            config.seed,
        );
        if proposal.escaped {
            state.escapes.push(state.history.len() + 1);
        }
        evaluate(&mut state, proposal.point)?;
    }
    Ok(state)
}
