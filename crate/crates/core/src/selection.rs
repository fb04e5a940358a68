//! Data-based and closed-loop kernel selection on top of [`crate::bo`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bo::{
    run_bo, AcquisitionKind, BoConfig, BoPoint, BoState, Candidate, SearchSpace, DEFAULT_LAMBDA,
};
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel};
use crate::kernels::{
    default_domain, default_epsilon_domain, HyperparameterDomain, KernelFamily, KernelSpec,
};
use crate::linalg::Matrix;
use crate::math;
use crate::plant::{evaluate_cost, rollout, CostSpec, ModelHandle, DEFAULT_GUARD, PENALTY_COST};
use crate::svr::{default_box_c, train_svr, DEFAULT_TOL};

pub const DEFAULT_FOLDS: usize = 5;
pub const DATA_BASED_BUDGET: usize = 30;
pub const CLOSED_LOOP_BUDGET: usize = 50;

/// SVR box constraint: fixed, or `iqr(b)/1.349` of the full training targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxConstraint {
    #[default]
    Auto,
    Fixed(f64),
}

impl BoxConstraint {
    pub fn resolve(self, data: &Dataset) -> f64 {
        match self {
            BoxConstraint::Auto => default_box_c(data.targets()),
            BoxConstraint::Fixed(c) => c,
        }
    }
}

/// Regression model driven by the selected kernel. The single extra search
/// dimension is the tube width `ε` for SVR and the noise level `σₙ` for GP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svr { box_c: BoxConstraint },
    Gp,
}

impl Default for ModelKind {
    fn default() -> Self {
        ModelKind::Svr {
            box_c: BoxConstraint::Auto,
        }
    }
}

/// Search box of the GP noise level.
pub fn default_noise_domain() -> HyperparameterDomain {
    HyperparameterDomain::log_interval(1e-4, 1.0).expect("static bounds are valid")
}

/// Candidates with their default boxes plus the model's extra dimension.
pub fn default_space(
    families: &[KernelFamily],
    input_dim: usize,
    model: &ModelKind,
) -> Result<SearchSpace> {
    let candidates = families
        .iter()
        .map(|&family| Candidate {
            family,
            domain: default_domain(family, input_dim),
        })
        .collect();
    let extra = match model {
        ModelKind::Svr { .. } => default_epsilon_domain(),
        ModelKind::Gp => default_noise_domain(),
    };
    SearchSpace::new(candidates, extra)
}

/// Everything both pipelines share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSetup {
    pub data: Dataset,
    pub space: SearchSpace,
    pub model: ModelKind,
    pub cost: CostSpec,
    /// The closed-loop cost is averaged over these initial states.
    pub initial_states: Vec<f64>,
    pub guard: f64,
    pub acquisition: AcquisitionKind,
    pub lambda: f64,
    pub folds: usize,
}

impl SelectionSetup {
    /// Linear, cubic and Gaussian SVR candidates on `data`, started from
    /// `x0 = 3` with the time-weighted quadratic cost.
    pub fn scalar_example(data: Dataset) -> Result<Self> {
        let model = ModelKind::default();
        let families = [
            KernelFamily::Linear,
            KernelFamily::PolynomialCubic,
            KernelFamily::Gaussian,
        ];
        let space = default_space(&families, data.input_dim(), &model)?;
        Ok(Self {
            data,
            space,
            model,
            cost: CostSpec::default(),
            initial_states: vec![3.0],
            guard: DEFAULT_GUARD,
            acquisition: AcquisitionKind::ExpectedImprovementPlus,
            lambda: DEFAULT_LAMBDA,
            folds: DEFAULT_FOLDS,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_states.is_empty() || self.initial_states.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "need at least one finite initial state".into(),
            ));
        }
        if !(self.guard > 0.0) {
            return Err(Error::InvalidArgument(format!("guard {}", self.guard)));
        }
        if self.cost.horizon == 0 {
            return Err(Error::InvalidArgument(
                "cost horizon must be at least 1".into(),
            ));
        }
        if self.folds < 2 || self.folds > self.data.len() {
            return Err(Error::InvalidArgument(format!(
                "folds {} for {} points",
                self.folds,
                self.data.len()
            )));
        }
        if self.space.extra().dim() != 1 {
            return Err(Error::InvalidArgument(
                "the search space needs exactly one extra dimension".into(),
            ));
        }
        for c in self.space.candidates() {
            let expected = c.family.arity(self.data.input_dim());
            if c.domain.dim() != expected {
                return Err(Error::Arity {
                    family: c.family.name(),
                    expected,
                    found: c.domain.dim(),
                });
            }
        }
        Ok(())
    }

    /// Kernel and extra value of a search point.
    pub fn decode_point(&self, p: &BoPoint) -> Result<(KernelSpec, f64)> {
        let c = self
            .space
            .candidate(p.kernel_index)
            .ok_or_else(|| Error::InvalidArgument(format!("kernel index {}", p.kernel_index)))?;
        let (phi, extra) = self.space.split(p);
        let spec = KernelSpec::new(c.family, phi.to_vec(), self.data.input_dim())?;
        let extra = *extra.first().ok_or(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        })?;
        Ok((spec, extra))
    }
}

/// Trains the configured model on `data`.
pub fn fit_model(
    data: &Dataset,
    model: &ModelKind,
    spec: &KernelSpec,
    extra: f64,
) -> Result<ModelHandle> {
    match model {
        ModelKind::Svr { box_c } => Ok(ModelHandle::Svr(train_svr(
            data,
            spec,
            extra,
            box_c.resolve(data),
            DEFAULT_TOL,
        )?)),
        ModelKind::Gp => Ok(ModelHandle::Gp(GpModel::fit(data, spec, extra)?)),
    }
}

/// Indices `0..m` shuffled with `seed` and cut into `folds` contiguous
/// blocks whose sizes differ by at most one.
pub fn fold_partition(m: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = m / folds + usize::from(f < m % folds);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Pooled mean squared out-of-fold error of `model` with kernel `spec`.
pub fn cross_validation_loss_with(
    data: &Dataset,
    model: &ModelKind,
    spec: &KernelSpec,
    extra: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let m = data.len();
    if folds < 2 || folds > m {
        return Err(Error::InvalidArgument(format!(
            "folds {folds} for {m} points"
        )));
    }
    // The box constraint is resolved once on the full data so every fold
    // shares it.
    let model = match model {
        ModelKind::Svr { box_c } => ModelKind::Svr {
            box_c: BoxConstraint::Fixed(box_c.resolve(data)),
        },
        ModelKind::Gp => ModelKind::Gp,
    };
    let mut sse = 0.0;
    for held in fold_partition(m, folds, seed) {
        let train: Vec<usize> = (0..m).filter(|i| !held.contains(i)).collect();
        let fitted = fit_model(&data.subset(&train)?, &model, spec, extra)?;
        for &i in &held {
            let x = data.input(i);
            let pred = match &fitted {
                ModelHandle::Svr(s) => s.predict(x)?,
                ModelHandle::Gp(g) => g.predict_mean(x)?,
                other => other.predict(x[0])?,
            };
            let e = pred - data.targets()[i];
            sse += e * e;
        }
    }
    let loss = sse / m as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite("cross-validation loss"))
    }
}

/// SVR cross-validation loss with the default box constraint.
pub fn cross_validation_loss(
    data: &Dataset,
    spec: &KernelSpec,
    epsilon: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    cross_validation_loss_with(data, &ModelKind::default(), spec, epsilon, folds, seed)
}

/// Rollout outcome of one model over all initial states.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoopOutcome {
    pub cost: f64,
    pub traces: Vec<crate::plant::ClosedLoopTrace>,
}

/// Pipeline evaluations with a rollout counter.
struct Evaluator<'a> {
    setup: &'a SelectionSetup,
    rollouts: Cell<usize>,
}

impl<'a> Evaluator<'a> {
    fn new(setup: &'a SelectionSetup) -> Self {
        Self {
            setup,
            rollouts: Cell::new(0),
        }
    }

    /// Training failures become the penalty; they mark a degenerate point.
    fn closed_loop(&self, p: &BoPoint) -> Result<ClosedLoopOutcome> {
        let s = self.setup;
        let (spec, extra) = s.decode_point(p)?;
        let model = match fit_model(&s.data, &s.model, &spec, extra) {
            Ok(m) => m,
            Err(_) => {
                return Ok(ClosedLoopOutcome {
                    cost: PENALTY_COST,
                    traces: Vec::new(),
                })
            }
        };
        let mut traces = Vec::with_capacity(s.initial_states.len());
        let mut total = 0.0;
        for &x0 in &s.initial_states {
            self.rollouts.set(self.rollouts.get() + 1);
            let trace = rollout(x0, s.cost.horizon, &model, s.guard)?;
            total += evaluate_cost(&trace, &s.cost);
            traces.push(trace);
        }
        let cost = (total / s.initial_states.len() as f64).min(PENALTY_COST);
        Ok(ClosedLoopOutcome { cost, traces })
    }

    fn loss(&self, p: &BoPoint, seed: u64) -> Result<f64> {
        let s = self.setup;
        let (spec, extra) = s.decode_point(p)?;
        Ok(
            cross_validation_loss_with(&s.data, &s.model, &spec, extra, s.folds, seed)
                .unwrap_or(PENALTY_COST),
        )
    }
}

/// Closed-loop cost of a point: train on the setup data, roll out from every
/// initial state, average the task costs. Training failures cost the penalty.
pub fn closed_loop_cost(setup: &SelectionSetup, p: &BoPoint) -> Result<ClosedLoopOutcome> {
    Evaluator::new(setup).closed_loop(p)
}

/// Cross-validation loss of a point; training failures cost the penalty.
pub fn point_loss(setup: &SelectionSetup, p: &BoPoint, seed: u64) -> Result<f64> {
    Evaluator::new(setup).loss(p, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub kernel_index: usize,
    pub family: KernelFamily,
    /// Kernel hyperparameters.
    pub phi: Vec<f64>,
    /// SVR tube width or GP noise level.
    pub extra: f64,
    /// Cross-validation loss of the selection.
    pub loss: f64,
    /// Closed-loop cost of the selection.
    pub cost: f64,
    pub bo_state: BoState,
    /// Rollouts performed while the BO loop was running.
    pub search_rollouts: usize,
}

impl SelectionResult {
    pub fn point(&self) -> BoPoint {
        let mut phi = self.phi.clone();
        phi.push(self.extra);
        BoPoint::new(self.kernel_index, phi)
    }
}

/// Seed of the cross-validation partition for a selection seed.
fn fold_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_F01D
}

fn finish(
    setup: &SelectionSetup,
    eval: &Evaluator<'_>,
    state: BoState,
    search_rollouts: usize,
    loss: Option<f64>,
    seed: u64,
) -> Result<SelectionResult> {
    let inc = state.incumbent().ok_or(Error::EmptyDataset)?.clone();
    let p = inc.point();
    let family = setup
        .space
        .candidate(p.kernel_index)
        .map(|c| c.family)
        .ok_or(Error::EmptyDataset)?;
    let (phi, extra) = setup.space.split(&p);
    let loss = match loss {
        Some(l) => l,
        None => eval.loss(&p, fold_seed(seed))?,
    };
    let cost = eval.closed_loop(&p)?.cost;
    Ok(SelectionResult {
        kernel_index: p.kernel_index,
        family,
        phi: phi.to_vec(),
        extra: extra[0],
        loss,
        cost,
        bo_state: state,
        search_rollouts,
    })
}

/// Minimizes the cross-validation loss by BO, using training data only.
/// The closed-loop cost of the winner is computed after the search.
pub fn data_based_selection(
    setup: &SelectionSetup,
    budget: usize,
    seed: u64,
) -> Result<SelectionResult> {
    setup.validate()?;
    let eval = Evaluator::new(setup);
    let config = BoConfig {
        lambda: setup.lambda,
        ..BoConfig::new(budget, setup.acquisition, seed)
    };
    let fseed = fold_seed(seed);
    let state = run_bo(|p| eval.loss(p, fseed), &setup.space, &config)?;
    let rollouts = eval.rollouts.get();
    let loss = state.incumbent().map(|o| o.cost);
    finish(setup, &eval, state, rollouts, loss, seed)
}

/// Minimizes the closed-loop cost by BO. `initial` is evaluated first.
pub fn closed_loop_selection(
    setup: &SelectionSetup,
    budget: usize,
    seed: u64,
    initial: Option<BoPoint>,
) -> Result<SelectionResult> {
    setup.validate()?;
    let eval = Evaluator::new(setup);
    let mut config = BoConfig {
        lambda: setup.lambda,
        ..BoConfig::new(budget, setup.acquisition, seed)
    };
    config.initial_points.extend(initial);
    let state = run_bo(
        |p| eval.closed_loop(p).map(|o| o.cost),
        &setup.space,
        &config,
    )?;
    let rollouts = eval.rollouts.get();
    finish(setup, &eval, state, rollouts, None, seed)
}

/// Unforced transitions `(xₖ, xₖ₊₁ − uₖ)` of every non-diverged trial of a
/// closed-loop run, for retraining on the collected data.
pub fn collected_transitions(
    setup: &SelectionSetup,
    result: &SelectionResult,
) -> Result<Vec<(f64, f64)>> {
    let eval = Evaluator::new(setup);
    let mut out = Vec::new();
    for o in &result.bo_state.history {
        for t in eval
            .closed_loop(&o.point())?
            .traces
            .iter()
            .filter(|t| !t.diverged)
        {
            out.extend(t.transitions());
        }
    }
    Ok(out)
}

/// `data` with `transitions` appended.
pub fn augment_dataset(data: &Dataset, transitions: &[(f64, f64)]) -> Result<Dataset> {
    if transitions.is_empty() {
        return Ok(data.clone());
    }
    let xs: Vec<f64> = transitions.iter().map(|t| t.0).collect();
    let ys: Vec<f64> = transitions.iter().map(|t| t.1).collect();
    let extra = Dataset::new(
        Matrix::from_row_major(xs.len(), 1, xs).ok_or(Error::EmptyDataset)?,
        ys,
    )?;
    data.extend(&extra)
}

/// Per-trial incumbent statistics over repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub runs: Vec<SelectionResult>,
    pub mean: Vec<f64>,
    /// Sample standard deviation; zero for a single run.
    pub std_dev: Vec<f64>,
}

impl StudySummary {
    /// Aggregates runs whose incumbent traces have equal length.
    pub fn from_runs(runs: Vec<SelectionResult>) -> Result<Self> {
        let n = runs
            .first()
            .ok_or(Error::InvalidArgument("no runs".into()))?
            .bo_state
            .incumbent_trace
            .len();
        if runs.iter().any(|r| r.bo_state.incumbent_trace.len() != n) {
            return Err(Error::InvalidArgument(
                "incumbent traces differ in length".into(),
            ));
        }
        let reps = runs.len() as f64;
        let mut mean = vec![0.0; n];
        let mut std_dev = vec![0.0; n];
        for t in 0..n {
            let vals = runs.iter().map(|r| r.bo_state.incumbent_trace[t]);
            let mu = vals.clone().sum::<f64>() / reps;
            mean[t] = mu;
            if runs.len() > 1 {
                std_dev[t] =
                    math::sqrt(vals.map(|v| (v - mu) * (v - mu)).sum::<f64>() / (reps - 1.0));
            }
        }
        Ok(Self {
            runs,
            mean,
            std_dev,
        })
    }

    pub fn mean_final(&self) -> f64 {
        self.mean.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs [`closed_loop_selection`] with seeds `base_seed..base_seed + n_reps`
/// sequentially and aggregates the incumbent curves.
pub fn repeated_study(
    setup: &SelectionSetup,
    n_reps: usize,
    budget: usize,
    base_seed: u64,
    initial: Option<BoPoint>,
) -> Result<StudySummary> {
    if n_reps == 0 {
        return Err(Error::InvalidArgument("n_reps must be at least 1".into()));
    }
    let runs = (0..n_reps as u64)
        .map(|r| closed_loop_selection(setup, budget, base_seed.wrapping_add(r), initial.clone()))
        .collect::<Result<Vec<_>>>()?;
    StudySummary::from_runs(runs)
}
