//! Experiment configuration. Every field has a default, so `{}` is a valid
//! config; unknown fields are rejected.

use std::path::{Path, PathBuf};

use clms_core::bo::{AcquisitionKind, DEFAULT_LAMBDA};
use clms_core::gp::Dataset;
use clms_core::kernels::{KernelFamily, KernelSpec};
use clms_core::plant::{training_dataset, CostKind, CostSpec, DEFAULT_GUARD, DEFAULT_HORIZON};
use clms_core::selection::{
    default_space, BoxConstraint, ModelKind, SelectionSetup, CLOSED_LOOP_BUDGET, DATA_BASED_BUDGET,
    DEFAULT_FOLDS,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// JSON schema of [`ExperimentConfig`], shipped with the binary.
pub const SCHEMA: &str = include_str!("../schema/experiment_config.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub x0: f64,
    pub horizon: usize,
    pub guard: f64,
    pub cost: CostKind,
    /// Initial states the closed-loop cost is averaged over; `[x0]` when empty.
    pub initial_states: Vec<f64>,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            x0: 3.0,
            horizon: DEFAULT_HORIZON,
            guard: DEFAULT_GUARD,
            cost: CostKind::TimeWeightedQuadraticState,
            initial_states: Vec::new(),
        }
    }
}

/// Evenly spaced unforced transitions on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 11,
            lo: -10.0,
            hi: 10.0,
        }
    }
}

/// Model used by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateModel {
    Perfect,
    Zero,
    /// Trained on the configured dataset with the configured model kind.
    Kernel {
        kernel: KernelSpec,
        extra: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: SimulateModel,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: SimulateModel::Perfect,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random draws of the lengthscale scaling check.
    pub draws: usize,
    /// UCB iterations of the parabola demo.
    pub demo_iterations: usize,
    /// Seeded closed-loop runs started from the data-based point.
    pub warm_start_runs: usize,
    pub warm_start_budget: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            draws: 200,
            demo_iterations: 30,
            warm_start_runs: 3,
            warm_start_budget: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub dataset: DatasetConfig,
    pub model: ModelKind,
    pub kernels: Vec<KernelFamily>,
    pub acquisition: AcquisitionKind,
    pub lambda: f64,
    pub folds: usize,
    pub data_budget: usize,
    pub closed_loop_budget: usize,
    pub reps: usize,
    pub seed: u64,
    /// Seeds the closed-loop search with the data-based selection.
    pub init_with_data_based: bool,
    pub out: PathBuf,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            dataset: DatasetConfig::default(),
            model: ModelKind::default(),
            kernels: vec![
                KernelFamily::Linear,
                KernelFamily::PolynomialCubic,
                KernelFamily::Gaussian,
            ],
            acquisition: AcquisitionKind::ExpectedImprovementPlus,
            lambda: DEFAULT_LAMBDA,
            folds: DEFAULT_FOLDS,
            data_budget: DATA_BASED_BUDGET,
            closed_loop_budget: CLOSED_LOOP_BUDGET,
            reps: 20,
            seed: 0,
            init_with_data_based: false,
            out: PathBuf::from("results"),
            simulate: SimulateConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    /// Applies to both the data-based and the closed-loop budget.
    pub budget: Option<usize>,
    pub draws: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| invalid(format!("{}: {e}", p.display())))?;
                Self::from_json(&text)
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(r) = o.reps {
            self.reps = r;
        }
        if let Some(b) = o.budget {
            self.data_budget = b;
            self.closed_loop_budget = b;
        }
        if let Some(d) = o.draws {
            self.verify.draws = d;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.plant;
        if !p.x0.is_finite() || p.initial_states.iter().any(|x| !x.is_finite()) {
            return Err(invalid("initial states must be finite"));
        }
        if p.horizon == 0 {
            return Err(invalid("plant.horizon must be at least 1"));
        }
        if !(p.guard > 0.0) || !p.guard.is_finite() {
            return Err(invalid("plant.guard must be positive and finite"));
        }
        let d = &self.dataset;
        if d.count < 2 || !(d.lo < d.hi) || !d.lo.is_finite() || !d.hi.is_finite() {
            return Err(invalid(
                "dataset needs count >= 2 on a finite interval lo < hi",
            ));
        }
        if let ModelKind::Svr {
            box_c: BoxConstraint::Fixed(c),
        } = self.model
        {
            if !(c > 0.0) || !c.is_finite() {
                return Err(invalid("box_c must be positive"));
            }
        }
        if self.kernels.is_empty() {
            return Err(invalid("kernels must not be empty"));
        }
        for (i, k) in self.kernels.iter().enumerate() {
            if self.kernels[..i].contains(k) {
                return Err(invalid(format!("kernel {k} listed twice")));
            }
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("lambda must be nonnegative"));
        }
        if self.folds < 2 || self.folds > d.count {
            return Err(invalid(format!("folds must lie in [2, {}]", d.count)));
        }
        if self.data_budget == 0 || self.closed_loop_budget == 0 || self.reps == 0 {
            return Err(invalid("budgets and reps must be at least 1"));
        }
        let v = &self.verify;
        if v.demo_iterations == 0 || v.warm_start_budget == 0 {
            return Err(invalid("verify iterations and budget must be at least 1"));
        }
        if let SimulateModel::Kernel { kernel, extra } = &self.simulate.model {
            if kernel.input_dim() != 1 {
                return Err(invalid("simulate.model.kernel must take scalar inputs"));
            }
            if !(*extra >= 0.0) || !extra.is_finite() {
                return Err(invalid("simulate.model.extra must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self {
            out: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    pub fn dataset(&self) -> Result<Dataset, CliError> {
        let d = &self.dataset;
        training_dataset(d.count, d.lo, d.hi).map_err(|e| invalid(e.to_string()))
    }

    pub fn initial_states(&self) -> Vec<f64> {
        if self.plant.initial_states.is_empty() {
            vec![self.plant.x0]
        } else {
            self.plant.initial_states.clone()
        }
    }

    pub fn setup(&self) -> Result<SelectionSetup, CliError> {
        let data = self.dataset()?;
        let space =
            default_space(&self.kernels, 1, &self.model).map_err(|e| invalid(e.to_string()))?;
        let setup = SelectionSetup {
            data,
            space,
            model: self.model,
            cost: CostSpec {
                kind: self.plant.cost,
                horizon: self.plant.horizon,
            },
            initial_states: self.initial_states(),
            guard: self.plant.guard,
            acquisition: self.acquisition,
            lambda: self.lambda,
            folds: self.folds,
        };
        setup.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(setup)
    }
}
