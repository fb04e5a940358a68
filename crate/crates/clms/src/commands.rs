//! Command bodies. Each writes its artifacts under `cfg.out` and returns the
//! computed values for callers that want them in memory.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clms_core::bo::{BoPoint, BoState};
use clms_core::kernels::KernelFamily;
use clms_core::plant::{evaluate_cost, rollout, ClosedLoopTrace, CostSpec, ModelHandle};
use clms_core::selection::{
    augment_dataset, closed_loop_selection, collected_transitions, data_based_selection, fit_model,
    SelectionResult, SelectionSetup, StudySummary,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SimulateModel};
use crate::output::{ensure_dir, write_csv, write_json, Cell, Metadata};
use crate::verify::{
    scaling_suite, ucb_demo, warm_start_suite, ScalingReport, WarmStartRun, DEMO_MINIMIZER,
    DEMO_TOLERANCE,
};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectMode {
    Data,
    ClosedLoop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub method: String,
    pub kernel: KernelFamily,
    pub phi: Vec<f64>,
    /// SVR tube width or GP noise level.
    pub extra: f64,
    pub loss: f64,
    pub cost: f64,
    /// Spread of the final cost over repetitions; closed-loop row only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub kernel: KernelFamily,
    pub phi: Vec<f64>,
    pub extra: f64,
    pub loss: f64,
    pub cost: f64,
}

impl RunSummary {
    fn of(seed: u64, r: &SelectionResult) -> Self {
        Self {
            seed,
            kernel: r.family,
            phi: r.phi.clone(),
            extra: r.extra,
            loss: r.loss,
            cost: r.cost,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2 {
    pub rows: Vec<Table2Row>,
    pub closed_loop_runs: Vec<RunSummary>,
    pub kernel_votes: BTreeMap<String, usize>,
    pub metadata: Metadata,
}

impl Table2 {
    pub fn row(&self, method: &str) -> Option<&Table2Row> {
        self.rows.iter().find(|r| r.method == method)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    ensure_dir(&cfg.out)?;
    Ok(cfg.out.clone())
}

fn row(method: &str, r: &SelectionResult) -> Table2Row {
    Table2Row {
        method: method.into(),
        kernel: r.family,
        phi: r.phi.clone(),
        extra: r.extra,
        loss: r.loss,
        cost: r.cost,
        cost_std: None,
    }
}

/// Closed-loop selections with seeds `seed..seed + reps`, in parallel.
pub fn closed_loop_study(
    setup: &SelectionSetup,
    reps: usize,
    budget: usize,
    seed: u64,
    initial: Option<BoPoint>,
) -> Result<StudySummary, CliError> {
    let runs = (0..reps as u64)
        .into_par_iter()
        .map(|r| closed_loop_selection(setup, budget, seed.wrapping_add(r), initial.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StudySummary::from_runs(runs)?)
}

/// Most frequent family; ties go to the earlier candidate.
fn majority(setup: &SelectionSetup, runs: &[SelectionResult]) -> KernelFamily {
    let mut best = (0, runs[0].family);
    for c in setup.space.candidates() {
        let n = runs.iter().filter(|r| r.family == c.family).count();
        if n > best.0 {
            best = (n, c.family);
        }
    }
    best.1
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// Closed-loop row: the majority kernel with hyperparameters and loss
/// averaged over the runs that chose it; cost averaged over all runs.
fn closed_loop_row(setup: &SelectionSetup, study: &StudySummary) -> Table2Row {
    let family = majority(setup, &study.runs);
    let chosen: Vec<&SelectionResult> = study.runs.iter().filter(|r| r.family == family).collect();
    let arity = chosen[0].phi.len();
    let phi = (0..arity)
        .map(|i| mean(chosen.iter().map(|r| r.phi[i])))
        .collect();
    Table2Row {
        method: "Closed-loop".into(),
        kernel: family,
        phi,
        extra: mean(chosen.iter().map(|r| r.extra)),
        loss: mean(chosen.iter().map(|r| r.loss)),
        cost: study.mean_final(),
        cost_std: study.std_dev.last().copied(),
    }
}

fn trace_of(
    setup: &SelectionSetup,
    x0: f64,
    r: &SelectionResult,
) -> Result<ClosedLoopTrace, CliError> {
    let (spec, extra) = setup.decode_point(&r.point())?;
    let model = fit_model(&setup.data, &setup.model, &spec, extra)?;
    Ok(rollout(x0, setup.cost.horizon, &model, setup.guard)?)
}

/// Comparison table: data-based, data-based with appended trial data, and
/// closed-loop rows, plus the incumbent curve and control-error traces.
pub fn reproduce_table2(cfg: &ExperimentConfig) -> Result<Table2, CliError> {
    let setup = cfg.setup()?;
    let dir = out_dir(cfg)?;
    let meta = Metadata::of(cfg);

    let db = data_based_selection(&setup, cfg.data_budget, cfg.seed)?;
    let initial = cfg.init_with_data_based.then(|| db.point());
    let study = closed_loop_study(&setup, cfg.reps, cfg.closed_loop_budget, cfg.seed, initial)?;

    let transitions = collected_transitions(&setup, &study.runs[0])?;
    let at_setup = SelectionSetup {
        data: augment_dataset(&setup.data, &transitions)?,
        ..setup.clone()
    };
    let at = data_based_selection(&at_setup, cfg.data_budget, cfg.seed)?;

    let mut kernel_votes = BTreeMap::new();
    for r in &study.runs {
        *kernel_votes.entry(r.family.name().to_string()).or_insert(0) += 1;
    }
    let table = Table2 {
        rows: vec![
            row("Data-based", &db),
            row("Data-based AT", &at),
            closed_loop_row(&setup, &study),
        ],
        closed_loop_runs: study
            .runs
            .iter()
            .enumerate()
            .map(|(i, r)| RunSummary::of(cfg.seed + i as u64, r))
            .collect(),
        kernel_votes,
        metadata: meta.clone(),
    };
    write_json(&dir.join("table2.json"), &table)?;

    let curve: Vec<Vec<Cell>> = (0..study.mean.len())
        .map(|t| {
            vec![
                Cell::Int(t + 1),
                study.mean[t].into(),
                study.std_dev[t].into(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("fig2_curve.csv"),
        &["trial", "mean", "std"],
        &curve,
        &meta,
    )?;

    let x0 = cfg.plant.x0;
    let a = trace_of(&setup, x0, &db)?;
    let b = trace_of(&setup, x0, &study.runs[0])?;
    let n = a.outputs.len().max(b.outputs.len());
    let at_k = |t: &ClosedLoopTrace, k: usize| t.outputs.get(k).copied().unwrap_or(f64::NAN);
    let errors: Vec<Vec<Cell>> = (0..n)
        .map(|k| vec![Cell::Int(k), at_k(&a, k).into(), at_k(&b, k).into()])
        .collect();
    write_csv(
        &dir.join("fig1_errors.csv"),
        &["k", "data_based", "closed_loop"],
        &errors,
        &meta,
    )?;
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scaling: ScalingReport,
    pub demo_incumbent: f64,
    pub demo_passed: bool,
    pub warm_start: Vec<WarmStartRun>,
    pub metadata: Metadata,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.scaling.passed == self.scaling.draws
            && self.demo_passed
            && self.warm_start.iter().all(WarmStartRun::holds)
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let s = &self.scaling;
        let c = self.warm_start.iter().filter(|r| r.holds()).count();
        vec![
            format!("scaling bound: {}/{} draws pass", s.passed, s.draws),
            format!(
                "ucb demo: incumbent {:.6} ({})",
                self.demo_incumbent,
                if self.demo_passed { "pass" } else { "fail" }
            ),
            format!("warm start: {c}/{} runs pass", self.warm_start.len()),
        ]
    }
}

pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport, CliError> {
    let v = &cfg.verify;
    let scaling = scaling_suite(v.draws, cfg.seed)?;
    let demo = ucb_demo(v.demo_iterations, cfg.seed)?;
    let x = demo.incumbent().map(|o| o.phi[0]).unwrap_or(f64::NAN);
    let setup = cfg.setup()?;
    let warm_start = warm_start_suite(
        &setup,
        cfg.data_budget,
        v.warm_start_runs,
        v.warm_start_budget,
        cfg.seed,
    )?;
    let report = VerifyReport {
        scaling,
        demo_incumbent: x,
        demo_passed: (x - DEMO_MINIMIZER).abs() < DEMO_TOLERANCE,
        warm_start,
        metadata: Metadata::of(cfg),
    };
    write_json(&out_dir(cfg)?.join("verify.json"), &report)?;
    Ok(report)
}

/// Single rollout from `x0` with the configured model; writes `trace.csv`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(ClosedLoopTrace, f64), CliError> {
    let model = match &cfg.simulate.model {
        SimulateModel::Perfect => ModelHandle::Perfect,
        SimulateModel::Zero => ModelHandle::Zero,
        SimulateModel::Kernel { kernel, extra } => {
            fit_model(&cfg.dataset()?, &cfg.model, kernel, *extra)?
        }
    };
    let trace = rollout(cfg.plant.x0, cfg.plant.horizon, &model, cfg.plant.guard)?;
    let cost = evaluate_cost(
        &trace,
        &CostSpec {
            kind: cfg.plant.cost,
            horizon: cfg.plant.horizon,
        },
    );
    let rows: Vec<Vec<Cell>> = (0..trace.states.len())
        .map(|k| {
            vec![
                Cell::Int(k),
                trace.states[k].into(),
                trace.inputs.get(k).copied().unwrap_or(f64::NAN).into(),
            ]
        })
        .collect();
    write_csv(
        &out_dir(cfg)?.join("trace.csv"),
        &["k", "x", "u"],
        &rows,
        &Metadata::of(cfg),
    )?;
    Ok((trace, cost))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub mode: SelectMode,
    pub result: SelectionResult,
    pub metadata: Metadata,
}

fn history_rows(state: &BoState) -> Vec<Vec<Cell>> {
    state
        .history
        .iter()
        .zip(&state.incumbent_trace)
        .map(|(o, inc)| {
            let mut row = vec![Cell::Int(o.trial_index), Cell::Int(o.kernel_index)];
            row.extend(o.phi.iter().map(|&v| Cell::Float(v)));
            row.push(o.cost.into());
            row.push((*inc).into());
            row
        })
        .collect()
}

/// One selection run; writes `selection.json` and `history.csv`.
pub fn select(cfg: &ExperimentConfig, mode: SelectMode) -> Result<SelectionResult, CliError> {
    let setup = cfg.setup()?;
    let result = match mode {
        SelectMode::Data => data_based_selection(&setup, cfg.data_budget, cfg.seed)?,
        SelectMode::ClosedLoop => {
            closed_loop_selection(&setup, cfg.closed_loop_budget, cfg.seed, None)?
        }
    };
    let dir = out_dir(cfg)?;
    let meta = Metadata::of(cfg);
    // Observations carry the padded kernel block followed by the extra value.
    let width = setup.space.max_arity();
    let padded = BoState {
        history: result
            .bo_state
            .history
            .iter()
            .cloned()
            .map(|mut o| {
                let point = o.point();
                let (phi, extra) = setup.space.split(&point);
                let mut v = phi.to_vec();
                v.resize(width, f64::NAN);
                v.extend_from_slice(extra);
                o.phi = v;
                o
            })
            .collect(),
        ..result.bo_state.clone()
    };
    let mut header = vec!["trial".to_string(), "kernel_index".to_string()];
    header.extend((1..=width).map(|i| format!("phi{i}")));
    header.extend([
        "extra".to_string(),
        "cost".to_string(),
        "incumbent".to_string(),
    ]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &dir.join("history.csv"),
        &header,
        &history_rows(&padded),
        &meta,
    )?;
    write_json(
        &dir.join("selection.json"),
        &SelectionReport {
            mode,
            result: result.clone(),
            metadata: meta,
        },
    )?;
    Ok(result)
}

/// Seeded UCB on the parabola; writes `bo_demo.csv`.
pub fn bo_demo(cfg: &ExperimentConfig) -> Result<BoState, CliError> {
    let state = ucb_demo(cfg.verify.demo_iterations, cfg.seed)?;
    let rows: Vec<Vec<Cell>> = state
        .history
        .iter()
        .zip(&state.incumbent_trace)
        .map(|(o, inc)| {
            vec![
                Cell::Int(o.trial_index),
                o.phi[0].into(),
                o.cost.into(),
                (*inc).into(),
            ]
        })
        .collect();
    write_csv(
        &out_dir(cfg)?.join("bo_demo.csv"),
        &["trial", "x", "y", "incumbent"],
        &rows,
        &Metadata::of(cfg),
    )?;
    Ok(state)
}
