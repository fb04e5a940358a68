use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use clms::commands::{self, SelectMode};
use clms::config::{ExperimentConfig, Overrides, SimulateModel};
use clms::CliError;

#[derive(Parser)]
#[command(
    name = "clms",
    version,
    about = "Closed-loop kernel and hyperparameter selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Closed-loop repetitions.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// BO evaluations for both the data-based and the closed-loop search.
    #[arg(long, global = true)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Data-based, data-based AT and closed-loop rows with curve and trace CSVs.
    ReproduceTable2,
    /// Scaling-bound draws, UCB demo and the closed-loop inequality.
    Verify {
        #[arg(long)]
        draws: Option<usize>,
    },
    /// One closed-loop rollout exported as CSV.
    Simulate {
        /// Overrides `simulate.model` with a built-in model.
        #[arg(long, value_enum)]
        model: Option<BuiltinModel>,
    },
    /// One selection run.
    Select {
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Seeded UCB on (x - 0.3)^2 over [0, 1].
    BoDemo,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuiltinModel {
    Perfect,
    Zero,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Data,
    ClosedLoop,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    let draws = match cli.command {
        Command::Verify { draws } => draws,
        _ => None,
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out,
        reps: cli.reps,
        budget: cli.budget,
        draws,
    })?;
    let start = Instant::now();
    match cli.command {
        Command::ReproduceTable2 => {
            let t = commands::reproduce_table2(&cfg)?;
            for r in &t.rows {
                println!(
                    "{:<14} {:<16} phi {:?} extra {:.4} loss {:.4} cost {:.3}",
                    r.method,
                    r.kernel.name(),
                    r.phi,
                    r.extra,
                    r.loss,
                    r.cost
                );
            }
        }
        Command::Verify { .. } => {
            if cfg.verify.draws == 0 {
                eprintln!(
                    "warning: zero scaling draws requested; the scaling check passes vacuously"
                );
            }
            let report = commands::verify(&cfg)?;
            for line in report.summary_lines() {
                println!("{line}");
            }
            if !report.passed() {
                return Err(CliError::Pipeline("verification failed".into()));
            }
        }
        Command::Simulate { model } => {
            match model {
                Some(BuiltinModel::Perfect) => cfg.simulate.model = SimulateModel::Perfect,
                Some(BuiltinModel::Zero) => cfg.simulate.model = SimulateModel::Zero,
                None => {}
            }
            let (trace, cost) = commands::simulate(&cfg)?;
            println!(
                "steps {} diverged {} cost {cost:.6}",
                trace.inputs.len(),
                trace.diverged
            );
        }
        Command::Select { mode } => {
            let mode = match mode {
                Mode::Data => SelectMode::Data,
                Mode::ClosedLoop => SelectMode::ClosedLoop,
            };
            let r = commands::select(&cfg, mode)?;
            println!(
                "{} phi {:?} extra {:.4} loss {:.4} cost {:.3}",
                r.family.name(),
                r.phi,
                r.extra,
                r.loss,
                r.cost
            );
        }
        Command::BoDemo => {
            let s = commands::bo_demo(&cfg)?;
            let best = s.incumbent().expect("budget is at least 1");
            println!("incumbent x {:.6} y {:.3e}", best.phi[0], best.cost);
        }
    }
    eprintln!(
        "done in {:.1} s, artifacts in {}",
        start.elapsed().as_secs_f64(),
        cfg.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
