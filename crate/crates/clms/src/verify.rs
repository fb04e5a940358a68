//! Numeric self-checks: lengthscale scaling of RKHS norms, a seeded UCB
//! demo with a known minimizer, and the closed-loop-versus-data-based
//! inequality.

use clms_core::bo::{run_bo, AcquisitionKind, BoConfig, BoState, Candidate, SearchSpace};
use clms_core::kernels::{HyperparameterDomain, KernelFamily};
use clms_core::linalg::Matrix;
use clms_core::rkhs::scaling_bound_check;
use clms_core::selection::{closed_loop_selection, data_based_selection, SelectionSetup};
use clms_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Minimizer of the demo objective `(x − 0.3)²` on `[0, 1]`.
pub const DEMO_MINIMIZER: f64 = 0.3;
pub const DEMO_TOLERANCE: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingDraw {
    pub grid: Matrix,
    pub values: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_prime: Vec<f64>,
}

/// 3 to 8 grid points with pairwise distance above 0.9, `φ ∈ [0.1, 1)ᵈ` and
/// `φ′ = φ·[0.2, 1)`, so both Gram matrices stay well conditioned.
pub fn scaling_draw(rng: &mut ChaCha8Rng, dim: usize) -> ScalingDraw {
    let n = rng.gen_range(3..=8);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n);
    while pts.len() < n {
        let p: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(0.0..1.5 * n as f64))
            .collect();
        if pts
            .iter()
            .all(|q| q.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() > 0.81)
        {
            pts.push(p);
        }
    }
    let phi: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..1.0)).collect();
    let phi_prime = phi.iter().map(|p| p * rng.gen_range(0.2..1.0)).collect();
    let values = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    ScalingDraw {
        grid: Matrix::from_rows(&pts).expect("non-empty grid"),
        values,
        phi,
        phi_prime,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub draws: usize,
    pub passed: usize,
    /// Largest `lhs / rhs` seen; at most `1 + 1e-8` when every draw passes.
    pub worst_ratio: f64,
}

/// `draws` checks alternating between 1-D and 2-D grids.
pub fn scaling_suite(draws: usize, seed: u64) -> Result<ScalingReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = 0;
    let mut worst_ratio = 0.0f64;
    for i in 0..draws {
        let d = scaling_draw(&mut rng, 1 + i % 2);
        let c = scaling_bound_check(&d.values, &d.grid, &d.phi, &d.phi_prime)?;
        passed += usize::from(c.holds);
        if c.rhs > 0.0 {
            worst_ratio = worst_ratio.max(c.lhs / c.rhs);
        }
    }
    Ok(ScalingReport {
        draws,
        passed,
        worst_ratio,
    })
}

/// Seeded UCB on `(x − 0.3)²` over `[0, 1]`.
pub fn ucb_demo(iterations: usize, seed: u64) -> Result<BoState> {
    let unit = HyperparameterDomain::new(vec![0.0], vec![1.0], vec![false])?;
    let space = SearchSpace::new(
        vec![Candidate {
            family: KernelFamily::Linear,
            domain: HyperparameterDomain::empty(),
        }],
        unit,
    )?;
    let config = BoConfig::new(iterations, AcquisitionKind::UpperConfidenceBound, seed);
    run_bo(
        |p| Ok::<_, Error>((p.phi[0] - DEMO_MINIMIZER).powi(2)),
        &space,
        &config,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStartRun {
    pub seed: u64,
    /// Closed-loop cost of the data-based selection.
    pub initial_cost: f64,
    pub final_cost: f64,
}

impl WarmStartRun {
    pub fn holds(&self) -> bool {
        self.final_cost <= self.initial_cost
    }
}

/// One data-based selection, then `runs` closed-loop searches seeded
/// `seed + 1..` that evaluate the data-based point first.
pub fn warm_start_suite(
    setup: &SelectionSetup,
    data_budget: usize,
    runs: usize,
    budget: usize,
    seed: u64,
) -> Result<Vec<WarmStartRun>> {
    let db = data_based_selection(setup, data_budget, seed)?;
    (1..=runs as u64)
        .map(|r| {
            let s = seed.wrapping_add(r);
            let cl = closed_loop_selection(setup, budget, s, Some(db.point()))?;
            Ok(WarmStartRun {
                seed: s,
                initial_cost: db.cost,
                final_cost: cl.cost,
            })
        })
        .collect()
}
