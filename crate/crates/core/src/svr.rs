//! ε-insensitive support vector regression.
//!
//! The dual is solved in the standard `2m`-variable form
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  yᵀα = 0,  0 ≤ α ≤ C
//! ```
//!
//! with `y = (+1…, −1…)`, `p = (ε − b, ε + b)` and `Q[s][t] = yₛ yₜ k(x_s, x_t)`,
//! using pairwise updates and second-order working-set selection
//! (Fan, Chen & Lin, 2005). The regression coefficients are `βᵢ = αᵢ − αᵢ₊ₘ`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::Dataset;
use crate::kernels::{gram_matrix, KernelSpec};
use crate::linalg::Matrix;

/// Box constraint used when the targets have zero interquartile range.
pub const FALLBACK_BOX_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const MAX_ITERATIONS: usize = 1_000_000;

const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    spec: KernelSpec,
    epsilon: f64,
    box_c: f64,
    centers: Matrix,
    duals: Vec<f64>,
    /// Row index of each center in the training set.
    support_indices: Vec<usize>,
    bias: f64,
    dual_objective: f64,
    iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvrParams {
    pub epsilon: f64,
    pub box_c: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

impl SvrParams {
    pub fn new(epsilon: f64, box_c: f64) -> Self {
        Self {
            epsilon,
            box_c,
            tol: DEFAULT_TOL,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

/// Percentile with midpoint plotting positions `100(i − ½)/n` and linear
/// interpolation, clamped to the sample range.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let pos = p / 100.0 * n as f64 - 0.5;
    if pos <= 0.0 {
        return Some(v[0]);
    }
    if pos >= (n - 1) as f64 {
        return Some(v[n - 1]);
    }
    let lo = pos as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + frac * (v[lo + 1] - v[lo]))
}

/// Scale-aware default box constraint `iqr(b)/1.349`, a robust estimate of
/// the target standard deviation. Falls back to [`FALLBACK_BOX_C`] when the
/// interquartile range vanishes.
pub fn default_box_c(targets: &[f64]) -> f64 {
    match (percentile(targets, 25.0), percentile(targets, 75.0)) {
        (Some(q1), Some(q3)) if q3 - q1 > 0.0 => (q3 - q1) / 1.349,
        _ => FALLBACK_BOX_C,
    }
}

pub fn train_svr(
    data: &Dataset,
    spec: &KernelSpec,
    epsilon: f64,
    box_c: f64,
    tol: f64,
) -> Result<SvrModel> {
    train_svr_with(
        data,
        spec,
        &SvrParams {
            epsilon,
            box_c,
            tol,
            max_iterations: MAX_ITERATIONS,
        },
    )
}

pub fn train_svr_with(data: &Dataset, spec: &KernelSpec, params: &SvrParams) -> Result<SvrModel> {
    let SvrParams {
        epsilon,
        box_c,
        tol,
        max_iterations,
    } = *params;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    if !(box_c > 0.0) || !box_c.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!(
            "box constraint must be > 0, got {box_c}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let m = data.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "SVR needs at least two training points".into(),
        ));
    }
    let k = gram_matrix(spec, data.inputs())?;
    let b = data.targets();
    let n = 2 * m;

    let sign = |t: usize| if t < m { 1.0 } else { -1.0 };
    let base = |t: usize| if t < m { t } else { t - m };
    let kdiag: Vec<f64> = (0..m).map(|i| k[(i, i)]).collect();
    let p: Vec<f64> = (0..n)
        .map(|t| {
            if t < m {
                epsilon - b[t]
            } else {
                epsilon + b[t - m]
            }
        })
        .collect();

    let mut alpha = vec![0.0; n];
    let mut grad = p.clone();
    let c = box_c;
    let in_up = |t: usize, a: f64| if t < m { a < c } else { a > 0.0 };
    let in_low = |t: usize, a: f64| if t < m { a > 0.0 } else { a < c };

    let mut iterations = 0usize;
    loop {
        // first index: maximal violation over I_up
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(t, alpha[t]) {
                let v = -sign(t) * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = t;
                }
            }
        }
        // second index: largest guaranteed decrease over I_low
        let mut g_min = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_gain = f64::INFINITY;
        for t in 0..n {
            if !in_low(t, alpha[t]) {
                continue;
            }
            let v = -sign(t) * grad[t];
            if v < g_min {
                g_min = v;
            }
            if i_sel == usize::MAX {
                continue;
            }
            let diff = g_max - v;
            if diff > 0.0 {
                let (bi, bt) = (base(i_sel), base(t));
                let mut quad = kdiag[bi] + kdiag[bt] - 2.0 * k[(bi, bt)];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let gain = -(diff * diff) / quad;
                if gain <= best_gain {
                    best_gain = gain;
                    j_sel = t;
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || g_max - g_min < tol {
            break;
        }
        if iterations >= max_iterations {
            return Err(Error::SvrNotConverged { iterations });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (bi, bj) = (base(i), base(j));
        let (yi, yj) = (sign(i), sign(j));
        let qij = yi * yj * k[(bi, bj)];
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if yi != yj {
            let mut quad = kdiag[bi] + kdiag[bj] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kdiag[bi] + kdiag[bj] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        debug_assert_eq!(grad.len(), n);
        for (t, g) in grad.iter_mut().enumerate() {
            let bt = base(t);
            let yt = sign(t);
            *g += yt * (yi * k[(bt, bi)] * dai + yj * k[(bt, bj)] * daj);
        }
    }

    // bias from free variables, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..n {
        let yg = sign(t) * grad[t];
        if alpha[t] >= c {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        0.5 * (ub + lb)
    };
    let dual_objective = 0.5 * (0..n).map(|t| alpha[t] * (grad[t] + p[t])).sum::<f64>();

    let mut support_indices = Vec::new();
    let mut duals = Vec::new();
    let mut center_data = Vec::new();
    for i in 0..m {
        let beta = alpha[i] - alpha[i + m];
        if beta != 0.0 {
            support_indices.push(i);
            duals.push(beta);
            center_data.extend_from_slice(data.input(i));
        }
    }
    let centers = Matrix::from_row_major(duals.len(), data.input_dim(), center_data)
        .expect("center rows match dual count");

    let bias = -rho;
    if !bias.is_finite() || duals.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("SVR solution"));
    }
    Ok(SvrModel {
        spec: spec.clone(),
        epsilon,
        box_c,
        centers,
        duals,
        support_indices,
        bias,
        dual_objective,
        iterations,
    })
}

impl SvrModel {
    /// `Σᵢ βᵢ k(x, cᵢ) + bias`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim(),
                found: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.centers
            .iter_rows()
            .zip(&self.duals)
            .map(|(c, d)| d * self.spec.value(x, c))
            .sum::<f64>()
            + self.bias
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn box_c(&self) -> f64 {
        self.box_c
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn duals(&self) -> &[f64] {
        &self.duals
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Value of `½ αᵀQα + pᵀα` at the solution.
    pub fn dual_objective(&self) -> f64 {
        self.dual_objective
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Dual coefficient of training row `i` (zero for non-support points).
    pub fn dual_of(&self, i: usize) -> f64 {
        self.support_indices
            .iter()
            .position(|&s| s == i)
            .map_or(0.0, |p| self.duals[p])
    }
}

pub fn predict_svr(model: &SvrModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

pub fn count_support_vectors(model: &SvrModel) -> usize {
    model.duals.len()
}
