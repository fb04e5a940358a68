//! RKHS norms of finite kernel expansions and the lengthscale-scaling bound.
//!
//! For the scaling check the stationary kernel is
//! `k(x, x′) = exp(−(x − x′)ᵀ Σ⁻¹ (x − x′))` with `Σ = diag(φ)`, so `φᵢ` plays
//! the role of a squared lengthscale. The bound `Π φᵢ/φ′ᵢ` also dominates the
//! tighter `Π √(φᵢ/φ′ᵢ)` that holds under this reading, so the check is valid
//! under either interpretation of `Σ`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, HyperparameterDomain, KernelSpec};
use crate::linalg::{self, dot, Matrix};
use crate::math;

/// Diagonal jitter added to both Gram matrices of the scaling check.
pub const SCALING_JITTER: f64 = 1e-10;
/// Relative slack of the scaling check.
pub const SCALING_RTOL: f64 = 1e-8;
const INDEFINITE_RTOL: f64 = 1e-10;

/// `f(·) = Σᵢ αᵢ k(cᵢ, ·)` for a stationary kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelExpansion {
    spec: KernelSpec,
    centers: Matrix,
    coeffs: Vec<f64>,
}

impl KernelExpansion {
    pub fn new(spec: KernelSpec, centers: Matrix, coeffs: Vec<f64>) -> Result<Self> {
        if !spec.family().is_stationary() {
            return Err(Error::InvalidArgument(format!(
                "{} is not stationary",
                spec.family()
            )));
        }
        if centers.rows() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.rows(),
                found: coeffs.len(),
            });
        }
        if centers.cols() != spec.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.input_dim(),
                found: centers.cols(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !centers.is_finite() {
            return Err(Error::NonFinite("kernel expansion"));
        }
        for i in 0..centers.rows() {
            for j in 0..i {
                if centers.row(i) == centers.row(j) {
                    return Err(Error::InvalidArgument(format!(
                        "centers {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            spec,
            centers,
            coeffs,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centers
            .iter_rows()
            .zip(&self.coeffs)
            .map(|(c, a)| a * self.spec.value(c, x))
            .sum()
    }
}

/// `√(αᵀKα)`. Quadratic forms slightly below zero from rounding are
/// clamped; clearly negative ones are reported.
pub fn rkhs_norm(expansion: &KernelExpansion) -> Result<f64> {
    if expansion.coeffs.is_empty() {
        return Ok(0.0);
    }
    let k = gram_matrix(&expansion.spec, &expansion.centers)?;
    let q = dot(&expansion.coeffs, &k.mul_vec(&expansion.coeffs));
    let scale = dot(&expansion.coeffs, &expansion.coeffs) * k.trace();
    if q < -INDEFINITE_RTOL * scale {
        return Err(Error::IndefiniteGram { value: q });
    }
    Ok(math::sqrt(q.max(0.0)))
}

/// Outcome of [`scaling_bound_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    /// `fᵀK_{φ′}⁻¹f`.
    pub lhs: f64,
    /// `Π(φᵢ/φ′ᵢ) · fᵀK_φ⁻¹f`.
    pub rhs: f64,
    pub holds: bool,
}

fn scaling_kernel(phi: &[f64]) -> Result<KernelSpec> {
    let lengthscales: Vec<f64> = phi.iter().map(|p| math::sqrt(*p)).collect();
    KernelSpec::se_ard(1.0, &lengthscales)
}

fn interpolant_norm_sq(spec: &KernelSpec, grid: &Matrix, values: &[f64]) -> Result<f64> {
    let mut k = gram_matrix(spec, grid)?;
    k.add_diagonal(SCALING_JITTER);
    let l = linalg::cholesky(&k).ok_or(Error::Factorization {
        jitter: SCALING_JITTER,
    })?;
    let w = linalg::solve_lower(&l, values);
    Ok(dot(&w, &w))
}

/// Compares the minimal-norm interpolant of `values` on `grid` under `φ′`
/// with the bound implied by its norm under `φ`.
pub fn scaling_bound_check(
    values: &[f64],
    grid: &Matrix,
    phi: &[f64],
    phi_prime: &[f64],
) -> Result<ScalingCheck> {
    if grid.rows() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.rows(),
            found: values.len(),
        });
    }
    if phi.len() != grid.cols() || phi_prime.len() != grid.cols() {
        return Err(Error::DimensionMismatch {
            expected: grid.cols(),
            found: phi.len().min(phi_prime.len()),
        });
    }
    for (p, q) in phi.iter().zip(phi_prime) {
        if !(*q > 0.0 && q <= p && p.is_finite()) {
            return Err(Error::InvalidHyperparameter(format!(
                "need 0 < phi' <= phi, got phi' = {q}, phi = {p}"
            )));
        }
    }
    let ratio: f64 = phi.iter().zip(phi_prime).map(|(p, q)| p / q).product();
    let lhs = interpolant_norm_sq(&scaling_kernel(phi_prime)?, grid, values)?;
    let rhs = ratio * interpolant_norm_sq(&scaling_kernel(phi)?, grid, values)?;
    Ok(ScalingCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + SCALING_RTOL),
    })
}

/// Box `[shrink·φ*ᵢ, grow·φ*ᵢ]`, log-scaled, with `φ*` strictly inside.
pub fn build_superset(phi_star: &[f64], shrink: f64, grow: f64) -> Result<HyperparameterDomain> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrink must lie in (0, 1), got {shrink}"
        )));
    }
    if !(grow > 1.0 && grow.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grow must exceed 1, got {grow}"
        )));
    }
    if phi_star.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidHyperparameter(format!(
            "phi* must be positive, got {phi_star:?}"
        )));
    }
    HyperparameterDomain::new(
        phi_star.iter().map(|p| shrink * p).collect(),
        phi_star.iter().map(|p| grow * p).collect(),
        alloc::vec![true; phi_star.len()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_center_has_unit_norm() {
        let e = KernelExpansion::new(
            KernelSpec::gaussian(0.7, 1).unwrap(),
            Matrix::from_row_major(1, 1, vec![0.3]).unwrap(),
            vec![1.0],
        )
        .unwrap();
        assert_eq!(rkhs_norm(&e).unwrap(), 1.0);
    }

    #[test]
    fn zero_values_give_zero_bound() {
        let grid = Matrix::from_row_major(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let c = scaling_bound_check(&[0.0; 3], &grid, &[1.0], &[0.5]).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (0.0, 0.0, true));
    }

    #[test]
    fn superset_arithmetic() {
        let d = build_superset(&[1.0, 2.0], 0.5, 2.0).unwrap();
        assert_eq!((d.lower(), d.upper()), (&[0.5, 1.0][..], &[2.0, 4.0][..]));
        assert!(build_superset(&[1.0], 1.0, 2.0).is_err());
        assert!(build_superset(&[1.0], 0.5, 1.0).is_err());
    }

    #[test]
    fn rejects_linear_and_reversed_order() {
        let c = Matrix::from_row_major(1, 1, vec![0.0]).unwrap();
        assert!(KernelExpansion::new(KernelSpec::linear(1), c.clone(), vec![1.0]).is_err());
        assert!(scaling_bound_check(&[1.0], &c, &[1.0], &[2.0]).is_err());
    }
}
