use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{HyperparameterDomain, KernelFamily};
use crate::math;

/// One discrete option of the search space: a kernel family and its box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: KernelFamily,
    pub domain: HyperparameterDomain,
}

/// Mixed search space: a kernel index `j ∈ 1..=n` and, for each `j`, the
/// kernel's own box followed by `extra` dimensions shared by all candidates
/// (for instance the SVR tube width or a GP noise level).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    candidates: Vec<Candidate>,
    extra: HyperparameterDomain,
}

/// A point of the search space. `phi` holds the kernel hyperparameters
/// followed by the extra dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoPoint {
    pub kernel_index: usize,
    pub phi: Vec<f64>,
}

impl BoPoint {
    pub fn new(kernel_index: usize, phi: Vec<f64>) -> Self {
        Self { kernel_index, phi }
    }
}

impl SearchSpace {
    pub fn new(candidates: Vec<Candidate>, extra: HyperparameterDomain) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidArgument(
                "search space needs at least one candidate".into(),
            ));
        }
        Ok(Self { candidates, extra })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn extra(&self) -> &HyperparameterDomain {
        &self.extra
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Candidate for a 1-based index.
    pub fn candidate(&self, kernel_index: usize) -> Option<&Candidate> {
        kernel_index
            .checked_sub(1)
            .and_then(|i| self.candidates.get(i))
    }

    /// Largest kernel-hyperparameter count over the candidates.
    pub fn max_arity(&self) -> usize {
        self.candidates
            .iter()
            .map(|c| c.domain.dim())
            .max()
            .unwrap_or(0)
    }

    /// Length of encoded vectors: index, padded kernel block, extra block.
    pub fn encoded_dim(&self) -> usize {
        1 + self.max_arity() + self.extra.dim()
    }

    /// Full box `Φʲ × extra` of candidate `kernel_index`.
    pub fn domain(&self, kernel_index: usize) -> Option<HyperparameterDomain> {
        self.candidate(kernel_index)
            .map(|c| c.domain.join(&self.extra))
    }

    /// Number of continuous coordinates for candidate `kernel_index`.
    pub fn free_dims(&self, kernel_index: usize) -> usize {
        self.candidate(kernel_index)
            .map_or(0, |c| c.domain.dim() + self.extra.dim())
    }

    pub fn contains(&self, p: &BoPoint) -> bool {
        self.domain(p.kernel_index)
            .is_some_and(|d| d.contains(&p.phi))
    }

    /// Splits `phi` into the kernel block and the extra block.
    pub fn split<'a>(&self, p: &'a BoPoint) -> (&'a [f64], &'a [f64]) {
        let k = self
            .candidate(p.kernel_index)
            .map_or(0, |c| c.domain.dim())
            .min(p.phi.len());
        p.phi.split_at(k)
    }

    /// `[j, unit(φ) padded with 0.5, unit(extra)]`.
    pub fn encode(&self, p: &BoPoint) -> Vec<f64> {
        let mut z = vec![0.5; self.encoded_dim()];
        z[0] = p.kernel_index as f64;
        if let Some(c) = self.candidate(p.kernel_index) {
            let k = c.domain.dim();
            for i in 0..k.min(p.phi.len()) {
                z[1 + i] = c.domain.to_unit_coord(i, p.phi[i]);
            }
            let off = 1 + self.max_arity();
            for i in 0..self.extra.dim() {
                if let Some(v) = p.phi.get(k + i) {
                    z[off + i] = self.extra.to_unit_coord(i, *v);
                }
            }
        }
        z
    }

    /// Inverse of [`encode`](Self::encode). The index is rounded and clamped
    /// into range and every coordinate projected into its box.
    pub fn decode(&self, z: &[f64]) -> BoPoint {
        let n = self.n_candidates();
        let j = round_index(z.first().copied().unwrap_or(1.0), n);
        let c = &self.candidates[j - 1];
        let k = c.domain.dim();
        let off = 1 + self.max_arity();
        let mut phi = Vec::with_capacity(k + self.extra.dim());
        for i in 0..k {
            phi.push(
                c.domain
                    .from_unit_coord(i, z.get(1 + i).copied().unwrap_or(0.5)),
            );
        }
        for i in 0..self.extra.dim() {
            phi.push(
                self.extra
                    .from_unit_coord(i, z.get(off + i).copied().unwrap_or(0.5)),
            );
        }
        BoPoint {
            kernel_index: j,
            phi,
        }
    }

    /// Encoded point of candidate `j` from its free unit coordinates.
    pub(crate) fn embed(&self, kernel_index: usize, free_unit: &[f64]) -> Vec<f64> {
        let k = self.candidate(kernel_index).map_or(0, |c| c.domain.dim());
        let mut z = vec![0.5; self.encoded_dim()];
        z[0] = kernel_index as f64;
        z[1..1 + k].copy_from_slice(&free_unit[..k]);
        let off = 1 + self.max_arity();
        z[off..].copy_from_slice(&free_unit[k..]);
        z
    }

    /// Free unit coordinates of an encoded point (inverse of `embed`).
    pub(crate) fn free_part(&self, z: &[f64]) -> Vec<f64> {
        let j = round_index(z[0], self.n_candidates());
        let k = self.candidates[j - 1].domain.dim();
        let off = 1 + self.max_arity();
        let mut u: Vec<f64> = z[1..1 + k].to_vec();
        u.extend_from_slice(&z[off..]);
        u
    }

    /// Short human-readable label of a candidate.
    pub fn label(&self, kernel_index: usize) -> String {
        self.candidate(kernel_index)
            .map_or_else(|| "?".into(), |c| c.family.name().into())
    }
}

/// Nearest valid 1-based index.
pub fn round_index(v: f64, n: usize) -> usize {
    let r = if v.is_finite() { math::round(v) } else { 1.0 };
    (r.max(1.0) as usize).min(n.max(1))
}

/// Integer-aware input transformation for the surrogate: the index coordinate
/// is rounded before any distance is computed, so the surrogate is constant
/// between integers.
pub fn transform(z: &[f64]) -> Vec<f64> {
    let mut t = z.to_vec();
    if let Some(first) = t.first_mut() {
        *first = math::round(*first);
    }
    t
}
