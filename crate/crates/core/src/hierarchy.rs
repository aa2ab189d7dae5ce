//! Truncated hierarchies and the quasi-norm `½·inf{λ : Σ_k λ^{−k} a_k ≤ 1}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernel::{Budget, DenseKernel, ModelSpec, WaveFunction};
use crate::lowrank::{Kernel, Representation, SeparableKernel};

pub const DEFAULT_REL_TOL: f64 = 1e-12;
pub const MAX_BISECTION_STEPS: usize = 200;

/// Levels `γ^(1)..γ^(K)` sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    model: ModelSpec,
    grid: GridSpec,
    levels: Vec<Kernel>,
    factor: Option<WaveFunction>,
}

impl Hierarchy {
    pub fn new(model: ModelSpec, levels: Vec<Kernel>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::config("truncation.K must be at least 1"))?;
        let grid = first.grid().clone();
        for (i, level) in levels.iter().enumerate() {
            if level.particles() != i + 1 {
                return Err(Error::shape(format!(
                    "hierarchy slot {} holds a level-{} kernel",
                    i + 1,
                    level.particles()
                )));
            }
            if level.grid() != &grid {
                return Err(Error::shape(format!("hierarchy level {} uses a different grid", i + 1)));
            }
        }
        Ok(Hierarchy {
            model,
            grid,
            levels,
            factor: None,
        })
    }

    /// `γ^(k) = |φ⟩⟨φ|^{⊗k}` for `k = 1..K`.
    pub fn factorized(
        phi: &WaveFunction,
        model: ModelSpec,
        truncation: usize,
        representation: Representation,
        budget: &Budget,
    ) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::config("truncation.K must be at least 1"));
        }
        let levels = (1..=truncation)
            .map(|k| {
                Ok(match representation {
                    Representation::Dense => DenseKernel::tensor_from_wavefunction(phi, k, budget)?.into(),
                    Representation::Separable => {
                        SeparableKernel::factorized_with_cap(phi, k, budget.rank_cap).into()
                    }
                })
            })
            .collect::<Result<Vec<Kernel>>>()?;
        let mut h = Hierarchy::new(model, levels)?;
        h.factor = Some(phi.clone());
        Ok(h)
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn truncation(&self) -> usize {
        self.levels.len()
    }

    /// Level `k` (1-based).
    pub fn level(&self, k: usize) -> Option<&Kernel> {
        k.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn levels(&self) -> &[Kernel] {
        &self.levels
    }

    /// The one-particle state this hierarchy was built from, if factorized.
    pub fn factor(&self) -> Option<&WaveFunction> {
        self.factor.as_ref()
    }

    pub fn norm_sequence(&self) -> Result<NormSequence> {
        let alpha = self.model.alpha();
        let values = self
            .levels
            .iter()
            .map(|k| k.h_alpha_norm(alpha))
            .collect::<Result<Vec<f64>>>()?;
        NormSequence::new(values)
    }

    pub fn quasi_norm(&self, rel_tol: f64) -> Result<QuasiNormResult> {
        quasi_norm(&self.norm_sequence()?, rel_tol)
    }
}

/// Level norms `a_k = ‖γ^(k)‖_{H^α_k}`, `k = 1..K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormSequence(Vec<f64>);

impl NormSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("norm sequence entry {} is {v}", i + 1)));
            }
            if *v < 0.0 {
                return Err(Error::config(format!("norm sequence entry {} is negative ({v})", i + 1)));
            }
        }
        Ok(NormSequence(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ_k λ^{−k} a_k`, summed in log space.
    pub fn series(&self, lambda: f64) -> f64 {
        let ln = lambda.ln();
        self.0
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0.0)
            .map(|(i, a)| (a.ln() - (i + 1) as f64 * ln).exp())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiNormResult {
    pub value: f64,
    pub lambda_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub converged: bool,
}

pub fn quasi_norm(a: &NormSequence, rel_tol: f64) -> Result<QuasiNormResult> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return Err(Error::config(format!("rel_tol must lie in (0, 1e-2], got {rel_tol}")));
    }
    let lo0 = a
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (v.ln() / (i + 1) as f64).exp())
        .fold(0.0, f64::max);
    if lo0 == 0.0 {
        return Ok(QuasiNormResult {
            value: 0.0,
            lambda_star: 0.0,
            bracket: (0.0, 0.0),
            iterations: 0,
            converged: true,
        });
    }
    let (mut lo, mut hi) = (lo0, 2.0 * lo0);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_BISECTION_STEPS {
        if hi - lo <= rel_tol * lo.max(1.0) {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        if a.series(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let lambda_star = 0.5 * (lo + hi);
    Ok(QuasiNormResult {
        value: 0.5 * lambda_star,
        lambda_star,
        bracket: (lo, hi),
        iterations,
        converged,
    })
}

/// `Σ_k ξ^k a_k` for `0 < ξ < 1`.
pub fn xi_weighted_norm(a: &NormSequence, xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::config(format!("xi must lie in (0, 1), got {xi}")));
    }
    Ok(a
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| xi.powi(i as i32 + 1) * v)
        .sum())
}

/// Trapezoid in time of each level norm, then the quasi-norm of the integrals.
///
/// `samples[i]` holds the level norms at `t_i = i·dt`.
pub fn l1t_quasi_norm(samples: &[NormSequence], dt: f64, rel_tol: f64) -> Result<QuasiNormResult> {
    if samples.len() < 2 {
        return Err(Error::config(format!(
            "time integral needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    let levels = samples[0].len();
    if samples.iter().any(|s| s.len() != levels) {
        return Err(Error::shape("norm samples have different truncation levels"));
    }
    let last = samples.len() - 1;
    let integrals = (0..levels)
        .map(|k| {
            let inner: f64 = samples[1..last].iter().map(|s| s.values()[k]).sum();
            dt * (inner + 0.5 * (samples[0].values()[k] + samples[last].values()[k]))
        })
        .collect();
    quasi_norm(&NormSequence::new(integrals)?, rel_tol)
}
