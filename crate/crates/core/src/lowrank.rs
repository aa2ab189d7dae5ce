//! Separable kernels `Σ_r c_r ∏_j a_{r,j}(x_j) conj(b_{r,j}(x'_j))`.
//!
//! Factors are stored in physical space. Ranks only grow (sums, collision
//! operators); an operation whose result would exceed the rank cap fails.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernel::{phase_table, Budget, DenseKernel, WaveFunction, DEFAULT_RANK_CAP};

/// Fourier coefficients of a term's left and right factors.
type FourierFactors = (Vec<Vec<C64>>, Vec<Vec<C64>>);

#[derive(Clone, Debug, PartialEq)]
pub struct SeparableTerm {
    pub coeff: C64,
    /// Unprimed factors `a_1..a_k`, each `Nⁿ` grid values.
    pub left: Vec<Vec<C64>>,
    /// Primed factors `b_1..b_k`; they enter the kernel conjugated.
    pub right: Vec<Vec<C64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparableKernel {
    particles: usize,
    grid: GridSpec,
    rank_cap: usize,
    terms: Vec<SeparableTerm>,
}

impl SeparableKernel {
    pub fn empty(grid: &GridSpec, particles: usize, rank_cap: usize) -> Self {
        SeparableKernel {
            particles,
            grid: grid.clone(),
            rank_cap,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(
        grid: &GridSpec,
        particles: usize,
        rank_cap: usize,
        terms: Vec<SeparableTerm>,
    ) -> Result<Self> {
        if particles == 0 {
            return Err(Error::config("kernel particle number must be at least 1"));
        }
        if terms.len() > rank_cap {
            return Err(Error::RankCap {
                rank: terms.len(),
                cap: rank_cap,
            });
        }
        let m = grid.slot_len();
        for (r, t) in terms.iter().enumerate() {
            if t.left.len() != particles || t.right.len() != particles {
                return Err(Error::shape(format!(
                    "term {r} has {}/{} factors, expected {particles}",
                    t.left.len(),
                    t.right.len()
                )));
            }
            if t.left.iter().chain(&t.right).any(|f| f.len() != m) {
                return Err(Error::shape(format!("term {r} has a factor of the wrong length")));
            }
        }
        Ok(SeparableKernel {
            particles,
            grid: grid.clone(),
            rank_cap,
            terms,
        })
    }

    /// Rank-1 kernel with every factor equal to `φ`.
    pub fn factorized(phi: &WaveFunction, particles: usize) -> Self {
        Self::factorized_with_cap(phi, particles, DEFAULT_RANK_CAP)
    }

    pub fn factorized_with_cap(phi: &WaveFunction, particles: usize, rank_cap: usize) -> Self {
        let f = phi.values().to_vec();
        SeparableKernel {
            particles,
            grid: phi.grid().clone(),
            rank_cap,
            terms: vec![SeparableTerm {
                coeff: C64::new(1.0, 0.0),
                left: vec![f.clone(); particles],
                right: vec![f; particles],
            }],
        }
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn rank_cap(&self) -> usize {
        self.rank_cap
    }

    pub fn terms(&self) -> &[SeparableTerm] {
        &self.terms
    }

    pub fn with_rank_cap(mut self, rank_cap: usize) -> Result<Self> {
        if self.terms.len() > rank_cap {
            return Err(Error::RankCap {
                rank: self.terms.len(),
                cap: rank_cap,
            });
        }
        self.rank_cap = rank_cap;
        Ok(self)
    }

    pub fn to_dense(&self, budget: &Budget) -> Result<DenseKernel> {
        let len = budget.check_dense(&self.grid, self.particles)?;
        let mut out = vec![C64::default(); len];
        for term in &self.terms {
            let conj: Vec<Vec<C64>> = term
                .right
                .iter()
                .map(|b| b.iter().map(|v| v.conj()).collect())
                .collect();
            let mut values = vec![term.coeff];
            for table in term.left.iter().chain(&conj) {
                let mut next = Vec::with_capacity(values.len() * table.len());
                for a in &values {
                    next.extend(table.iter().map(|b| a * b));
                }
                values = next;
            }
            out.iter_mut().zip(&values).for_each(|(o, v)| *o += v);
        }
        DenseKernel::from_values(&self.grid, self.particles, out)
    }

    fn check_same_shape(&self, other: &SeparableKernel) -> Result<()> {
        if self.particles != other.particles || self.grid != other.grid {
            return Err(Error::shape(format!(
                "separable kernels differ: level {} vs {} (N={} vs N={})",
                self.particles,
                other.particles,
                self.grid.points(),
                other.grid.points()
            )));
        }
        Ok(())
    }

    /// `⟨self, other⟩_{H^α}` from per-slot Gram matrices.
    pub fn inner_product(&self, other: &SeparableKernel, alpha: f64) -> Result<C64> {
        self.check_same_shape(other)?;
        let w2 = self.grid.frequencies().weights_sq(alpha);
        let coeffs = |k: &SeparableKernel| -> Vec<FourierFactors> {
            k.terms
                .iter()
                .map(|t| {
                    let f = |v: &Vec<C64>| {
                        let mut c = v.clone();
                        self.grid.forward(&mut c, 1);
                        c
                    };
                    (t.left.iter().map(f).collect(), t.right.iter().map(f).collect())
                })
                .collect()
        };
        let lhs = coeffs(self);
        let rhs = if std::ptr::eq(self, other) { lhs.clone() } else { coeffs(other) };
        let dot = |x: &[C64], y: &[C64]| -> C64 {
            x.iter().zip(y).zip(&w2).map(|((a, b), w)| a * b.conj() * w).sum()
        };
        let mut total = C64::default();
        for (r, (la, lb)) in lhs.iter().enumerate() {
            for (s, (ra, rb)) in rhs.iter().enumerate() {
                let mut prod = self.terms[r].coeff * other.terms[s].coeff.conj();
                for j in 0..self.particles {
                    prod *= dot(&la[j], &ra[j]) * dot(&rb[j], &lb[j]);
                }
                total += prod;
            }
        }
        Ok(total)
    }

    /// H^α norm via the Gram quadratic form.
    pub fn gram_norm(&self, alpha: f64) -> Result<f64> {
        let q = self.inner_product(self, alpha)?;
        let scale = self
            .terms
            .iter()
            .map(|t| t.coeff.norm())
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        if q.re < -1e-10 * scale.max(1.0) {
            return Err(Error::Numerical(format!(
                "Gram quadratic form is negative ({:e}); factors are inconsistent",
                q.re
            )));
        }
        Ok(q.re.max(0.0).sqrt())
    }

    /// Slot-wise `e^{it△±}`: `e^{−it|p|²}` on every factor. Right factors
    /// enter conjugated, which turns theirs into the `e^{+it|p'|²}` of the kernel.
    pub fn propagate(&self, t: f64) -> SeparableKernel {
        if t == 0.0 {
            return self.clone();
        }
        let phase = phase_table(&self.grid, -t);
        let apply = |v: &Vec<C64>, table: &[C64]| {
            let mut c = v.clone();
            self.grid.forward(&mut c, 1);
            c.iter_mut().zip(table).for_each(|(x, p)| *x *= p);
            self.grid.inverse(&mut c, 1);
            c
        };
        let terms = self
            .terms
            .iter()
            .map(|t| SeparableTerm {
                coeff: t.coeff,
                left: t.left.iter().map(|v| apply(v, &phase)).collect(),
                right: t.right.iter().map(|v| apply(v, &phase)).collect(),
            })
            .collect();
        SeparableKernel {
            terms,
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> SeparableKernel {
        SeparableKernel {
            particles: self.particles,
            grid: self.grid.clone(),
            rank_cap: self.rank_cap,
            terms: Vec::new(),
        }
    }

    pub fn add(&self, other: &SeparableKernel) -> Result<SeparableKernel> {
        self.check_same_shape(other)?;
        let rank = self.rank() + other.rank();
        if rank > self.rank_cap {
            return Err(Error::RankCap {
                rank,
                cap: self.rank_cap,
            });
        }
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out)
    }

    pub fn scaled(&self, c: C64) -> SeparableKernel {
        let mut out = self.clone();
        out.terms.iter_mut().for_each(|t| t.coeff *= c);
        out
    }
}

/// Storage choice for hierarchy levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Dense,
    Separable,
}

/// A kernel in either representation.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    Dense(DenseKernel),
    Separable(SeparableKernel),
}

impl Kernel {
    pub fn particles(&self) -> usize {
        match self {
            Kernel::Dense(d) => d.particles(),
            Kernel::Separable(s) => s.particles(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            Kernel::Dense(d) => d.grid(),
            Kernel::Separable(s) => s.grid(),
        }
    }

    pub fn representation(&self) -> Representation {
        match self {
            Kernel::Dense(_) => Representation::Dense,
            Kernel::Separable(_) => Representation::Separable,
        }
    }

    pub fn h_alpha_norm(&self, alpha: f64) -> Result<f64> {
        match self {
            Kernel::Dense(d) => Ok(d.h_alpha_norm(alpha)),
            Kernel::Separable(s) => s.gram_norm(alpha),
        }
    }

    pub fn propagate(&self, t: f64) -> Kernel {
        match self {
            Kernel::Dense(d) => Kernel::Dense(d.free_propagate(t)),
            Kernel::Separable(s) => Kernel::Separable(s.propagate(t)),
        }
    }

    pub fn to_dense(&self, budget: &Budget) -> Result<DenseKernel> {
        match self {
            Kernel::Dense(d) => Ok(d.clone()),
            Kernel::Separable(s) => s.to_dense(budget),
        }
    }

    pub fn as_dense(&self) -> Option<&DenseKernel> {
        match self {
            Kernel::Dense(d) => Some(d),
            Kernel::Separable(_) => None,
        }
    }

    pub fn as_separable(&self) -> Option<&SeparableKernel> {
        match self {
            Kernel::Separable(s) => Some(s),
            Kernel::Dense(_) => None,
        }
    }
}

impl From<DenseKernel> for Kernel {
    fn from(d: DenseKernel) -> Self {
        Kernel::Dense(d)
    }
}

impl From<SeparableKernel> for Kernel {
    fn from(s: SeparableKernel) -> Self {
        Kernel::Separable(s)
    }
}
