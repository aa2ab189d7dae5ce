//! Contact-interaction contraction operators.
//!
//! On the grid a delta pairing is an index substitution: the trace slots of
//! the input kernel are pinned to the coordinate of slot `j`. The `−iμ` sign
//! appears only in [`CollisionSpec`], never in the unsigned operators.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{DenseKernel, Interaction, ModelSpec};
use crate::lowrank::{SeparableKernel, SeparableTerm};

/// Which coordinate of slot `j` the trace slots collapse onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Unprimed,
    Primed,
}

fn check_slot(j: usize, k: usize) -> Result<()> {
    if j == 0 || j > k {
        return Err(Error::config(format!("collision slot j = {j} outside 1..={k}")));
    }
    Ok(())
}

/// Restrict the last `extra` slot pairs of `g` onto slot `j` (1-based).
fn contract(g: &DenseKernel, j: usize, extra: usize, side: Side) -> Result<DenseKernel> {
    let total = g.particles();
    if total <= extra {
        return Err(Error::shape(format!(
            "contraction needs a kernel above level {extra}, got level {total}"
        )));
    }
    let k = total - extra;
    check_slot(j, k)?;
    let grid = g.grid();
    let m = grid.slot_len();
    let mk = m.pow(k as u32);
    let me = m.pow(extra as u32);
    let mke = mk * me;
    // s·(1 + M + … + M^{e−1}) places coordinate s in every trace slot
    let rep: usize = (0..extra).map(|i| m.pow(i as u32)).sum();
    let stride_j = m.pow((k - j) as u32);
    let src = g.values();
    let mut out = vec![C64::default(); mk * mk];
    out.par_chunks_mut(mk).enumerate().for_each(|(u, row)| {
        let xj = (u / stride_j) % m;
        let base_u = u * me;
        for (v, o) in row.iter_mut().enumerate() {
            let s = match side {
                Side::Unprimed => xj,
                Side::Primed => (v / stride_j) % m,
            };
            let idx = (base_u + s * rep) * mke + v * me + s * rep;
            *o = src[idx];
        }
    });
    DenseKernel::from_values(grid, k, out)
}

/// `B¹_{j,k}`: trace slot pinned to `x_j`.
pub fn b1(j: usize, g: &DenseKernel) -> Result<DenseKernel> {
    contract(g, j, 1, Side::Unprimed)
}

/// `B²_{j,k}`: trace slot pinned to `x'_j`.
pub fn b2(j: usize, g: &DenseKernel) -> Result<DenseKernel> {
    contract(g, j, 1, Side::Primed)
}

pub fn b_jk(j: usize, g: &DenseKernel) -> Result<DenseKernel> {
    b1(j, g)?.sub(&b2(j, g)?)
}

/// Unsigned `B^(k) = Σ_j B_{j,k}`.
pub fn b_full(g: &DenseKernel) -> Result<DenseKernel> {
    sum_over_slots(g, 1)
}

pub fn q_jk(j: usize, g: &DenseKernel) -> Result<DenseKernel> {
    contract(g, j, 2, Side::Unprimed)?.sub(&contract(g, j, 2, Side::Primed)?)
}

/// Unsigned `Q^(k) = Σ_j Q_{j,k}`.
pub fn q_full(g: &DenseKernel) -> Result<DenseKernel> {
    sum_over_slots(g, 2)
}

fn sum_over_slots(g: &DenseKernel, extra: usize) -> Result<DenseKernel> {
    if g.particles() <= extra {
        return Err(Error::shape(format!(
            "contraction needs a kernel above level {extra}, got level {}",
            g.particles()
        )));
    }
    let k = g.particles() - extra;
    let mut acc = contract(g, 1, extra, Side::Unprimed)?;
    acc.axpy(C64::new(-1.0, 0.0), &contract(g, 1, extra, Side::Primed)?)?;
    for j in 2..=k {
        acc.axpy(C64::new(1.0, 0.0), &contract(g, j, extra, Side::Unprimed)?)?;
        acc.axpy(C64::new(-1.0, 0.0), &contract(g, j, extra, Side::Primed)?)?;
    }
    Ok(acc)
}

fn pointwise(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn separable_sum(s: &SeparableKernel, extra: usize, factor: C64) -> Result<SeparableKernel> {
    let total = s.particles();
    if total <= extra {
        return Err(Error::shape(format!(
            "contraction needs a kernel above level {extra}, got level {total}"
        )));
    }
    let k = total - extra;
    let rank = 2 * k * s.rank();
    if rank > s.rank_cap() {
        return Err(Error::RankCap {
            rank,
            cap: s.rank_cap(),
        });
    }
    let mut terms = Vec::with_capacity(rank);
    for t in s.terms() {
        // density of the trace slots: ∏ a_l·conj(b_l) over l > k
        let mut trace = vec![C64::new(1.0, 0.0); s.grid().slot_len()];
        for l in k..total {
            for ((d, a), b) in trace.iter_mut().zip(&t.left[l]).zip(&t.right[l]) {
                *d *= a * b.conj();
            }
        }
        let trace_conj: Vec<C64> = trace.iter().map(|v| v.conj()).collect();
        for j in 0..k {
            let mut left = t.left[..k].to_vec();
            left[j] = pointwise(&left[j], &trace);
            terms.push(SeparableTerm {
                coeff: t.coeff * factor,
                left,
                right: t.right[..k].to_vec(),
            });
            let mut right = t.right[..k].to_vec();
            right[j] = pointwise(&right[j], &trace_conj);
            terms.push(SeparableTerm {
                coeff: -t.coeff * factor,
                left: t.left[..k].to_vec(),
                right,
            });
        }
    }
    SeparableKernel::from_terms(s.grid(), k, s.rank_cap(), terms)
}

/// Unsigned `B^(k)` on a separable kernel; rank grows to `2·k·r`.
pub fn b_full_separable(s: &SeparableKernel) -> Result<SeparableKernel> {
    separable_sum(s, 1, C64::new(1.0, 0.0))
}

/// Unsigned `Q^(k)` on a separable kernel; rank grows to `2·k·r`.
pub fn q_full_separable(s: &SeparableKernel) -> Result<SeparableKernel> {
    separable_sum(s, 2, C64::new(1.0, 0.0))
}

/// Signed collision operator `B̃^(k) = −iμB^(k)` or `Q̃^(k) = −iμQ^(k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionSpec {
    pub interaction: Interaction,
    pub mu: i32,
}

impl CollisionSpec {
    pub fn new(interaction: Interaction, mu: i32) -> Result<Self> {
        if mu != 1 && mu != -1 {
            return Err(Error::config(format!("model.mu must be +1 or -1, got {mu}")));
        }
        Ok(CollisionSpec { interaction, mu })
    }

    pub fn from_model(model: &ModelSpec) -> Self {
        CollisionSpec {
            interaction: model.interaction(),
            mu: model.mu(),
        }
    }

    /// Level gap between input and output.
    pub fn reach(&self) -> usize {
        self.interaction.reach()
    }

    pub fn factor(&self) -> C64 {
        C64::new(0.0, -(self.mu as f64))
    }

    pub fn apply_unsigned(&self, g: &DenseKernel) -> Result<DenseKernel> {
        match self.interaction {
            Interaction::Cubic => b_full(g),
            Interaction::Quintic => q_full(g),
        }
    }

    pub fn apply(&self, g: &DenseKernel) -> Result<DenseKernel> {
        Ok(self.apply_unsigned(g)?.scaled(self.factor()))
    }

    pub fn apply_separable(&self, s: &SeparableKernel) -> Result<SeparableKernel> {
        separable_sum(s, self.reach(), self.factor())
    }
}
