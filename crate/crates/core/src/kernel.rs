//! Dense k-particle kernels `γ(x_1..x_k; x'_1..x'_k)` sampled on a grid.
//!
//! Values are stored row-major with the unprimed slots first, so the flat
//! index of `(u_1..u_k; v_1..v_k)` is `U·Mᵏ + V` where `M = Nⁿ` and `U`, `V`
//! are the base-`M` numbers formed by the slot indices.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mul_slotwise, weighted_inner, weighted_norm_sq, GridSpec};

/// Default cap on dense kernel entries (2²⁶ complex values, 1 GiB).
pub const DEFAULT_MAX_DENSE_ENTRIES: usize = 1 << 26;
/// Default cap on separable rank.
pub const DEFAULT_RANK_CAP: usize = 4096;

/// Memory limits for dense kernels and separable ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_dense_entries: usize,
    pub rank_cap: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_dense_entries: DEFAULT_MAX_DENSE_ENTRIES,
            rank_cap: DEFAULT_RANK_CAP,
        }
    }
}

impl Budget {
    pub fn check_dense(&self, grid: &GridSpec, particles: usize) -> Result<usize> {
        let requested = (grid.slot_len() as u128).pow(2 * particles as u32);
        if requested > self.max_dense_entries as u128 {
            return Err(Error::Budget {
                requested,
                cap: self.max_dense_entries,
            });
        }
        Ok(requested as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    Cubic,
    Quintic,
}

impl Interaction {
    /// How many levels the collision operator reaches up: 1 (cubic) or 2 (quintic).
    pub fn reach(self) -> usize {
        match self {
            Interaction::Cubic => 1,
            Interaction::Quintic => 2,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Interaction::Cubic => 1,
            Interaction::Quintic => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(Interaction::Cubic),
            2 => Some(Interaction::Quintic),
            _ => None,
        }
    }
}

/// Coupling sign, interaction type and Sobolev regularity of a hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    mu: i32,
    interaction: Interaction,
    alpha: f64,
}

impl ModelSpec {
    pub fn new(mu: i32, interaction: Interaction, alpha: f64) -> Result<Self> {
        if mu != 1 && mu != -1 {
            return Err(Error::config(format!("model.mu: must be +1 or -1, got {mu}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config(format!(
                "model.alpha: must be finite and positive, got {alpha}"
            )));
        }
        Ok(ModelSpec {
            mu,
            interaction,
            alpha,
        })
    }

    pub fn cubic(mu: i32, alpha: f64) -> Result<Self> {
        Self::new(mu, Interaction::Cubic, alpha)
    }

    pub fn quintic(mu: i32, alpha: f64) -> Result<Self> {
        Self::new(mu, Interaction::Quintic, alpha)
    }

    pub fn mu(&self) -> i32 {
        self.mu
    }

    pub fn interaction(&self) -> Interaction {
        self.interaction
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The factor `−iμ` of the signed collision operators.
    pub fn signed_factor(&self) -> C64 {
        C64::new(0.0, -(self.mu as f64))
    }
}

/// A single-particle grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    grid: GridSpec,
    values: Vec<C64>,
}

impl WaveFunction {
    pub fn new(grid: &GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.slot_len() {
            return Err(Error::shape(format!(
                "wave function has {} values, grid slot has {}",
                values.len(),
                grid.slot_len()
            )));
        }
        Ok(WaveFunction {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        WaveFunction {
            grid: grid.clone(),
            values: vec![C64::default(); grid.slot_len()],
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let values = (0..grid.slot_len()).map(|i| f(&grid.coords(i))).collect();
        WaveFunction {
            grid: grid.clone(),
            values,
        }
    }

    /// `φ(x) = Σ c_p e^{i p·x}` from a list of `(p, c_p)`.
    pub fn from_modes(grid: &GridSpec, modes: &[(Vec<i64>, C64)]) -> Result<Self> {
        for (p, _) in modes {
            if grid.frequencies().index_of(p).is_none() {
                return Err(Error::config(format!(
                    "initial.modes: mode {p:?} is not representable on an N={} grid in n={}",
                    grid.points(),
                    grid.dim()
                )));
            }
        }
        Ok(Self::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(p, c)| {
                    let phase: f64 = p.iter().zip(x).map(|(&q, &xi)| q as f64 * xi).sum();
                    c * C64::from_polar(1.0, phase)
                })
                .sum()
        }))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn fourier(&self) -> Vec<C64> {
        let mut c = self.values.clone();
        self.grid.forward(&mut c, 1);
        c
    }

    /// Grid L² mass `hⁿ Σ|φ|²`.
    pub fn mass(&self) -> f64 {
        self.grid.cell() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn h_alpha_inner(&self, other: &WaveFunction, alpha: f64) -> C64 {
        let w2 = self.grid.frequencies().weights_sq(alpha);
        let a = self.fourier();
        let b = other.fourier();
        weighted_inner(&a, &b, self.grid.slot_len(), &[&w2])
    }

    pub fn h_alpha_norm(&self, alpha: f64) -> f64 {
        let w2 = self.grid.frequencies().weights_sq(alpha);
        weighted_norm_sq(&self.fourier(), self.grid.slot_len(), &[&w2]).sqrt()
    }

    /// `e^{itΔ}φ`, the Fourier phase `e^{−it|p|²}`.
    pub fn free_propagate(&self, t: f64) -> WaveFunction {
        let mut c = self.fourier();
        let table = phase_table(&self.grid, -t);
        mul_slotwise(&mut c, self.grid.slot_len(), &[&table]);
        self.grid.inverse(&mut c, 1);
        WaveFunction {
            grid: self.grid.clone(),
            values: c,
        }
    }

    pub fn scaled(&self, c: C64) -> WaveFunction {
        WaveFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `e^{i s |p|²}` per slot mode.
pub(crate) fn phase_table(grid: &GridSpec, s: f64) -> Vec<C64> {
    grid.frequencies()
        .slot_p2()
        .iter()
        .map(|&p2| C64::from_polar(1.0, s * p2))
        .collect()
}

/// Multiplies Fourier coefficients of a level-`k` kernel by the free phase
/// `exp(−it(Σ|p_j|² − Σ|p'_j|²))`.
pub(crate) fn apply_free_phase(coeffs: &mut [C64], grid: &GridSpec, particles: usize, t: f64) {
    if t == 0.0 {
        return;
    }
    let unprimed = phase_table(grid, -t);
    let primed = phase_table(grid, t);
    let mut tables: Vec<&[C64]> = Vec::with_capacity(2 * particles);
    tables.extend(std::iter::repeat_n(unprimed.as_slice(), particles));
    tables.extend(std::iter::repeat_n(primed.as_slice(), particles));
    mul_slotwise(coeffs, grid.slot_len(), &tables);
}

/// Weighted H^α norm² of Fourier coefficients of a level-`k` kernel.
pub(crate) fn fourier_norm_sq(coeffs: &[C64], grid: &GridSpec, particles: usize, alpha: f64) -> f64 {
    let w2 = grid.frequencies().weights_sq(alpha);
    let tables: Vec<&[f64]> = std::iter::repeat_n(w2.as_slice(), 2 * particles).collect();
    weighted_norm_sq(coeffs, grid.slot_len(), &tables)
}

/// A dense k-particle kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseKernel {
    particles: usize,
    grid: GridSpec,
    values: Vec<C64>,
}

impl DenseKernel {
    pub fn zeros(grid: &GridSpec, particles: usize, budget: &Budget) -> Result<Self> {
        if particles == 0 {
            return Err(Error::config("kernel particle number must be at least 1"));
        }
        let len = budget.check_dense(grid, particles)?;
        Ok(DenseKernel {
            particles,
            grid: grid.clone(),
            values: vec![C64::default(); len],
        })
    }

    pub fn from_values(grid: &GridSpec, particles: usize, values: Vec<C64>) -> Result<Self> {
        if particles == 0 {
            return Err(Error::config("kernel particle number must be at least 1"));
        }
        let expected = (grid.slot_len() as u128).pow(2 * particles as u32);
        if values.len() as u128 != expected {
            return Err(Error::shape(format!(
                "level-{particles} kernel needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(DenseKernel {
            particles,
            grid: grid.clone(),
            values,
        })
    }

    /// Kernel whose scaled Fourier coefficients are `coeffs`.
    pub fn from_fourier(grid: &GridSpec, particles: usize, mut coeffs: Vec<C64>) -> Result<Self> {
        let expected = (grid.slot_len() as u128).pow(2 * particles as u32);
        if coeffs.len() as u128 != expected {
            return Err(Error::shape(format!(
                "level-{particles} kernel needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        grid.inverse(&mut coeffs, 2 * particles);
        Self::from_values(grid, particles, coeffs)
    }

    /// The product kernel `∏ φ(x_j) conj(φ(x'_j))`.
    pub fn tensor_from_wavefunction(phi: &WaveFunction, particles: usize, budget: &Budget) -> Result<Self> {
        if particles == 0 {
            return Err(Error::config("kernel particle number must be at least 1"));
        }
        let grid = phi.grid();
        budget.check_dense(grid, particles)?;
        let conj: Vec<C64> = phi.values().iter().map(|v| v.conj()).collect();
        let mut values = vec![C64::new(1.0, 0.0)];
        for s in 0..2 * particles {
            let table = if s < particles { phi.values() } else { &conj[..] };
            let mut next = Vec::with_capacity(values.len() * table.len());
            for a in &values {
                next.extend(table.iter().map(|b| a * b));
            }
            values = next;
        }
        Self::from_values(grid, particles, values)
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fourier(&self) -> Vec<C64> {
        let mut c = self.values.clone();
        self.grid.forward(&mut c, 2 * self.particles);
        c
    }

    pub fn h_alpha_norm(&self, alpha: f64) -> f64 {
        fourier_norm_sq(&self.fourier(), &self.grid, self.particles, alpha).sqrt()
    }

    /// `⟨S g1, S g2⟩`, linear in the first argument.
    pub fn inner_product(&self, other: &DenseKernel, alpha: f64) -> Result<C64> {
        self.check_same_shape(other)?;
        let w2 = self.grid.frequencies().weights_sq(alpha);
        let tables: Vec<&[f64]> = std::iter::repeat_n(w2.as_slice(), 2 * self.particles)
            .collect();
        Ok(weighted_inner(
            &self.fourier(),
            &other.fourier(),
            self.grid.slot_len(),
            &tables,
        ))
    }

    /// `e^{it△±}γ`.
    pub fn free_propagate(&self, t: f64) -> DenseKernel {
        if t == 0.0 {
            return self.clone();
        }
        let mut c = self.fourier();
        apply_free_phase(&mut c, &self.grid, self.particles, t);
        self.grid.inverse(&mut c, 2 * self.particles);
        DenseKernel {
            particles: self.particles,
            grid: self.grid.clone(),
            values: c,
        }
    }

    pub(crate) fn check_same_shape(&self, other: &DenseKernel) -> Result<()> {
        if self.particles != other.particles || self.grid != other.grid {
            return Err(Error::shape(format!(
                "kernels differ: level {} on N={} n={} vs level {} on N={} n={}",
                self.particles,
                self.grid.points(),
                self.grid.dim(),
                other.particles,
                other.grid.points(),
                other.grid.dim()
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, c: C64) -> DenseKernel {
        DenseKernel {
            particles: self.particles,
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: C64, other: &DenseKernel) -> Result<()> {
        self.check_same_shape(other)?;
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn add(&self, other: &DenseKernel) -> Result<DenseKernel> {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &DenseKernel) -> Result<DenseKernel> {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn block(&self) -> usize {
        self.grid.slot_len().pow(self.particles as u32)
    }

    /// `max |γ(x;x') − conj γ(x';x)| / max |γ|`, zero for the zero kernel.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let b = self.block();
        let mut worst = 0.0f64;
        for u in 0..b {
            for v in 0..b {
                let d = (self.values[u * b + v] - self.values[v * b + u].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    /// `(γ + γ*)/2` with `γ*(x;x') = conj γ(x';x)`.
    pub fn hermitian_part(&self) -> DenseKernel {
        let b = self.block();
        let mut out = self.values.clone();
        for u in 0..b {
            for v in 0..b {
                out[u * b + v] = 0.5 * (self.values[u * b + v] + self.values[v * b + u].conj());
            }
        }
        DenseKernel {
            particles: self.particles,
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Average over all `k!` particle permutations, applied to primed and
    /// unprimed coordinates together.
    pub fn symmetric_part(&self) -> DenseKernel {
        let k = self.particles;
        let m = self.grid.slot_len();
        let mut perms: Vec<Vec<usize>> = vec![Vec::new()];
        for slot in 0..k {
            perms = perms
                .into_iter()
                .flat_map(|p| {
                    (0..=slot).map(move |at| {
                        let mut q = p.clone();
                        q.insert(at, slot);
                        q
                    })
                })
                .collect();
        }
        let weight = 1.0 / perms.len() as f64;
        let mut out = vec![C64::default(); self.values.len()];
        let mut digits = vec![0usize; 2 * k];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut rem = flat;
            for d in (0..2 * k).rev() {
                digits[d] = rem % m;
                rem /= m;
            }
            let mut acc = C64::default();
            for p in &perms {
                let src = p
                    .iter()
                    .map(|&i| digits[i])
                    .chain(p.iter().map(|&i| digits[k + i]))
                    .fold(0usize, |a, d| a * m + d);
                acc += self.values[src];
            }
            *slot = acc * weight;
        }
        DenseKernel {
            particles: k,
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Largest relative change under adjacent transpositions of particle
    /// slots (applied to primed and unprimed coordinates together).
    pub fn permutation_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 || self.particles < 2 {
            return 0.0;
        }
        let m = self.grid.slot_len();
        let slots = 2 * self.particles;
        let mut worst = 0.0f64;
        let mut digits = vec![0usize; slots];
        for s in 0..self.particles - 1 {
            for (flat, value) in self.values.iter().enumerate() {
                let mut rem = flat;
                for d in (0..slots).rev() {
                    digits[d] = rem % m;
                    rem /= m;
                }
                digits.swap(s, s + 1);
                digits.swap(self.particles + s, self.particles + s + 1);
                let swapped = digits.iter().fold(0usize, |acc, &d| acc * m + d);
                worst = worst.max((value - self.values[swapped]).norm());
            }
        }
        worst / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn is_permutation_symmetric(&self, tol: f64) -> bool {
        self.permutation_defect() <= tol
    }
}

/// `‖tensor_from_wavefunction(φ, k)‖` without building it: `‖φ‖^{2k}`.
pub fn factorized_norm(phi: &WaveFunction, particles: usize, alpha: f64) -> f64 {
    phi.h_alpha_norm(alpha).powi(2 * particles as i32)
}
