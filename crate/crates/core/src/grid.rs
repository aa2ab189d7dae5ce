//! Periodic grids on `[0, 2π)ⁿ`, integer Fourier frequencies and Sobolev weights.
//!
//! Every transform in the crate goes through [`GridSpec::forward`] and
//! [`GridSpec::inverse`]. The forward transform is scaled so that the grid
//! L² norm `hⁿ Σ|f(x)|²` equals the plain ℓ² norm of the coefficients, for
//! single-particle functions and for kernels over any number of slots.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Integer frequencies of one grid together with per-slot lookup tables.
///
/// A "slot" is one particle coordinate `x_j ∈ [0,2π)ⁿ`, flattened row-major to
/// an index in `0..Nⁿ`.
#[derive(Clone, Debug)]
pub struct FrequencySet {
    axis: Vec<i64>,
    slot_modes: Vec<Vec<i64>>,
    slot_p2: Vec<f64>,
    slot_neg: Vec<usize>,
}

impl FrequencySet {
    fn new(dim: usize, points: usize) -> Self {
        let axis: Vec<i64> = (0..points)
            .map(|i| if i < points / 2 { i as i64 } else { i as i64 - points as i64 })
            .collect();
        let slot_len = points.pow(dim as u32);
        let mut slot_modes = Vec::with_capacity(slot_len);
        let mut slot_neg = Vec::with_capacity(slot_len);
        for m in 0..slot_len {
            let mut rem = m;
            let mut digits = vec![0usize; dim];
            for d in (0..dim).rev() {
                digits[d] = rem % points;
                rem /= points;
            }
            slot_modes.push(digits.iter().map(|&i| axis[i]).collect::<Vec<_>>());
            let neg = digits
                .iter()
                .fold(0usize, |acc, &i| acc * points + (points - i) % points);
            slot_neg.push(neg);
        }
        let slot_p2 = slot_modes
            .iter()
            .map(|p| p.iter().map(|&q| (q * q) as f64).sum())
            .collect();
        FrequencySet {
            axis,
            slot_modes,
            slot_p2,
            slot_neg,
        }
    }

    /// Frequencies along one axis in transform (storage) order.
    pub fn axis(&self) -> &[i64] {
        &self.axis
    }

    /// Frequencies along one axis in increasing order, `−N/2 ..= N/2 − 1`.
    pub fn axis_sorted(&self) -> Vec<i64> {
        let mut v = self.axis.clone();
        v.sort_unstable();
        v
    }

    /// Multi-index of the slot mode stored at `index`.
    pub fn mode(&self, index: usize) -> &[i64] {
        &self.slot_modes[index]
    }

    /// Storage index of a slot mode, if it is representable on the grid.
    pub fn index_of(&self, mode: &[i64]) -> Option<usize> {
        let points = self.axis.len() as i64;
        if mode.len() != self.slot_modes[0].len() {
            return None;
        }
        mode.iter().try_fold(0usize, |acc, &p| {
            if p < -points / 2 || p >= points / 2 {
                None
            } else {
                Some(acc * points as usize + p.rem_euclid(points) as usize)
            }
        })
    }

    /// `|p|²` per slot mode.
    pub fn slot_p2(&self) -> &[f64] {
        &self.slot_p2
    }

    /// Storage index of `−p` per slot mode.
    pub fn slot_neg(&self) -> &[usize] {
        &self.slot_neg
    }

    pub fn slot_len(&self) -> usize {
        self.slot_p2.len()
    }

    /// `w_α(p)` for every slot mode.
    pub fn weights(&self, alpha: f64) -> Vec<f64> {
        self.slot_p2.iter().map(|&p2| weight_from_p2(p2, alpha)).collect()
    }

    /// `w_α(p)²` for every slot mode.
    pub fn weights_sq(&self, alpha: f64) -> Vec<f64> {
        self.slot_p2.iter().map(|&p2| weight_from_p2(p2, 2.0 * alpha)).collect()
    }
}

fn weight_from_p2(p2: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        (1.0 + p2).powf(alpha / 2.0)
    }
}

/// Sobolev multiplier `(1 + |p|²)^{α/2}` of a frequency multi-index.
pub fn sobolev_weight(p: &[i64], alpha: f64) -> f64 {
    let p2: f64 = p.iter().map(|&q| (q * q) as f64).sum();
    weight_from_p2(p2, alpha)
}

/// Uniform periodic grid with `N` points per axis on the torus of length 2π.
#[derive(Clone)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    spacing: f64,
    freqs: FrequencySet,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("dim", &self.dim)
            .field("points", &self.points)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points
    }
}

impl Eq for GridSpec {}

/// Builds the grid for dimension `n ∈ {1, 2}` with `points` (even, ≥ 4) per axis.
pub fn make_grid(n: usize, points: usize) -> Result<GridSpec> {
    GridSpec::new(n, points)
}

impl GridSpec {
    pub fn new(dim: usize, points: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::config(format!(
                "grid.n: dimension must be 1 or 2, got {dim}"
            )));
        }
        if points < 4 || !points.is_multiple_of(2) {
            return Err(Error::config(format!(
                "grid.points: must be even and at least 4, got {points}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(GridSpec {
            dim,
            points,
            spacing: TAU / points as f64,
            freqs: FrequencySet::new(dim, points),
            fwd: planner.plan_fft_forward(points),
            inv: planner.plan_fft_inverse(points),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        TAU
    }

    pub fn frequencies(&self) -> &FrequencySet {
        &self.freqs
    }

    /// Points per slot, `Nⁿ`.
    pub fn slot_len(&self) -> usize {
        self.freqs.slot_len()
    }

    /// Physical coordinates of slot point `index`.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut out = vec![0.0; self.dim];
        for d in (0..self.dim).rev() {
            out[d] = (rem % self.points) as f64 * self.spacing;
            rem /= self.points;
        }
        out
    }

    /// Cell volume `hⁿ` of one slot.
    pub fn cell(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Scaled forward transform over `slots` particle coordinates, in place.
    pub fn forward(&self, data: &mut [C64], slots: usize) {
        let axes = slots * self.dim;
        self.transform(data, axes, &self.fwd);
        let scale = TAU.powf(axes as f64 / 2.0) / (self.points as f64).powi(axes as i32);
        data.iter_mut().for_each(|c| *c *= scale);
    }

    /// Inverse of [`GridSpec::forward`].
    pub fn inverse(&self, data: &mut [C64], slots: usize) {
        let axes = slots * self.dim;
        self.transform(data, axes, &self.inv);
        let scale = TAU.powf(-(axes as f64) / 2.0);
        data.iter_mut().for_each(|c| *c *= scale);
    }

    fn transform(&self, data: &mut [C64], axes: usize, plan: &Arc<dyn Fft<f64>>) {
        const BATCH: usize = 64;
        let n = self.points;
        debug_assert_eq!(data.len(), n.pow(axes as u32));
        let mut scratch = vec![C64::default(); plan.get_inplace_scratch_len()];
        let mut buf = vec![C64::default(); n * BATCH];
        for a in 0..axes {
            let stride = n.pow((axes - 1 - a) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            for chunk in data.chunks_exact_mut(block) {
                // gather up to BATCH columns at a time so reads stay contiguous
                for c0 in (0..stride).step_by(BATCH) {
                    let width = BATCH.min(stride - c0);
                    for r in 0..n {
                        let row = &chunk[r * stride + c0..r * stride + c0 + width];
                        for (c, v) in row.iter().enumerate() {
                            buf[c * n + r] = *v;
                        }
                    }
                    plan.process_with_scratch(&mut buf[..width * n], &mut scratch);
                    for r in 0..n {
                        let row = &mut chunk[r * stride + c0..r * stride + c0 + width];
                        for (c, v) in row.iter_mut().enumerate() {
                            *v = buf[c * n + r];
                        }
                    }
                }
            }
        }
    }
}

/// Multiplies `data` (shape `[m; tables.len()]`) by `∏_s tables[s][i_s]`.
pub(crate) fn mul_slotwise(data: &mut [C64], m: usize, tables: &[&[C64]]) {
    fn rec(data: &mut [C64], m: usize, tables: &[&[C64]], acc: C64) {
        if tables.len() == 1 {
            for (d, t) in data.iter_mut().zip(tables[0]) {
                *d *= acc * t;
            }
            return;
        }
        let chunk = data.len() / m;
        for (i, sub) in data.chunks_exact_mut(chunk).enumerate() {
            rec(sub, m, &tables[1..], acc * tables[0][i]);
        }
    }
    if tables.is_empty() {
        return;
    }
    rec(data, m, tables, C64::new(1.0, 0.0));
}

/// `Σ ∏_s tables[s][i_s] · a_i · conj(b_i)` with a fixed recursion order.
pub(crate) fn weighted_inner(a: &[C64], b: &[C64], m: usize, tables: &[&[f64]]) -> C64 {
    fn rec(a: &[C64], b: &[C64], m: usize, tables: &[&[f64]]) -> C64 {
        if tables.len() == 1 {
            return a
                .iter()
                .zip(b)
                .zip(tables[0])
                .map(|((x, y), w)| x * y.conj() * w)
                .sum();
        }
        let chunk = a.len() / m;
        a.chunks_exact(chunk)
            .zip(b.chunks_exact(chunk))
            .zip(tables[0])
            .map(|((x, y), w)| rec(x, y, m, &tables[1..]) * w)
            .sum()
    }
    if tables.is_empty() {
        return a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    }
    rec(a, b, m, tables)
}

/// `Σ ∏_s tables[s][i_s] · |a_i|²`.
pub(crate) fn weighted_norm_sq(a: &[C64], m: usize, tables: &[&[f64]]) -> f64 {
    fn rec(a: &[C64], m: usize, tables: &[&[f64]]) -> f64 {
        if tables.len() == 1 {
            return a.iter().zip(tables[0]).map(|(x, w)| x.norm_sqr() * w).sum();
        }
        let chunk = a.len() / m;
        a.chunks_exact(chunk)
            .zip(tables[0])
            .map(|(x, w)| rec(x, m, &tables[1..]) * w)
            .sum()
    }
    if tables.is_empty() {
        return a.iter().map(|x| x.norm_sqr()).sum();
    }
    rec(a, m, tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(len: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn spacing_is_two_pi_over_n() {
        let g = make_grid(1, 8).unwrap();
        assert!((g.spacing() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((g.spacing() * 8.0 - TAU).abs() <= f64::EPSILON * TAU);
    }

    #[test]
    fn rejects_bad_configurations() {
        assert!(matches!(make_grid(1, 7), Err(Error::Config(_))));
        assert!(matches!(make_grid(1, 2), Err(Error::Config(_))));
        assert!(matches!(make_grid(3, 8), Err(Error::Config(_))));
        assert!(matches!(make_grid(0, 8), Err(Error::Config(_))));
    }

    #[test]
    fn frequency_axis_for_n16() {
        let g = make_grid(2, 16).unwrap();
        assert_eq!(g.frequencies().axis_sorted(), (-8..=7).collect::<Vec<i64>>());
        assert_eq!(g.slot_len(), 256);
        let idx = g.frequencies().index_of(&[-3, 5]).unwrap();
        assert_eq!(g.frequencies().mode(idx), &[-3, 5]);
        let neg = g.frequencies().slot_neg()[idx];
        assert_eq!(g.frequencies().mode(neg), &[3, -5]);
    }

    #[test]
    fn sobolev_weight_examples() {
        assert_eq!(sobolev_weight(&[0], 1.0), 1.0);
        assert!((sobolev_weight(&[1], 2.0) - 2.0).abs() < 1e-15);
        assert!((sobolev_weight(&[1, 1], 1.0) - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weights_monotone_and_unit_at_zero() {
        let g = make_grid(2, 8).unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.5] {
            let w = g.frequencies().weights(alpha);
            let z = g.frequencies().index_of(&[0, 0]).unwrap();
            assert_eq!(w[z], 1.0);
            let p2 = g.frequencies().slot_p2();
            for i in 0..w.len() {
                assert!(w[i] >= 1.0);
                for j in 0..w.len() {
                    if p2[i] <= p2[j] {
                        assert!(w[i] <= w[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        for (n, points, slots) in [(1, 8, 1), (1, 8, 4), (2, 8, 2), (1, 16, 2)] {
            let g = make_grid(n, points).unwrap();
            let len = g.slot_len().pow(slots as u32);
            let f = random(len, 11 + len as u64);
            let mut c = f.clone();
            g.forward(&mut c, slots);
            let phys: f64 = f.iter().map(|x| x.norm_sqr()).sum::<f64>()
                * g.cell().powi(slots as i32);
            let spec: f64 = c.iter().map(|x| x.norm_sqr()).sum();
            assert!((phys - spec).abs() <= 1e-12 * phys, "parseval {phys} {spec}");
            g.inverse(&mut c, slots);
            let err = f
                .iter()
                .zip(&c)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let norm = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-12 * norm);
        }
    }

    #[test]
    fn plane_wave_lands_on_its_mode() {
        let g = make_grid(2, 8).unwrap();
        let mut f: Vec<C64> = (0..g.slot_len())
            .map(|i| {
                let x = g.coords(i);
                C64::from_polar(1.0, 2.0 * x[0] - 3.0 * x[1])
            })
            .collect();
        g.forward(&mut f, 1);
        let idx = g.frequencies().index_of(&[2, -3]).unwrap();
        for (i, c) in f.iter().enumerate() {
            if i == idx {
                assert!((c.re - TAU).abs() < 1e-12 && c.im.abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12);
            }
        }
    }
}
