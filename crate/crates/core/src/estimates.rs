//! Empirical operator constants, binomial envelopes and convergence tables.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::collision::{b_jk, q_jk};
use crate::error::{Error, Result};
use crate::grid::{mul_slotwise, GridSpec};
use crate::hierarchy::{quasi_norm, NormSequence, DEFAULT_REL_TOL};
use crate::kernel::{Budget, DenseKernel, Interaction, ModelSpec};
use crate::picard::{IncrementRow, PicardSolver};

pub const MIN_SAMPLES: usize = 10;
/// Extra decay of the random ensemble beyond `α + n/2`.
pub const ENSEMBLE_MARGIN: f64 = 0.25;
pub const DEFAULT_A_HAT: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRecord {
    pub k: usize,
    pub j: usize,
    pub sample: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotMax {
    pub k: usize,
    pub j: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub interaction: Interaction,
    pub alpha: f64,
    pub n: usize,
    pub points: usize,
    pub samples: usize,
    pub seed: u64,
    pub levels: Vec<usize>,
    pub records: Vec<RatioRecord>,
    pub per_slot: Vec<SlotMax>,
    pub c_hat: f64,
    /// Set when `α ≤ n/2`, outside the regime where the operators are bounded.
    pub warning: Option<String>,
}

impl ConstantEstimate {
    /// CSV with columns `k,j,sample,ratio` and a closing `max,,,Ĉ` row.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["k", "j", "sample", "ratio"]).map_err(io)?;
        for r in &self.records {
            w.write_record([r.k.to_string(), r.j.to_string(), r.sample.to_string(), format!("{:e}", r.ratio)])
                .map_err(io)?;
        }
        w.write_record(["max".to_string(), String::new(), String::new(), format!("{:e}", self.c_hat)])
            .map_err(io)?;
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

/// Random level-`k` kernel with Fourier coefficients of standard deviation
/// `∏ w_{α+n/2+ε}(p)^{−1}`, made Hermitian.
pub fn random_sobolev_kernel(
    grid: &GridSpec,
    particles: usize,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    budget: &Budget,
) -> Result<DenseKernel> {
    let len = budget.check_dense(grid, particles)?;
    let decay = alpha + grid.dim() as f64 / 2.0 + ENSEMBLE_MARGIN;
    let inv: Vec<C64> = grid
        .frequencies()
        .weights(decay)
        .iter()
        .map(|w| C64::new(1.0 / w, 0.0))
        .collect();
    let mut coeffs: Vec<C64> = (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    let tables: Vec<&[C64]> = std::iter::repeat_n(inv.as_slice(), 2 * particles).collect();
    mul_slotwise(&mut coeffs, grid.slot_len(), &tables);
    let mut kernel = DenseKernel::from_fourier(grid, particles, coeffs)?;
    hermitize(kernel.values_mut());
    Ok(kernel)
}

/// In-place `(γ + γ*)/2` on a square row-major block.
fn hermitize(values: &mut [C64]) {
    let b = (values.len() as f64).sqrt().round() as usize;
    for u in 0..b {
        values[u * b + u].im = 0.0;
        for v in u + 1..b {
            let avg = 0.5 * (values[u * b + v] + values[v * b + u].conj());
            values[u * b + v] = avg;
            values[v * b + u] = avg.conj();
        }
    }
}

/// `‖B_{j,k}g‖ / ‖g‖` (or `Q_{j,k}`), zero for a zero kernel.
pub fn slot_ratio(interaction: Interaction, j: usize, g: &DenseKernel, alpha: f64) -> Result<f64> {
    let denom = g.h_alpha_norm(alpha);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let out = match interaction {
        Interaction::Cubic => b_jk(j, g)?,
        Interaction::Quintic => q_jk(j, g)?,
    };
    Ok(out.h_alpha_norm(alpha) / denom)
}

/// Largest observed `‖B_{j,k}g‖/‖g‖` over a seeded random ensemble.
///
/// A maximum over samples, so it bounds the grid operator norm from below.
///
/// `levels` lists the output levels `k`; inputs live at `k + c`. Sample `s`
/// draws from the master seed's ChaCha stream number `s`.
pub fn estimate_constant(
    model: &ModelSpec,
    grid: &GridSpec,
    samples: usize,
    seed: u64,
    levels: &[usize],
    budget: &Budget,
) -> Result<ConstantEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::config(format!(
            "estimate.samples must be at least {MIN_SAMPLES}, got {samples}"
        )));
    }
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::config("estimate.levels must list levels k >= 1"));
    }
    let interaction = model.interaction();
    let alpha = model.alpha();
    let reach = interaction.reach();
    for &k in levels {
        budget.check_dense(grid, k + reach)?;
    }
    let warning = (alpha <= grid.dim() as f64 / 2.0).then(|| {
        format!(
            "alpha = {alpha} is not above n/2 = {}; the contraction is unbounded in this regime",
            grid.dim() as f64 / 2.0
        )
    });
    let per_sample = (0..samples)
        .into_par_iter()
        .map(|sample| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(sample as u64);
            let mut out = Vec::new();
            for &k in levels {
                let g = random_sobolev_kernel(grid, k + reach, alpha, &mut rng, budget)?;
                for j in 1..=k {
                    out.push(RatioRecord {
                        k,
                        j,
                        sample,
                        ratio: slot_ratio(interaction, j, &g, alpha)?,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<RatioRecord> = per_sample.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.k, r.j, r.sample));
    let mut per_slot: Vec<SlotMax> = Vec::new();
    for r in &records {
        match per_slot.last_mut() {
            Some(s) if s.k == r.k && s.j == r.j => s.max_ratio = s.max_ratio.max(r.ratio),
            _ => per_slot.push(SlotMax {
                k: r.k,
                j: r.j,
                max_ratio: r.ratio,
            }),
        }
    }
    let c_hat = per_slot.iter().map(|s| s.max_ratio).fold(0.0, f64::max);
    Ok(ConstantEstimate {
        interaction,
        alpha,
        n: grid.dim(),
        points: grid.points(),
        samples,
        seed,
        levels: levels.to_vec(),
        records,
        per_slot,
        c_hat,
        warning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementRow {
    pub points: usize,
    pub c_hat: f64,
    /// `Ĉ(N) / Ĉ(previous N)`.
    pub ratio: Option<f64>,
}

/// `Ĉ` on a sequence of grid sizes with the same seed.
pub fn refinement_table(
    model: &ModelSpec,
    n: usize,
    points: &[usize],
    samples: usize,
    seed: u64,
    levels: &[usize],
    budget: &Budget,
) -> Result<Vec<RefinementRow>> {
    let mut rows: Vec<RefinementRow> = Vec::new();
    for &p in points {
        let grid = GridSpec::new(n, p)?;
        let c_hat = estimate_constant(model, &grid, samples, seed, levels, budget)?.c_hat;
        let ratio = rows.last().and_then(|r| (r.c_hat > 0.0).then(|| c_hat / r.c_hat));
        rows.push(RefinementRow { points: p, c_hat, ratio });
    }
    Ok(rows)
}

/// `ln binom(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `binom(n, k)` as a float; evaluated in log space once `k > 30`.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if k > 30 {
        return ln_binomial(n, k).exp();
    }
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// `∏_{i<j}(k + c·i) / j!`, the number of collision chains from level `k`
/// down `j` steps of size `c`; `binom(k+j−1, j)` when `c = 1`.
pub fn chain_factor(k: usize, j: usize, reach: usize) -> f64 {
    if reach == 1 {
        return binomial((k + j).saturating_sub(1) as u64, j as u64);
    }
    let ln: f64 = (0..j)
        .map(|i| ((k + reach * i) as f64).ln() - ((i + 1) as f64).ln())
        .sum();
    ln.exp()
}

/// `binom(k+j−1, j)·(Ĉt)^j·a_{k+j}` (cubic chain counting).
pub fn binomial_envelope(k: usize, j: usize, t: f64, c_hat: f64, a: &NormSequence) -> Result<f64> {
    if k == 0 || k + j > a.len() {
        return Err(Error::config(format!(
            "envelope needs level {} but the sequence has {} entries",
            k + j,
            a.len()
        )));
    }
    let ak = a.values()[k + j - 1];
    if ak == 0.0 || (j > 0 && c_hat * t == 0.0) {
        return Ok(if j == 0 { ak } else { 0.0 });
    }
    if j > 30 {
        let ln = ln_binomial((k + j - 1) as u64, j as u64) + j as f64 * (c_hat * t).ln() + ak.ln();
        return Ok(ln.exp());
    }
    Ok(binomial((k + j - 1) as u64, j as u64) * (c_hat * t).powi(j as i32) * ak)
}

/// Central binomial surrogate `4^j/√j`.
pub fn stirling_surrogate(j: u64) -> f64 {
    4f64.powi(j as i32) / (j as f64).sqrt()
}

/// Whether `binom(2j−1, j)` sits in `[0.9·4^j/(2√(πj)), 1.1·4^j/√(πj)]`.
pub fn stirling_bracket_holds(j: u64) -> bool {
    let b = binomial(2 * j - 1, j);
    let s = 4f64.powi(j as i32) / (std::f64::consts::PI * j as f64).sqrt();
    b >= 0.9 * s / 2.0 && b <= 1.1 * s
}

/// `(∫ ‖B_{j,k} e^{it△}g‖² dt)^{1/2}` over `[start, end]` by the trapezoid.
///
/// On the torus the free flow is periodic, so this is a finite-window
/// observable only; it grows without bound as the window does.
pub fn spacetime_window_norm(g: &DenseKernel, j: usize, alpha: f64, start: f64, end: f64, steps: usize) -> Result<f64> {
    if end.partial_cmp(&start) != Some(std::cmp::Ordering::Greater) || steps < 2 {
        return Err(Error::config("window needs end > start and at least 2 steps"));
    }
    let dt = (end - start) / steps as f64;
    let values = (0..=steps)
        .map(|i| {
            let t = start + (end - start) * (i as f64 / steps as f64);
            Ok(b_jk(j, &g.free_propagate(t))?.h_alpha_norm(alpha).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    let inner: f64 = values[1..steps].iter().sum();
    Ok((dt * (inner + 0.5 * (values[0] + values[steps]))).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub depth: usize,
    pub increment: f64,
    pub ratio: Option<f64>,
    pub iterate_norm: f64,
    /// Quasi-norm of the per-level bound on `Γ_m − Γ_{m−1}`.
    pub envelope: f64,
}

/// Per-level bound on `Γ_m − Γ_{m−1} = Ξ^free_{m−1} + Ξ^term_m − Ξ^term_{m−1}`:
/// `2F(k,m−1)(ĈT)^{m−1}a_L + F(k,m)(ĈT)^m a_{L+c}` with `L = k + c(m−1)`.
///
/// `a` holds level norms `1..=K+c` (closure sup norms above `K`); chains
/// reaching past `K + c` vanish.
pub fn increment_envelope(depth: usize, c_hat: f64, horizon: f64, reach: usize, truncation: usize, a: &[f64]) -> Result<NormSequence> {
    let top = truncation + reach;
    if a.len() < top {
        return Err(Error::config(format!("envelope needs {top} level norms, got {}", a.len())));
    }
    let ct = c_hat * horizon;
    let level_norm = |l: usize| if l <= top { a[l - 1] } else { 0.0 };
    let values = (1..=truncation)
        .map(|k| {
            if depth == 0 {
                return 0.0;
            }
            let m = depth;
            let base = k + reach * (m - 1);
            let first = 2.0 * chain_factor(k, m - 1, reach) * ct.powi(m as i32 - 1) * level_norm(base);
            let second = chain_factor(k, m, reach) * ct.powi(m as i32) * level_norm(base + reach);
            first + second
        })
        .collect();
    NormSequence::new(values)
}

/// Increments, ratios and envelopes for depths `1..=max_depth`.
pub fn convergence_report(solver: &PicardSolver, c_hat: f64, max_depth: usize) -> Result<Vec<ConvergenceRow>> {
    let rows: Vec<IncrementRow> = solver.increments(max_depth)?;
    let norms = solver.level_norms_with_closure()?;
    rows.into_iter()
        .map(|r| {
            let env = increment_envelope(
                r.depth,
                c_hat,
                solver.time().horizon(),
                solver.reach(),
                solver.truncation(),
                &norms,
            )?;
            Ok(ConvergenceRow {
                depth: r.depth,
                increment: r.increment,
                ratio: r.ratio,
                iterate_norm: r.iterate_norm,
                envelope: quasi_norm(&env, DEFAULT_REL_TOL)?.value,
            })
        })
        .collect()
}

/// `T = 1/(4ĈÂ²q̂²)`, the window of the collision-kernel bound.
pub fn xi_horizon(c_hat: f64, a_hat: f64, q_hat: f64) -> Option<f64> {
    let s = c_hat * a_hat * a_hat * q_hat * q_hat;
    (s > 0.0 && s.is_finite()).then(|| 1.0 / (4.0 * s))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiObservable {
    pub a_hat: f64,
    pub horizon: f64,
    /// Time-integrated quasi-norm of `ρ`.
    pub measured: f64,
    /// `4Âq̂`.
    pub bound: f64,
    pub within: bool,
}

/// Compare `‖ρ‖_{L¹_t}` against `4Âq̂` on the solver's grid.
pub fn xi_observable(solver: &PicardSolver, depth: usize, a_hat: f64, q_hat: f64) -> Result<XiObservable> {
    if a_hat <= 2.0 {
        return Err(Error::config(format!("estimate.a_hat must exceed 2, got {a_hat}")));
    }
    let measured = solver.xi(depth)?.l1t_quasi_norm(DEFAULT_REL_TOL)?.value;
    let bound = 4.0 * a_hat * q_hat;
    Ok(XiObservable {
        a_hat,
        horizon: solver.time().horizon(),
        measured,
        bound,
        within: measured <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::kernel::WaveFunction;

    fn cubic() -> ModelSpec {
        ModelSpec::cubic(1, 1.0).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(19, 10), 92378.0);
        assert!((ln_binomial(19, 10).exp() - 92378.0).abs() <= 1e-12 * 92378.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
        // log-space branch against an exactly representable value
        let exact = 1_832_624_140_942_590_534u64 as f64; // binom(64, 32)
        assert!((binomial(64, 32) - exact).abs() <= 1e-12 * exact);
        for j in 2..=20 {
            assert!(stirling_bracket_holds(j), "j = {j}");
        }
        assert_eq!(chain_factor(2, 3, 1), binomial(4, 3));
        // quintic: (1·3·5)/3!
        assert!((chain_factor(1, 3, 2) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn envelope_examples() {
        let a = NormSequence::new(vec![0.5, 0.25, 0.125, 0.0625]).unwrap();
        assert_eq!(binomial_envelope(2, 0, 1.0, 3.0, &a).unwrap(), 0.25);
        assert!((binomial_envelope(1, 1, 0.5, 3.0, &a).unwrap() - 1.5 * 0.25).abs() < 1e-15);
        let v1 = binomial_envelope(1, 3, 0.1, 2.0, &a).unwrap();
        let v2 = binomial_envelope(1, 3, 0.2, 2.0, &a).unwrap();
        let v3 = binomial_envelope(1, 3, 0.2, 3.0, &a).unwrap();
        assert!(v1 <= v2 && v2 <= v3);
        assert!(binomial_envelope(2, 3, 0.1, 2.0, &a).is_err());
        let long = NormSequence::new(vec![1.0; 40]).unwrap();
        let v = binomial_envelope(1, 35, 0.1, 1.0, &long).unwrap();
        assert!((v - 0.1f64.powi(35)).abs() <= 1e-12 * v);
    }

    #[test]
    fn estimate_is_deterministic_and_scale_free() {
        let g = make_grid(1, 8).unwrap();
        let a = estimate_constant(&cubic(), &g, 10, 7, &[1, 2], &Budget::default()).unwrap();
        let b = estimate_constant(&cubic(), &g, 10, 7, &[1, 2], &Budget::default()).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.records.len(), 30);
        assert!(a.c_hat > 0.0 && a.warning.is_none());
        let c = estimate_constant(&cubic(), &g, 10, 8, &[1, 2], &Budget::default()).unwrap();
        assert_ne!(a.c_hat, c.c_hat);
        assert!(estimate_constant(&cubic(), &g, 5, 7, &[1], &Budget::default()).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_sobolev_kernel(&g, 2, 1.0, &mut rng, &Budget::default()).unwrap();
        assert!(k.is_hermitian(1e-14));
        let r = slot_ratio(Interaction::Cubic, 1, &k, 1.0).unwrap();
        let rs = slot_ratio(Interaction::Cubic, 1, &k.scaled(C64::new(-3.0, 7.0)), 1.0).unwrap();
        assert!((r - rs).abs() <= 1e-12 * r);
        let z = DenseKernel::zeros(&g, 2, &Budget::default()).unwrap();
        assert_eq!(slot_ratio(Interaction::Cubic, 1, &z, 1.0).unwrap(), 0.0);
        let one = WaveFunction::from_fn(&g, |_| C64::new(1.0, 0.0));
        let t = DenseKernel::tensor_from_wavefunction(&one, 2, &Budget::default()).unwrap();
        assert_eq!(slot_ratio(Interaction::Cubic, 1, &t, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn low_regularity_is_flagged() {
        let g = make_grid(1, 8).unwrap();
        let model = ModelSpec::cubic(1, 0.4).unwrap();
        let e = estimate_constant(&model, &g, 10, 1, &[1], &Budget::default()).unwrap();
        assert!(e.warning.is_some());
    }

    #[test]
    fn window_norm_properties() {
        let g = make_grid(1, 8).unwrap();
        let phi = WaveFunction::from_modes(&g, &[(vec![0], C64::new(0.5, 0.0)), (vec![2], C64::new(0.2, 0.1))]).unwrap();
        let t = DenseKernel::tensor_from_wavefunction(&phi, 2, &Budget::default()).unwrap();
        let tau = std::f64::consts::TAU;
        let a = spacetime_window_norm(&t, 1, 1.0, 0.0, tau, 64).unwrap();
        let b = spacetime_window_norm(&t, 1, 1.0, tau, 2.0 * tau, 64).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
        let short = spacetime_window_norm(&t, 1, 1.0, 0.0, 0.5, 64).unwrap();
        let long = spacetime_window_norm(&t, 1, 1.0, 0.0, 1.0, 128).unwrap();
        assert!(long >= short);
        let one = WaveFunction::from_fn(&g, |_| C64::new(0.7, 0.0));
        let c = DenseKernel::tensor_from_wavefunction(&one, 2, &Budget::default()).unwrap();
        assert_eq!(spacetime_window_norm(&c, 1, 1.0, 0.0, 3.0, 8).unwrap(), 0.0);
    }

    #[test]
    fn increment_envelope_shape() {
        // K = 2, c = 1: depth 3 starts at level 3 for k = 1 and level 4 for k = 2
        let a = [0.5, 0.25, 0.125];
        let e = increment_envelope(3, 2.0, 0.1, 1, 2, &a).unwrap();
        let ct: f64 = 0.2;
        let expect1 = 2.0 * binomial(2, 2) * ct * ct * 0.125;
        assert!((e.values()[0] - expect1).abs() < 1e-15);
        assert_eq!(e.values()[1], 0.0);
    }
}
