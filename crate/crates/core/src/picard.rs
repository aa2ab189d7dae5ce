//! Picard iteration, Duhamel expansion and the collision-kernel iteration for
//! the truncated hierarchy, plus a direct time stepper and a mild-form
//! residual check.
//!
//! Every time integral is the composite trapezoid on one shared [`TimeGrid`],
//! so the Duhamel expansion reproduces the Picard iterates exactly.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionSpec;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hierarchy::{l1t_quasi_norm, quasi_norm, Hierarchy, NormSequence, QuasiNormResult, DEFAULT_REL_TOL};
use crate::kernel::{apply_free_phase, fourier_norm_sq, Budget, DenseKernel, Interaction, ModelSpec};
use crate::lowrank::{Kernel, SeparableKernel};
use crate::nls::WaveTrajectory;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_DEPTH: usize = 32;

/// Nodes `t_i = T·i/M`, `i = 0..=M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::config(format!("time.horizon must be finite and nonnegative, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::config("time.steps must be at least 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_i`; the last node is exactly `T`.
    pub fn node(&self, i: usize) -> f64 {
        self.horizon * (i as f64 / self.steps as f64)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureKind {
    Zero,
    Oracle,
}

impl ClosureKind {
    pub fn code(self) -> u32 {
        match self {
            ClosureKind::Zero => 0,
            ClosureKind::Oracle => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(ClosureKind::Zero),
            1 => Some(ClosureKind::Oracle),
            _ => None,
        }
    }
}

/// What stands in for the levels beyond the truncation.
#[derive(Clone, Debug)]
pub enum Closure {
    Zero,
    /// Tensor powers of this wave trajectory supply levels `K+1..K+c`.
    Oracle(WaveTrajectory),
}

impl Closure {
    pub fn kind(&self) -> ClosureKind {
        match self {
            Closure::Zero => ClosureKind::Zero,
            Closure::Oracle(_) => ClosureKind::Oracle,
        }
    }
}

/// Hierarchy values at every node of a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    model: ModelSpec,
    time: TimeGrid,
    closure: ClosureKind,
    nodes: Vec<Vec<Kernel>>,
}

impl TrajectorySet {
    pub fn new(model: ModelSpec, time: TimeGrid, closure: ClosureKind, nodes: Vec<Vec<Kernel>>) -> Result<Self> {
        if nodes.len() != time.len() {
            return Err(Error::shape(format!(
                "trajectory has {} nodes, time grid has {}",
                nodes.len(),
                time.len()
            )));
        }
        let levels = nodes[0].len();
        if levels == 0 {
            return Err(Error::config("truncation.K must be at least 1"));
        }
        let grid = nodes[0][0].grid().clone();
        for (i, node) in nodes.iter().enumerate() {
            if node.len() != levels {
                return Err(Error::shape(format!("node {i} has {} levels, expected {levels}", node.len())));
            }
            for (l, kernel) in node.iter().enumerate() {
                if kernel.particles() != l + 1 || kernel.grid() != &grid {
                    return Err(Error::shape(format!("node {i}, level {}: wrong particle number or grid", l + 1)));
                }
            }
        }
        Ok(TrajectorySet {
            model,
            time,
            closure,
            nodes,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn closure(&self) -> ClosureKind {
        self.closure
    }

    pub fn grid(&self) -> &GridSpec {
        self.nodes[0][0].grid()
    }

    pub fn truncation(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn nodes(&self) -> &[Vec<Kernel>] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[Kernel] {
        &self.nodes[i]
    }

    /// Level `k` (1-based) at node `i`.
    pub fn level(&self, i: usize, k: usize) -> &Kernel {
        &self.nodes[i][k - 1]
    }

    pub fn into_nodes(self) -> Vec<Vec<Kernel>> {
        self.nodes
    }

    pub fn hierarchy_at(&self, i: usize) -> Result<Hierarchy> {
        Hierarchy::new(self.model, self.nodes[i].clone())
    }

    pub fn norm_sequences(&self) -> Result<Vec<NormSequence>> {
        let alpha = self.model.alpha();
        self.nodes
            .iter()
            .map(|node| {
                let values = node.iter().map(|k| k.h_alpha_norm(alpha)).collect::<Result<Vec<f64>>>()?;
                NormSequence::new(values)
            })
            .collect()
    }

    pub fn quasi_norms(&self, rel_tol: f64) -> Result<Vec<QuasiNormResult>> {
        self.norm_sequences()?.iter().map(|a| quasi_norm(a, rel_tol)).collect()
    }

    /// `sup_t ‖Γ(t)‖` over the nodes.
    pub fn sup_quasi_norm(&self, rel_tol: f64) -> Result<f64> {
        Ok(self.quasi_norms(rel_tol)?.iter().map(|r| r.value).fold(0.0, f64::max))
    }

    /// Quasi-norm of the trapezoid time integrals of the level norms.
    pub fn l1t_quasi_norm(&self, rel_tol: f64) -> Result<QuasiNormResult> {
        l1t_quasi_norm(&self.norm_sequences()?, self.time.step(), rel_tol)
    }

    /// Per level: `max_i ‖γ_i − ref_i‖ / max(‖ref_i‖, tiny)`.
    pub fn max_relative_error(&self, reference: &TrajectorySet, budget: &Budget) -> Result<Vec<f64>> {
        if reference.time.steps() != self.time.steps() || reference.truncation() < self.truncation() {
            return Err(Error::shape("trajectories are sampled differently"));
        }
        let alpha = self.model.alpha();
        let mut worst = vec![0.0f64; self.truncation()];
        for (mine, theirs) in self.nodes.iter().zip(&reference.nodes) {
            for (l, w) in worst.iter_mut().enumerate() {
                let a = mine[l].to_dense(budget)?;
                let b = theirs[l].to_dense(budget)?;
                let diff = a.sub(&b)?.h_alpha_norm(alpha);
                *w = w.max(diff / b.h_alpha_norm(alpha).max(f64::MIN_POSITIVE));
            }
        }
        Ok(worst)
    }
}

/// Which base the Duhamel chain starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `e^{it△}γ₀`: the terms summed for depths below the iterate depth.
    Free,
    /// Unpropagated `γ₀`: the last term, carrying the constant start of the iteration.
    Terminal,
}

/// Per level, per node Fourier coefficients.
type Series = Vec<Vec<C64>>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementRow {
    pub depth: usize,
    /// `sup_t ‖Γ_m(t) − Γ_{m−1}(t)‖` over the nodes.
    pub increment: f64,
    /// `increment / previous increment`, absent when the previous one is zero.
    pub ratio: Option<f64>,
    /// `sup_t ‖Γ_m(t)‖`.
    pub iterate_norm: f64,
}

#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub trajectory: TrajectorySet,
    pub depth: usize,
    pub rows: Vec<IncrementRow>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelResidual {
    pub level: usize,
    pub max_residual: f64,
    pub relative: f64,
    pub worst_node: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub levels: Vec<LevelResidual>,
    pub max_residual: f64,
    /// `δ²`, the scale of the trapezoid error.
    pub quadrature_scale: f64,
}

/// The truncated hierarchy on a time grid, ready to be solved several ways.
pub struct PicardSolver {
    model: ModelSpec,
    collision: CollisionSpec,
    grid: GridSpec,
    time: TimeGrid,
    closure: ClosureKind,
    truncation: usize,
    budget: Budget,
    initial: Vec<Vec<C64>>,
    /// `B̃` of the closure levels for `k > K − c`, per node.
    closure_sources: Vec<Option<Series>>,
    /// `sup_t ‖γ^{(L)}_t‖` of the closure levels `L = K+1..K+c`.
    closure_norms: Vec<f64>,
}

impl PicardSolver {
    pub fn new(gamma0: &Hierarchy, time: TimeGrid, closure: &Closure, budget: &Budget) -> Result<Self> {
        let model = *gamma0.model();
        let grid = gamma0.grid().clone();
        let truncation = gamma0.truncation();
        let collision = CollisionSpec::from_model(&model);
        let reach = collision.reach();
        let initial = gamma0
            .levels()
            .iter()
            .map(|k| Ok(k.to_dense(budget)?.fourier()))
            .collect::<Result<Vec<_>>>()?;

        let oracle = match closure {
            Closure::Zero => None,
            Closure::Oracle(traj) => Some(oracle_states(gamma0, traj, &time)?),
        };
        let closure_sources = (1..=truncation)
            .map(|k| {
                if k + reach <= truncation {
                    return Ok(None);
                }
                let len = grid.slot_len().pow(2 * k as u32);
                let series = match &oracle {
                    None => vec![vec![C64::default(); len]; time.len()],
                    Some(states) => states
                        .par_iter()
                        .map(|phi| {
                            let top = SeparableKernel::factorized_with_cap(phi.as_ref(), k + reach, budget.rank_cap);
                            Ok(collision.apply_separable(&top)?.to_dense(budget)?.fourier())
                        })
                        .collect::<Result<Vec<_>>>()?,
                };
                Ok(Some(series))
            })
            .collect::<Result<Vec<_>>>()?;

        let alpha = model.alpha();
        let closure_norms = (truncation + 1..=truncation + reach)
            .map(|l| match &oracle {
                None => 0.0,
                Some(states) => states
                    .iter()
                    .map(|phi| phi.h_alpha_norm(alpha).powi(2 * l as i32))
                    .fold(0.0, f64::max),
            })
            .collect();

        Ok(PicardSolver {
            closure_norms,
            model,
            collision,
            grid,
            time,
            closure: closure.kind(),
            truncation,
            budget: *budget,
            initial,
            closure_sources,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn reach(&self) -> usize {
        self.collision.reach()
    }

    /// `‖γ₀^{(k)}‖` for `k ≤ K`, then the closure sup norms up to `K + c`.
    pub fn level_norms_with_closure(&self) -> Result<Vec<f64>> {
        let alpha = self.model.alpha();
        let mut out: Vec<f64> = self
            .initial
            .iter()
            .enumerate()
            .map(|(l, c)| fourier_norm_sq(c, &self.grid, l + 1, alpha).sqrt())
            .collect();
        out.extend_from_slice(&self.closure_norms);
        Ok(out)
    }

    fn level_len(&self, k: usize) -> usize {
        self.grid.slot_len().pow(2 * k as u32)
    }

    fn free_at(&self, k: usize, t: f64) -> Vec<C64> {
        let mut c = self.initial[k - 1].clone();
        apply_free_phase(&mut c, &self.grid, k, t);
        c
    }

    /// `B̃` on Fourier coefficients of a level-`(k+c)` kernel.
    fn collide(&self, coeffs: &[C64], level: usize) -> Result<Vec<C64>> {
        let g = DenseKernel::from_fourier(&self.grid, level, coeffs.to_vec())?;
        Ok(self.collision.apply(&g)?.fourier())
    }

    fn collide_series(&self, upper: &Series, level: usize) -> Result<Series> {
        upper.iter().map(|c| self.collide(c, level)).collect()
    }

    /// Trapezoid Duhamel integral `∫_0^{t_i} e^{i(t_i−s)△}F(s) ds` at every node.
    fn duhamel(&self, k: usize, source: &Series) -> Series {
        let dt = self.time.step();
        let half = C64::new(0.5 * dt, 0.0);
        let mut out = Vec::with_capacity(source.len());
        let mut acc = vec![C64::default(); self.level_len(k)];
        out.push(acc.clone());
        for i in 1..source.len() {
            acc.iter_mut().zip(&source[i - 1]).for_each(|(a, f)| *a += half * f);
            apply_free_phase(&mut acc, &self.grid, k, dt);
            acc.iter_mut().zip(&source[i]).for_each(|(a, f)| *a += half * f);
            out.push(acc.clone());
        }
        out
    }

    fn constant_initial(&self) -> Vec<Series> {
        self.initial
            .iter()
            .map(|c| vec![c.clone(); self.time.len()])
            .collect()
    }

    /// One application of `Γ ↦ e^{it△}Γ₀ + ∫ e^{i(t−s)△} B̃Γ(s) ds`.
    fn map(&self, prev: &[Series]) -> Result<Vec<Series>> {
        let reach = self.reach();
        (1..=self.truncation)
            .into_par_iter()
            .map(|k| {
                let owned;
                let source = match &self.closure_sources[k - 1] {
                    Some(s) => s,
                    None => {
                        owned = self.collide_series(&prev[k + reach - 1], k + reach)?;
                        &owned
                    }
                };
                let mut out = self.duhamel(k, source);
                for (i, o) in out.iter_mut().enumerate() {
                    let free = self.free_at(k, self.time.node(i));
                    o.iter_mut().zip(&free).for_each(|(a, b)| *a += b);
                }
                Ok(out)
            })
            .collect()
    }

    fn to_trajectory(&self, levels: &[Series]) -> Result<TrajectorySet> {
        let nodes = (0..self.time.len())
            .map(|i| {
                levels
                    .iter()
                    .enumerate()
                    .map(|(l, s)| Ok(Kernel::from(DenseKernel::from_fourier(&self.grid, l + 1, s[i].clone())?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        TrajectorySet::new(self.model, self.time, self.closure, nodes)
    }

    fn series_of(&self, traj: &TrajectorySet) -> Result<Vec<Series>> {
        if traj.truncation() != self.truncation || traj.time().steps() != self.time.steps() || traj.grid() != &self.grid {
            return Err(Error::shape("trajectory does not match the solver's truncation, grid or time grid"));
        }
        (0..self.truncation)
            .map(|l| {
                traj.nodes()
                    .iter()
                    .map(|node| Ok(node[l].to_dense(&self.budget)?.fourier()))
                    .collect()
            })
            .collect()
    }

    /// Per-node quasi-norm of level-wise norms, maximised over nodes.
    fn sup_norm(&self, levels: &[Series], subtract: Option<&[Series]>) -> Result<f64> {
        let alpha = self.model.alpha();
        let mut worst = 0.0f64;
        for i in 0..self.time.len() {
            let values = levels
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    let sq = match subtract {
                        None => fourier_norm_sq(&s[i], &self.grid, l + 1, alpha),
                        Some(other) => {
                            let d: Vec<C64> = s[i].iter().zip(&other[l][i]).map(|(a, b)| a - b).collect();
                            fourier_norm_sq(&d, &self.grid, l + 1, alpha)
                        }
                    };
                    sq.sqrt()
                })
                .collect();
            let q = quasi_norm(&NormSequence::new(values)?, DEFAULT_REL_TOL)?;
            worst = worst.max(q.value);
        }
        Ok(worst)
    }

    /// `Γ_m` with `Γ_0 ≡ Γ₀` at every node.
    pub fn iterate(&self, depth: usize) -> Result<TrajectorySet> {
        let mut levels = self.constant_initial();
        for _ in 0..depth {
            levels = self.map(&levels)?;
        }
        self.to_trajectory(&levels)
    }

    /// Iterates up to `max_depth`, recording increments, and stops early once
    /// an increment falls below `tolerance`.
    pub fn solve(&self, tolerance: f64, max_depth: usize) -> Result<PicardSolution> {
        let mut levels = self.constant_initial();
        let mut rows: Vec<IncrementRow> = Vec::new();
        let mut converged = false;
        for depth in 1..=max_depth {
            let next = self.map(&levels)?;
            let increment = self.sup_norm(&next, Some(&levels))?;
            let ratio = rows
                .last()
                .and_then(|r| (r.increment > 0.0).then(|| increment / r.increment));
            rows.push(IncrementRow {
                depth,
                increment,
                ratio,
                iterate_norm: self.sup_norm(&next, None)?,
            });
            levels = next;
            if increment < tolerance {
                converged = true;
                break;
            }
        }
        Ok(PicardSolution {
            trajectory: self.to_trajectory(&levels)?,
            depth: rows.len(),
            rows,
            converged,
        })
    }

    /// Increment table for depths `1..=max_depth` without early stopping.
    pub fn increments(&self, max_depth: usize) -> Result<Vec<IncrementRow>> {
        Ok(self.solve(0.0, max_depth)?.rows)
    }

    fn check_depth(&self, level: usize, depth: usize) -> Result<usize> {
        if level == 0 || level > self.truncation {
            return Err(Error::config(format!("level {level} outside 1..={}", self.truncation)));
        }
        let needed = level + depth * self.reach();
        let available = self.truncation + self.reach();
        if needed > available {
            return Err(Error::Depth {
                level,
                depth,
                needed,
                available,
            });
        }
        Ok(needed)
    }

    fn duhamel_series(&self, level: usize, depth: usize, family: Family) -> Result<Series> {
        if depth == 0 {
            return Ok(match family {
                Family::Free => (0..self.time.len()).map(|i| self.free_at(level, self.time.node(i))).collect(),
                Family::Terminal => vec![self.initial[level - 1].clone(); self.time.len()],
            });
        }
        let reach = self.reach();
        let source = match &self.closure_sources[level - 1] {
            Some(s) => s.clone(),
            None => {
                let upper = self.duhamel_series(level + reach, depth - 1, family)?;
                self.collide_series(&upper, level + reach)?
            }
        };
        Ok(self.duhamel(level, &source))
    }

    /// `Ξ^{(k)}_{j}` at every node: `j` nested Duhamel integrals over the base
    /// at level `k + j·c` (the closure once that level exceeds `K`).
    pub fn duhamel_term(&self, level: usize, depth: usize, family: Family) -> Result<Vec<DenseKernel>> {
        self.check_depth(level, depth)?;
        self.duhamel_series(level, depth, family)?
            .into_iter()
            .map(|c| DenseKernel::from_fourier(&self.grid, level, c))
            .collect()
    }

    /// `Σ_{j<m} Ξ^free_j + Ξ^terminal_m`, which equals level `k` of `Γ_m`.
    pub fn duhamel_expansion(&self, level: usize, depth: usize) -> Result<Vec<DenseKernel>> {
        self.check_depth(level, depth)?;
        let mut total = self.duhamel_series(level, depth, Family::Terminal)?;
        for j in 0..depth {
            for (t, s) in total.iter_mut().zip(self.duhamel_series(level, j, Family::Free)?) {
                t.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
            }
        }
        total
            .into_iter()
            .map(|c| DenseKernel::from_fourier(&self.grid, level, c))
            .collect()
    }

    /// `ρ_m` with `ρ_0 = 0` and
    /// `ρ^{(k)}_m = B̃(e^{it△}γ₀^{(k+c)} + ∫ e^{i(t−s)△} ρ^{(k+c)}_{m−1}(s) ds)`.
    pub fn xi(&self, depth: usize) -> Result<TrajectorySet> {
        let reach = self.reach();
        let zero: Vec<Series> = (1..=self.truncation)
            .map(|k| vec![vec![C64::default(); self.level_len(k)]; self.time.len()])
            .collect();
        let mut rho = zero;
        for _ in 0..depth {
            rho = (1..=self.truncation)
                .into_par_iter()
                .map(|k| {
                    if let Some(s) = &self.closure_sources[k - 1] {
                        return Ok(s.clone());
                    }
                    let upper = k + reach;
                    let mut inner = self.duhamel(upper, &rho[upper - 1]);
                    for (i, v) in inner.iter_mut().enumerate() {
                        let free = self.free_at(upper, self.time.node(i));
                        v.iter_mut().zip(&free).for_each(|(a, b)| *a += b);
                    }
                    self.collide_series(&inner, upper)
                })
                .collect::<Result<Vec<_>>>()?;
        }
        self.to_trajectory(&rho)
    }

    /// `B̃Γ` level by level, with the closure supplying levels beyond `K`.
    pub fn hat_b(&self, traj: &TrajectorySet) -> Result<TrajectorySet> {
        let levels = self.series_of(traj)?;
        let reach = self.reach();
        let out = (1..=self.truncation)
            .map(|k| match &self.closure_sources[k - 1] {
                Some(s) => Ok(s.clone()),
                None => self.collide_series(&levels[k + reach - 1], k + reach),
            })
            .collect::<Result<Vec<_>>>()?;
        self.to_trajectory(&out)
    }

    fn sources_at(&self, state: &[Vec<C64>], node: usize) -> Result<Vec<Vec<C64>>> {
        let reach = self.reach();
        (1..=self.truncation)
            .map(|k| match &self.closure_sources[k - 1] {
                Some(s) => Ok(s[node].clone()),
                None => self.collide(&state[k + reach - 1], k + reach),
            })
            .collect()
    }

    fn direct_step_fourier(&self, state: &[Vec<C64>], node: usize) -> Result<Vec<Vec<C64>>> {
        let dt = self.time.step();
        let now = self.sources_at(state, node)?;
        let mut propagated = Vec::with_capacity(state.len());
        let mut predictor = Vec::with_capacity(state.len());
        for (l, (g, f)) in state.iter().zip(&now).enumerate() {
            let mut p = g.clone();
            apply_free_phase(&mut p, &self.grid, l + 1, dt);
            let mut q: Vec<C64> = g.iter().zip(f).map(|(a, b)| a + dt * b).collect();
            apply_free_phase(&mut q, &self.grid, l + 1, dt);
            propagated.push(p);
            predictor.push(q);
        }
        let next = self.sources_at(&predictor, node + 1)?;
        let half = 0.5 * dt;
        Ok(propagated
            .into_iter()
            .zip(now)
            .zip(next)
            .enumerate()
            .map(|(l, ((mut p, f0), f1))| {
                let mut moved = f0;
                apply_free_phase(&mut moved, &self.grid, l + 1, dt);
                p.iter_mut()
                    .zip(moved.iter().zip(&f1))
                    .for_each(|(a, (x, y))| *a += half * (x + y));
                p
            })
            .collect())
    }

    /// One exponential Heun step from node `node` to `node + 1`.
    pub fn direct_step(&self, state: &[DenseKernel], node: usize) -> Result<Vec<DenseKernel>> {
        if state.len() != self.truncation || node >= self.time.steps() {
            return Err(Error::shape("direct step needs K levels and a node before the last"));
        }
        let coeffs: Vec<Vec<C64>> = state.iter().map(|k| k.fourier()).collect();
        self.direct_step_fourier(&coeffs, node)?
            .into_iter()
            .enumerate()
            .map(|(l, c)| DenseKernel::from_fourier(&self.grid, l + 1, c))
            .collect()
    }

    /// March the exponential Heun step across the whole grid.
    pub fn direct_solve(&self) -> Result<TrajectorySet> {
        let mut state = self.initial.clone();
        let mut levels: Vec<Series> = state.iter().map(|c| vec![c.clone()]).collect();
        for node in 0..self.time.steps() {
            state = self.direct_step_fourier(&state, node)?;
            for (l, c) in state.iter().enumerate() {
                levels[l].push(c.clone());
            }
        }
        self.to_trajectory(&levels)
    }

    /// `Γ − Φ(Γ)` in `H^α` per level, maximised over nodes.
    pub fn verify(&self, traj: &TrajectorySet) -> Result<VerificationReport> {
        let levels = self.series_of(traj)?;
        let mapped = self.map(&levels)?;
        let alpha = self.model.alpha();
        let mut report = Vec::with_capacity(self.truncation);
        for (l, (have, want)) in levels.iter().zip(&mapped).enumerate() {
            let mut worst = (0.0f64, 0usize, 0.0f64);
            for (i, (a, b)) in have.iter().zip(want).enumerate() {
                let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let r = fourier_norm_sq(&d, &self.grid, l + 1, alpha).sqrt();
                if r > worst.0 || i == 0 {
                    worst = (r, i, fourier_norm_sq(b, &self.grid, l + 1, alpha).sqrt());
                }
            }
            report.push(LevelResidual {
                level: l + 1,
                max_residual: worst.0,
                relative: worst.0 / worst.2.max(f64::MIN_POSITIVE),
                worst_node: worst.1,
            });
        }
        let max_residual = report.iter().map(|r| r.max_residual).fold(0.0, f64::max);
        Ok(VerificationReport {
            levels: report,
            max_residual,
            quadrature_scale: self.time.step().powi(2),
        })
    }
}

/// Wave states of an oracle closure on `time`, after consistency checks.
fn oracle_states(
    gamma0: &Hierarchy,
    traj: &WaveTrajectory,
    time: &TimeGrid,
) -> Result<Vec<std::sync::Arc<crate::kernel::WaveFunction>>> {
    if traj.grid() != gamma0.grid() {
        return Err(Error::Closure("oracle trajectory lives on a different spatial grid".into()));
    }
    if traj.model() != gamma0.model() {
        return Err(Error::Closure("oracle trajectory solves a different model".into()));
    }
    let factor = gamma0
        .factor()
        .ok_or_else(|| Error::Closure("oracle closure needs factorized initial data".into()))?;
    let resampled = if traj.time() == time { traj.clone() } else { traj.resample(time)? };
    let diff = factor
        .values()
        .iter()
        .zip(resampled.initial().values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if diff > 1e-12 * factor.max_abs().max(1.0) {
        return Err(Error::Closure(format!(
            "oracle trajectory starts from a different state (max deviation {diff:e})"
        )));
    }
    Ok(resampled.states().iter().cloned().map(std::sync::Arc::new).collect())
}

/// Build an oracle closure by solving the one-body equation with `reference_steps`.
pub fn oracle_closure(gamma0: &Hierarchy, time: &TimeGrid, reference_steps: usize) -> Result<Closure> {
    let phi = gamma0
        .factor()
        .ok_or_else(|| Error::Closure("oracle closure needs factorized initial data".into()))?;
    if !reference_steps.is_multiple_of(time.steps()) {
        return Err(Error::Closure(format!(
            "closure.oracle_steps = {reference_steps} is not a multiple of time.steps = {}",
            time.steps()
        )));
    }
    let traj = crate::nls::split_step(phi, gamma0.model(), time.horizon(), reference_steps)?;
    Ok(Closure::Oracle(traj))
}

/// `γ_m` on `time`; see [`PicardSolver::iterate`].
pub fn picard_iterate(
    gamma0: &Hierarchy,
    time: TimeGrid,
    closure: &Closure,
    depth: usize,
    budget: &Budget,
) -> Result<TrajectorySet> {
    PicardSolver::new(gamma0, time, closure, budget)?.iterate(depth)
}

/// Local existence time: `1/(4Ĉq̂)` (cubic) or `1/(4Ĉq̂²)` (quintic).
///
/// `None` when `Ĉ·q̂ = 0`, where the bound places no restriction.
pub fn theorem_horizon(interaction: Interaction, c_hat: f64, q_hat: f64) -> Option<f64> {
    let scale = match interaction {
        Interaction::Cubic => c_hat * q_hat,
        Interaction::Quintic => c_hat * q_hat * q_hat,
    };
    (scale > 0.0 && scale.is_finite()).then(|| 1.0 / (4.0 * scale))
}
