//! Split-step Fourier solver for `i∂_tφ = −Δφ + μ|φ|^{2σ}φ` on the torus.
//!
//! Tensor powers of its solution solve the hierarchy exactly, which makes it
//! the reference every hierarchy solver is measured against.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hierarchy::Hierarchy;
use crate::kernel::{phase_table, Budget, DenseKernel, Interaction, ModelSpec, WaveFunction};
use crate::lowrank::{Kernel, Representation, SeparableKernel};
use crate::picard::{ClosureKind, TimeGrid, TrajectorySet};

/// Amplitude above which the solver gives up.
pub const BLOWUP_AMPLITUDE: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct WaveTrajectory {
    model: ModelSpec,
    time: TimeGrid,
    states: Vec<WaveFunction>,
}

/// Strang splitting: half nonlinear phase, exact free flow, half nonlinear phase.
pub fn split_step(phi0: &WaveFunction, model: &ModelSpec, horizon: f64, steps: usize) -> Result<WaveTrajectory> {
    split_step_with(phi0, model, horizon, steps, false)
}

/// As [`split_step`], optionally zeroing modes beyond the 2/3 cutoff after each free step.
pub fn split_step_with(
    phi0: &WaveFunction,
    model: &ModelSpec,
    horizon: f64,
    steps: usize,
    dealias: bool,
) -> Result<WaveTrajectory> {
    let time = TimeGrid::new(horizon, steps)?;
    if phi0.values().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("initial wave function has non-finite values".into()));
    }
    let grid = phi0.grid();
    let dt = time.step();
    let power = match model.interaction() {
        Interaction::Cubic => 1,
        Interaction::Quintic => 2,
    };
    let half_phase = -(model.mu() as f64) * 0.5 * dt;
    let linear = phase_table(grid, -dt);
    let mask = dealias.then(|| dealias_mask(grid));

    let nonlinear = |psi: &mut [C64]| {
        for v in psi.iter_mut() {
            let density = v.norm_sqr().powi(power);
            *v *= C64::from_polar(1.0, half_phase * density);
        }
    };

    let mut states = Vec::with_capacity(steps + 1);
    states.push(phi0.clone());
    let mut psi = phi0.values().to_vec();
    for step in 1..=steps {
        nonlinear(&mut psi);
        grid.forward(&mut psi, 1);
        psi.iter_mut().zip(&linear).for_each(|(v, p)| *v *= p);
        if let Some(mask) = &mask {
            psi.iter_mut().zip(mask).filter(|(_, keep)| !**keep).for_each(|(v, _)| *v = C64::default());
        }
        grid.inverse(&mut psi, 1);
        nonlinear(&mut psi);
        let amplitude = psi.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !amplitude.is_finite() || amplitude > BLOWUP_AMPLITUDE {
            return Err(Error::BlowUp {
                step,
                time: time.node(step),
                amplitude,
            });
        }
        states.push(WaveFunction::new(grid, psi.clone())?);
    }
    Ok(WaveTrajectory {
        model: *model,
        time,
        states,
    })
}

/// Modes kept by the 2/3 rule: every component satisfies `|p_i| ≤ N/3`.
fn dealias_mask(grid: &GridSpec) -> Vec<bool> {
    let cutoff = grid.points() as i64 / 3;
    let freqs = grid.frequencies();
    (0..grid.slot_len())
        .map(|i| freqs.mode(i).iter().all(|p| p.abs() <= cutoff))
        .collect()
}

impl WaveTrajectory {
    pub fn grid(&self) -> &GridSpec {
        self.states[0].grid()
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn states(&self) -> &[WaveFunction] {
        &self.states
    }

    pub fn state(&self, node: usize) -> &WaveFunction {
        &self.states[node]
    }

    pub fn initial(&self) -> &WaveFunction {
        &self.states[0]
    }

    pub fn last(&self) -> &WaveFunction {
        &self.states[self.states.len() - 1]
    }

    /// Largest relative deviation of the mass from its initial value.
    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.states[0].mass();
        if m0 == 0.0 {
            return 0.0;
        }
        self.states
            .iter()
            .map(|s| (s.mass() - m0).abs() / m0)
            .fold(0.0, f64::max)
    }

    /// Subsample onto a coarser grid of the same horizon.
    pub fn resample(&self, target: &TimeGrid) -> Result<WaveTrajectory> {
        let same_horizon =
            (target.horizon() - self.time.horizon()).abs() <= 1e-12 * self.time.horizon().abs().max(1.0);
        if !same_horizon || target.steps() == 0 || !self.time.steps().is_multiple_of(target.steps()) {
            return Err(Error::Closure(format!(
                "reference trajectory (T={}, M={}) cannot be sampled on T={}, M={}; \
                 the horizons must agree and M must divide {}",
                self.time.horizon(),
                self.time.steps(),
                target.horizon(),
                target.steps(),
                self.time.steps()
            )));
        }
        let stride = self.time.steps() / target.steps();
        Ok(WaveTrajectory {
            model: self.model,
            time: *target,
            states: self.states.iter().step_by(stride).cloned().collect(),
        })
    }

    /// Tensor powers `|φ_t⟩⟨φ_t|^{⊗k}`, `k = 1..K`, at every node.
    pub fn factorized_hierarchy(
        &self,
        truncation: usize,
        representation: Representation,
        budget: &Budget,
    ) -> Result<TrajectorySet> {
        if truncation == 0 {
            return Err(Error::config("truncation.K must be at least 1"));
        }
        let nodes = self
            .states
            .iter()
            .map(|phi| {
                (1..=truncation)
                    .map(|k| {
                        Ok(match representation {
                            Representation::Dense => DenseKernel::tensor_from_wavefunction(phi, k, budget)?.into(),
                            Representation::Separable => {
                                Kernel::from(SeparableKernel::factorized_with_cap(phi, k, budget.rank_cap))
                            }
                        })
                    })
                    .collect::<Result<Vec<Kernel>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        TrajectorySet::new(self.model, self.time, ClosureKind::Oracle, nodes)
    }

    /// The factorized hierarchy at the first node.
    pub fn initial_hierarchy(
        &self,
        truncation: usize,
        representation: Representation,
        budget: &Budget,
    ) -> Result<Hierarchy> {
        Hierarchy::factorized(self.initial(), self.model, truncation, representation, budget)
    }
}
