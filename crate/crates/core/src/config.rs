//! TOML experiment configuration.
//!
//! ```toml
//! [grid]
//! n = 1
//! points = 16
//!
//! [model]
//! interaction = "cubic"   # or "quintic"
//! mu = 1
//! alpha = 1.0
//!
//! [initial]
//! modes = [{ p = [0], re = 0.4 }, { p = [1], re = 0.2 }]
//! # snapshots = ["level1.gphk", "level2.gphk"]
//!
//! [truncation]
//! K = 2
//!
//! [time]
//! horizon = 0.1           # or "theorem"
//! steps = 64
//! ```
//!
//! Every other section is optional; see [`ExperimentConfig`] for defaults.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernel::{Budget, Interaction, ModelSpec, WaveFunction, DEFAULT_MAX_DENSE_ENTRIES, DEFAULT_RANK_CAP};
use crate::lowrank::Representation;
use crate::picard::{ClosureKind, DEFAULT_MAX_DEPTH, DEFAULT_TOLERANCE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub initial: InitialSection,
    pub truncation: TruncationSection,
    #[serde(default)]
    pub representation: RepresentationSection,
    pub time: TimeSection,
    #[serde(default)]
    pub closure: ClosureSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub interaction: Interaction,
    pub mu: i32,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub p: Vec<i64>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Fourier modes of `φ₀` for factorized data.
    pub modes: Option<Vec<Mode>>,
    /// One kernel snapshot per level `1..=K`, relative to the config file.
    pub snapshots: Option<Vec<PathBuf>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepresentationSection {
    pub kind: Representation,
    pub rank_cap: usize,
    pub max_dense_entries: usize,
}

impl Default for RepresentationSection {
    fn default() -> Self {
        RepresentationSection {
            kind: Representation::Dense,
            rank_cap: DEFAULT_RANK_CAP,
            max_dense_entries: DEFAULT_MAX_DENSE_ENTRIES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Fixed(f64),
    /// Must be the string `"theorem"`.
    Keyword(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: Horizon,
    pub steps: usize,
    /// Ĉ for the theorem horizon.
    pub c_hat: Option<f64>,
    /// Estimate Ĉ from the `[estimate]` section before running.
    #[serde(default)]
    pub estimate_first: bool,
    /// Horizon used when the theorem horizon is unbounded (zero data).
    pub fallback_horizon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosureSection {
    pub kind: ClosureKind,
    /// Steps of the one-body reference solve; a multiple of `time.steps`.
    pub oracle_steps: Option<usize>,
}

impl Default for ClosureSection {
    fn default() -> Self {
        ClosureSection {
            kind: ClosureKind::Zero,
            oracle_steps: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Picard,
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub kind: SolverKind,
    pub tolerance: f64,
    pub max_depth: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            kind: SolverKind::Picard,
            tolerance: DEFAULT_TOLERANCE,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    pub samples: usize,
    pub seed: u64,
    pub levels: Vec<usize>,
    /// Grid sizes for the refinement table.
    pub refine_points: Vec<usize>,
    pub a_hat: f64,
}

impl Default for EstimateSection {
    fn default() -> Self {
        EstimateSection {
            samples: 10,
            seed: 0,
            levels: vec![1, 2],
            refine_points: Vec::new(),
            a_hat: crate::estimates::DEFAULT_A_HAT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Largest acceptable mild-form residual.
    pub tolerance: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { tolerance: 1e-6 }
    }
}

/// A parsed config plus where it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Hex SHA-256 of the config text.
    pub hash: String,
    pub base_dir: PathBuf,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    Ok(LoadedConfig {
        config,
        hash: hash_text(&text),
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.grid.n != 1 && self.grid.n != 2 {
            return fail(format!("grid.n: must be 1 or 2, got {}", self.grid.n));
        }
        if self.grid.points < 4 || !self.grid.points.is_multiple_of(2) {
            return fail(format!("grid.points: must be even and at least 4, got {}", self.grid.points));
        }
        if self.model.mu != 1 && self.model.mu != -1 {
            return fail(format!("model.mu: must be +1 or -1, got {}", self.model.mu));
        }
        if !(self.model.alpha.is_finite() && self.model.alpha > 0.0) {
            return fail(format!("model.alpha: must be finite and positive, got {}", self.model.alpha));
        }
        match (&self.initial.modes, &self.initial.snapshots) {
            (None, None) => return fail("initial: give exactly one of initial.modes or initial.snapshots".into()),
            (Some(_), Some(_)) => {
                return fail("initial: initial.modes and initial.snapshots are mutually exclusive".into())
            }
            (Some(modes), None) => {
                if modes.is_empty() {
                    return fail("initial.modes: needs at least one mode".into());
                }
                for (i, m) in modes.iter().enumerate() {
                    if m.p.len() != self.grid.n {
                        return fail(format!("initial.modes[{i}].p: needs {} components", self.grid.n));
                    }
                    if !(m.re.is_finite() && m.im.is_finite()) {
                        return fail(format!("initial.modes[{i}]: coefficient must be finite"));
                    }
                }
            }
            (None, Some(paths)) => {
                if paths.len() != self.truncation.k {
                    return fail(format!(
                        "initial.snapshots: expected {} files (one per level), got {}",
                        self.truncation.k,
                        paths.len()
                    ));
                }
                if self.closure.kind == ClosureKind::Oracle {
                    return fail("closure.kind: the oracle closure needs initial.modes (factorized data)".into());
                }
            }
        }
        if self.truncation.k == 0 {
            return fail("truncation.K: must be at least 1".into());
        }
        if self.representation.rank_cap == 0 {
            return fail("representation.rank_cap: must be at least 1".into());
        }
        match &self.time.horizon {
            Horizon::Fixed(t) if !(t.is_finite() && *t > 0.0) => {
                return fail(format!("time.horizon: must be positive, got {t}"));
            }
            Horizon::Keyword(k) if k != "theorem" => {
                return fail(format!("time.horizon: expected a number or \"theorem\", got {k:?}"));
            }
            Horizon::Keyword(_) if self.time.c_hat.is_none() && !self.time.estimate_first => {
                return fail("time.horizon: \"theorem\" needs time.c_hat or time.estimate_first = true".into());
            }
            _ => {}
        }
        if let Some(c) = self.time.c_hat {
            if !(c.is_finite() && c > 0.0) {
                return fail(format!("time.c_hat: must be positive, got {c}"));
            }
        }
        if let Some(t) = self.time.fallback_horizon {
            if !(t.is_finite() && t > 0.0) {
                return fail(format!("time.fallback_horizon: must be positive, got {t}"));
            }
        }
        if self.time.steps == 0 {
            return fail("time.steps: must be at least 1".into());
        }
        if self.closure.kind == ClosureKind::Oracle {
            let steps = self.closure.oracle_steps.unwrap_or(self.time.steps);
            if steps == 0 || !steps.is_multiple_of(self.time.steps) {
                return fail(format!(
                    "closure.oracle_steps: must be a positive multiple of time.steps = {}, got {steps}",
                    self.time.steps
                ));
            }
        }
        if !(self.solver.tolerance.is_finite() && self.solver.tolerance >= 0.0) {
            return fail("solver.tolerance: must be finite and nonnegative".into());
        }
        if self.solver.max_depth == 0 {
            return fail("solver.max_depth: must be at least 1".into());
        }
        if self.estimate.samples < crate::estimates::MIN_SAMPLES {
            return fail(format!(
                "estimate.samples: must be at least {}, got {}",
                crate::estimates::MIN_SAMPLES,
                self.estimate.samples
            ));
        }
        if self.estimate.levels.is_empty() || self.estimate.levels.contains(&0) {
            return fail("estimate.levels: must list levels k >= 1".into());
        }
        for (i, p) in self.estimate.refine_points.iter().enumerate() {
            if *p < 4 || p % 2 != 0 {
                return fail(format!("estimate.refine_points[{i}]: must be even and at least 4, got {p}"));
            }
        }
        if self.estimate.a_hat <= 2.0 {
            return fail(format!("estimate.a_hat: must exceed 2, got {}", self.estimate.a_hat));
        }
        if !(self.verify.tolerance.is_finite() && self.verify.tolerance > 0.0) {
            return fail("verify.tolerance: must be positive".into());
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.points)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.model.mu, self.model.interaction, self.model.alpha)
    }

    pub fn budget(&self) -> Budget {
        Budget {
            max_dense_entries: self.representation.max_dense_entries,
            rank_cap: self.representation.rank_cap,
        }
    }

    /// `φ₀` from `initial.modes`, if given.
    pub fn initial_wave(&self, grid: &GridSpec) -> Result<Option<WaveFunction>> {
        let Some(modes) = &self.initial.modes else {
            return Ok(None);
        };
        let list: Vec<(Vec<i64>, C64)> = modes.iter().map(|m| (m.p.clone(), C64::new(m.re, m.im))).collect();
        WaveFunction::from_modes(grid, &list).map(Some)
    }

    pub fn oracle_steps(&self) -> usize {
        self.closure.oracle_steps.unwrap_or(self.time.steps)
    }
}
