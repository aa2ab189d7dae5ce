pub mod cli;
pub mod collision;
pub mod config;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod hierarchy;
pub mod kernel;
pub mod lowrank;
pub mod nls;
pub mod picard;
pub mod snapshot;

pub use config::{load_config, parse_config, ExperimentConfig, LoadedConfig};
pub use error::{Error, Result};
pub use grid::{make_grid, GridSpec};
pub use hierarchy::{quasi_norm, Hierarchy, NormSequence, QuasiNormResult};
pub use kernel::{Budget, DenseKernel, Interaction, ModelSpec, WaveFunction};
pub use lowrank::{Kernel, Representation, SeparableKernel, SeparableTerm};
pub use nls::{split_step, WaveTrajectory};
pub use picard::{Closure, ClosureKind, PicardSolver, TimeGrid, TrajectorySet};
