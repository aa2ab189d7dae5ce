//! Little-endian binary snapshots.
//!
//! * `GPHK`: version, n, N, k, then `(Nⁿ)^{2k}` complex values.
//! * `GPHS`: version, n, N, k, r, then per term the coefficient, `k` left and
//!   `k` right factors of `Nⁿ` values each.
//! * `GPHT`: version, K, M, interaction, μ, α, T, closure, then one `GPHK` or
//!   `GPHS` record per node and level.
//!
//! Complex values are interleaved `f64` pairs. Every decoding error reports the
//! byte offset where it was detected.

use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernel::{DenseKernel, Interaction, ModelSpec};
use crate::lowrank::{Kernel, SeparableKernel, SeparableTerm};
use crate::picard::{ClosureKind, TimeGrid, TrajectorySet};

pub const FORMAT_VERSION: u32 = 1;
pub const KERNEL_MAGIC: &[u8; 4] = b"GPHK";
pub const SEPARABLE_MAGIC: &[u8; 4] = b"GPHS";
pub const TRAJECTORY_MAGIC: &[u8; 4] = b"GPHT";

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn i32(&mut self, v: i32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn complex(&mut self, values: &[C64]) {
        self.0.reserve(values.len() * 16);
        for v in values {
            self.f64(v.re);
            self.f64(v.im);
        }
    }

    fn grid_header(&mut self, magic: &[u8; 4], grid: &GridSpec, k: usize) {
        self.0.extend_from_slice(magic);
        self.u32(FORMAT_VERSION);
        self.u32(grid.dim() as u32);
        self.u32(grid.points() as u32);
        self.u32(k as u32);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: offset as u64,
            message: message.into(),
        })
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            return self.fail(
                self.pos,
                format!("truncated {what}: need {len} bytes, {} remain", self.bytes.len() - self.pos),
            );
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn complex(&mut self, count: u128, what: &str) -> Result<Vec<C64>> {
        let need = count.saturating_mul(16);
        let remain = (self.bytes.len() - self.pos) as u128;
        if need > remain {
            return self.fail(self.pos, format!("truncated {what}: need {need} bytes, {remain} remain"));
        }
        let raw = self.take(need as usize, what)?;
        Ok(raw
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }

    fn peek_magic(&self) -> Result<[u8; 4]> {
        if self.bytes.len() - self.pos < 4 {
            return self.fail(self.pos, "truncated record: missing magic");
        }
        Ok(self.bytes[self.pos..self.pos + 4].try_into().unwrap())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let at = self.pos;
        let got = self.take(4, "magic")?;
        if got != expected {
            return self.fail(
                at,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            );
        }
        let at = self.pos;
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            return self.fail(at, format!("unsupported version {version}, expected {FORMAT_VERSION}"));
        }
        Ok(())
    }

    fn grid(&mut self) -> Result<GridSpec> {
        let at = self.pos;
        let n = self.u32("n")?;
        let points = self.u32("N")?;
        GridSpec::new(n as usize, points as usize).or_else(|e| self.fail(at, format!("invalid grid: {e}")))
    }

    fn particles(&mut self) -> Result<usize> {
        let at = self.pos;
        let k = self.u32("k")?;
        if k == 0 {
            return self.fail(at, "particle number must be at least 1");
        }
        Ok(k as usize)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return self.fail(self.pos, format!("{} trailing bytes", self.bytes.len() - self.pos));
        }
        Ok(())
    }

    fn kernel(&mut self) -> Result<DenseKernel> {
        self.magic(KERNEL_MAGIC)?;
        let grid = self.grid()?;
        let k = self.particles()?;
        let count = (grid.slot_len() as u128).pow(2 * k as u32);
        let values = self.complex(count, "kernel values")?;
        DenseKernel::from_values(&grid, k, values)
    }

    fn separable(&mut self) -> Result<SeparableKernel> {
        self.magic(SEPARABLE_MAGIC)?;
        let grid = self.grid()?;
        let k = self.particles()?;
        let rank = self.u32("rank")? as usize;
        let m = grid.slot_len() as u128;
        let per_term = 16 * (1 + 2 * k as u128 * m);
        let remain = (self.bytes.len() - self.pos) as u128;
        if per_term.saturating_mul(rank as u128) > remain {
            return self.fail(self.pos, format!("truncated separable terms: rank {rank} does not fit in {remain} bytes"));
        }
        let mut terms = Vec::with_capacity(rank);
        for _ in 0..rank {
            let coeff = self.complex(1, "term coefficient")?[0];
            let left = (0..k).map(|_| self.complex(m, "left factor")).collect::<Result<Vec<_>>>()?;
            let right = (0..k).map(|_| self.complex(m, "right factor")).collect::<Result<Vec<_>>>()?;
            terms.push(SeparableTerm { coeff, left, right });
        }
        SeparableKernel::from_terms(&grid, k, rank.max(crate::kernel::DEFAULT_RANK_CAP), terms)
    }

    fn any_kernel(&mut self) -> Result<Kernel> {
        match &self.peek_magic()? {
            m if m == KERNEL_MAGIC => Ok(self.kernel()?.into()),
            m if m == SEPARABLE_MAGIC => Ok(self.separable()?.into()),
            m => self.fail(self.pos, format!("unknown kernel record magic {:?}", String::from_utf8_lossy(m))),
        }
    }
}

pub fn encode_kernel(kernel: &DenseKernel) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(20 + kernel.len() * 16));
    w.grid_header(KERNEL_MAGIC, kernel.grid(), kernel.particles());
    w.complex(kernel.values());
    w.0
}

pub fn encode_separable(kernel: &SeparableKernel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.grid_header(SEPARABLE_MAGIC, kernel.grid(), kernel.particles());
    w.u32(kernel.rank() as u32);
    for t in kernel.terms() {
        w.complex(&[t.coeff]);
        for f in t.left.iter().chain(&t.right) {
            w.complex(f);
        }
    }
    w.0
}

pub fn encode_any(kernel: &Kernel) -> Vec<u8> {
    match kernel {
        Kernel::Dense(d) => encode_kernel(d),
        Kernel::Separable(s) => encode_separable(s),
    }
}

pub fn decode_kernel(bytes: &[u8]) -> Result<DenseKernel> {
    let mut r = Reader { bytes, pos: 0 };
    let k = r.kernel()?;
    r.finish()?;
    Ok(k)
}

pub fn decode_separable(bytes: &[u8]) -> Result<SeparableKernel> {
    let mut r = Reader { bytes, pos: 0 };
    let k = r.separable()?;
    r.finish()?;
    Ok(k)
}

/// Either kernel record, chosen by its magic.
pub fn decode_any(bytes: &[u8]) -> Result<Kernel> {
    let mut r = Reader { bytes, pos: 0 };
    let k = r.any_kernel()?;
    r.finish()?;
    Ok(k)
}

pub fn encode_trajectory(traj: &TrajectorySet) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(TRAJECTORY_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(traj.truncation() as u32);
    w.u32(traj.time().steps() as u32);
    w.u32(traj.model().interaction().code());
    w.i32(traj.model().mu());
    w.f64(traj.model().alpha());
    w.f64(traj.time().horizon());
    w.u32(traj.closure().code());
    for node in traj.nodes() {
        for level in node {
            w.0.extend_from_slice(&encode_any(level));
        }
    }
    w.0
}

pub fn decode_trajectory(bytes: &[u8]) -> Result<TrajectorySet> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(TRAJECTORY_MAGIC)?;
    let truncation = r.u32("K")? as usize;
    let steps = r.u32("M")? as usize;
    let at = r.pos;
    let interaction = Interaction::from_code(r.u32("interaction")?);
    let Some(interaction) = interaction else {
        return r.fail(at, "unknown interaction code");
    };
    let at = r.pos;
    let mu = r.i32("mu")?;
    let alpha = r.f64("alpha")?;
    let model = ModelSpec::new(mu, interaction, alpha).or_else(|e| r.fail(at, format!("invalid model: {e}")))?;
    let at = r.pos;
    let horizon = r.f64("T")?;
    let time = TimeGrid::new(horizon, steps).or_else(|e| r.fail(at, format!("invalid time grid: {e}")))?;
    let at = r.pos;
    let Some(closure) = ClosureKind::from_code(r.u32("closure")?) else {
        return r.fail(at, "unknown closure code");
    };
    if truncation == 0 {
        return r.fail(4 + 4, "K must be at least 1");
    }
    let mut nodes = Vec::with_capacity(time.len());
    for _ in 0..time.len() {
        let mut levels = Vec::with_capacity(truncation);
        for k in 1..=truncation {
            let at = r.pos;
            let kernel = r.any_kernel()?;
            if kernel.particles() != k {
                return r.fail(at, format!("record holds level {}, expected {k}", kernel.particles()));
            }
            levels.push(kernel);
        }
        nodes.push(levels);
    }
    r.finish()?;
    TrajectorySet::new(model, time, closure, nodes)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}

pub fn save_kernel(path: impl AsRef<Path>, kernel: &Kernel) -> Result<()> {
    Ok(fs::write(path, encode_any(kernel))?)
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<Kernel> {
    decode_any(&read(path.as_ref())?)
}

pub fn save_trajectory(path: impl AsRef<Path>, traj: &TrajectorySet) -> Result<()> {
    Ok(fs::write(path, encode_trajectory(traj))?)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<TrajectorySet> {
    decode_trajectory(&read(path.as_ref())?)
}
