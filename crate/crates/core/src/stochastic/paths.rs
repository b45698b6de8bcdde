use std::io::{Read, Write};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grid::TimeGrid;
use crate::error::{invalid, Error, Result};
use crate::numerics::norm_inv;

/// Generator for path `index` of a batch seeded with `seed`.
///
/// Every path owns the ChaCha8 stream `index` of the key derived from
/// `seed`, so a path's values do not depend on which thread produced it or
/// on how many other paths were drawn.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard normal draw by inverse CDF of a uniform on the open unit interval.
#[inline]
pub fn std_normal(rng: &mut impl RngCore) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    norm_inv(u)
}

/// Fill `out` (length `(n_steps+1)·d`) with one Brownian path, `W_{t0} = 0`.
pub fn fill_path(grid: &TimeGrid, d: usize, seed: u64, index: u64, out: &mut [f64]) {
    let n = grid.n_steps();
    debug_assert_eq!(out.len(), (n + 1) * d);
    let mut rng = path_rng(seed, index);
    out[..d].fill(0.0);
    for i in 0..n {
        let sd = grid.dt(i).sqrt();
        for k in 0..d {
            out[(i + 1) * d + k] = out[i * d + k] + sd * std_normal(&mut rng);
        }
    }
}

/// A batch of Brownian paths stored path-major as `[path][step][dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBatch {
    pub grid: TimeGrid,
    pub d: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

/// Borrowed view of one path.
#[derive(Clone, Copy, Debug)]
pub struct PathRef<'a> {
    pub grid: &'a TimeGrid,
    pub d: usize,
    pub values: &'a [f64],
}

impl<'a> PathRef<'a> {
    pub fn new(grid: &'a TimeGrid, d: usize, values: &'a [f64]) -> Self {
        PathRef { grid, d, values }
    }

    /// `W_{t_i}` as a d-vector.
    pub fn at(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// First coordinate `W¹_{t_i}`.
    pub fn w1(&self, i: usize) -> f64 {
        self.values[i * self.d]
    }

    /// First coordinate at the grid node equal to `t`.
    pub fn w1_at_time(&self, t: f64) -> Result<f64> {
        match self.grid.index_of(t) {
            Some(i) => Ok(self.w1(i)),
            None => invalid(format!("t = {t} is not a node of the path grid")),
        }
    }
}

/// Simulate `n_paths` Brownian paths on `grid`.
pub fn sample_paths(grid: &TimeGrid, d: usize, n_paths: usize, seed: u64) -> Result<PathBatch> {
    if n_paths == 0 || d == 0 {
        return invalid("sample_paths needs n_paths >= 1 and d >= 1");
    }
    if grid.n_steps() == 0 {
        return invalid("sample_paths needs n_steps >= 1");
    }
    let stride = (grid.n_steps() + 1) * d;
    let mut values = vec![0.0; stride * n_paths];
    values
        .par_chunks_mut(stride)
        .enumerate()
        .for_each(|(p, out)| fill_path(grid, d, seed, p as u64, out));
    Ok(PathBatch { grid: grid.clone(), d, n_paths, seed, values })
}

impl PathBatch {
    pub fn stride(&self) -> usize {
        (self.grid.n_steps() + 1) * self.d
    }

    pub fn path(&self, p: usize) -> PathRef<'_> {
        let s = self.stride();
        PathRef { grid: &self.grid, d: self.d, values: &self.values[p * s..(p + 1) * s] }
    }

    /// Terminal first coordinate of every path.
    pub fn terminal_w1(&self) -> Vec<f64> {
        let n = self.grid.n_steps();
        (0..self.n_paths).map(|p| self.path(p).w1(n)).collect()
    }

    /// Write the flat little-endian binary format (magic `QBSD`).
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        if !self.grid.is_uniform() {
            return invalid("binary export needs a uniform time grid");
        }
        let header = BinaryHeader {
            magic: *PATH_MAGIC,
            version: FORMAT_VERSION,
            d: self.d as u32,
            n_steps: self.grid.n_steps() as u64,
            n_paths: self.n_paths as u64,
            seed: self.seed,
            t0: self.grid.t0(),
            t_end: self.grid.t_end(),
        };
        header.write(w)?;
        write_f64s(w, &self.values)
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let h = BinaryHeader::read(r, PATH_MAGIC)?;
        let grid = TimeGrid::uniform(h.t0, h.t_end, h.n_steps as usize)?;
        let d = h.d as usize;
        let n_paths = h.n_paths as usize;
        let values = read_f64s(r, (grid.n_steps() + 1) * d * n_paths)?;
        Ok(PathBatch { grid, d, n_paths, seed: h.seed, values })
    }
}

pub(crate) const PATH_MAGIC: &[u8; 4] = b"QBSD";
pub(crate) const FORMAT_VERSION: u32 = 1;

/// Header shared by the path and surface binary formats.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryHeader {
    pub magic: [u8; 4],
    pub version: u32,
    pub d: u32,
    pub n_steps: u64,
    pub n_paths: u64,
    pub seed: u64,
    pub t0: f64,
    pub t_end: f64,
}

impl BinaryHeader {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.magic)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.d.to_le_bytes())?;
        w.write_all(&self.n_steps.to_le_bytes())?;
        w.write_all(&self.n_paths.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.t0.to_le_bytes())?;
        w.write_all(&self.t_end.to_le_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<Self> {
        let mut m = [0u8; 4];
        r.read_exact(&mut m)?;
        if &m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        Ok(BinaryHeader {
            magic: m,
            version,
            d: read_u32(r)?,
            n_steps: read_u64(r)?,
            n_paths: read_u64(r)?,
            seed: read_u64(r)?,
            t0: read_f64(r)?,
            t_end: read_f64(r)?,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
