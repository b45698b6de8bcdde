use std::io::{Read, Write};

use super::scheme::SpatialGrid;
use crate::error::{Error, Result};
use crate::stochastic::{read_f64, read_f64s, write_f64s, BinaryHeader, TimeGrid, FORMAT_VERSION};

const SURFACE_MAGIC: &[u8; 4] = b"QSRF";

/// Solution `u(t_i, x_j)` with its spatial derivative `z = u_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueSurface {
    pub time_grid: TimeGrid,
    pub space_grid: SpatialGrid,
    u: Vec<f64>,
    z: Vec<f64>,
}

/// Central differences inside, second-order one-sided differences at the ends.
pub fn spatial_derivative(row: &[f64], dx: f64, out: &mut [f64]) {
    let n = row.len();
    for j in 1..n - 1 {
        out[j] = (row[j + 1] - row[j - 1]) / (2.0 * dx);
    }
    if n >= 3 {
        out[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) / (2.0 * dx);
        out[n - 1] = (3.0 * row[n - 1] - 4.0 * row[n - 2] + row[n - 3]) / (2.0 * dx);
    }
}

impl ValueSurface {
    /// Build from row-major values `u[(i, j)]`, deriving `z` by finite differences.
    pub fn from_values(time_grid: TimeGrid, space_grid: SpatialGrid, u: Vec<f64>) -> Self {
        let nx = space_grid.n_x();
        assert_eq!(u.len(), (time_grid.n_steps() + 1) * nx);
        let mut z = vec![0.0; u.len()];
        let dx = space_grid.dx();
        for (row, zrow) in u.chunks_exact(nx).zip(z.chunks_exact_mut(nx)) {
            spatial_derivative(row, dx, zrow);
        }
        ValueSurface { time_grid, space_grid, u, z }
    }

    pub fn u_row(&self, i: usize) -> &[f64] {
        let nx = self.space_grid.n_x();
        &self.u[i * nx..(i + 1) * nx]
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        let nx = self.space_grid.n_x();
        &self.z[i * nx..(i + 1) * nx]
    }

    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.space_grid.n_x() + j]
    }

    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.space_grid.n_x() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn sup_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn row_index(&self, t: f64, x: f64) -> Result<usize> {
        self.time_grid.index_of(t).ok_or(Error::OutOfDomain { t, x })
    }

    /// `u(t, x)` by linear interpolation in `x`; `t` must be a grid node.
    pub fn value_at(&self, t: f64, x: f64) -> Result<f64> {
        let i = self.row_index(t, x)?;
        self.space_grid.interpolate(self.u_row(i), x).ok_or(Error::OutOfDomain { t, x })
    }

    /// `u_x(t, x)` by linear interpolation in `x`; `t` must be a grid node.
    pub fn z_at(&self, t: f64, x: f64) -> Result<f64> {
        let i = self.row_index(t, x)?;
        self.space_grid.interpolate(self.z_row(i), x).ok_or(Error::OutOfDomain { t, x })
    }

    /// Rows `(t, x, u, z)` as CSV with a header line.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,x,u,z")?;
        let nx = self.space_grid.n_x();
        for (i, t) in self.time_grid.nodes().iter().enumerate() {
            for j in 0..nx {
                writeln!(w, "{},{},{},{}", t, self.space_grid.x(j), self.u(i, j), self.z(i, j))?;
            }
        }
        Ok(())
    }

    /// Binary layout: shared header (magic `QSRF`, `d = 2` layers,
    /// `n_paths` = n_x), then `x_min`, `x_max`, the `u` layer and the `z` layer.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        if !self.time_grid.is_uniform() {
            return Err(Error::InvalidArgument("binary export needs a uniform time grid".into()));
        }
        BinaryHeader {
            magic: *SURFACE_MAGIC,
            version: FORMAT_VERSION,
            d: 2,
            n_steps: self.time_grid.n_steps() as u64,
            n_paths: self.space_grid.n_x() as u64,
            seed: 0,
            t0: self.time_grid.t0(),
            t_end: self.time_grid.t_end(),
        }
        .write(w)?;
        write_f64s(w, &[self.space_grid.x_min(), self.space_grid.x_max()])?;
        write_f64s(w, &self.u)?;
        write_f64s(w, &self.z)
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let h = BinaryHeader::read(r, SURFACE_MAGIC)?;
        if h.d != 2 {
            return Err(Error::Format(format!("surface file has {} layers, expected 2", h.d)));
        }
        let tg = TimeGrid::uniform(h.t0, h.t_end, h.n_steps as usize)?;
        let x_min = read_f64(r)?;
        let x_max = read_f64(r)?;
        let sg = SpatialGrid::new(x_min, x_max, h.n_paths as usize)?;
        let n = (tg.n_steps() + 1) * sg.n_x();
        let u = read_f64s(r, n)?;
        let z = read_f64s(r, n)?;
        Ok(ValueSurface { time_grid: tg, space_grid: sg, u, z })
    }
}

/// `E^g_{t,T}[φ(W_T)]` given `W_t = x`, read off a solved surface.
pub fn g_expectation(vs: &ValueSurface, t: f64, x: f64) -> Result<f64> {
    vs.value_at(t, x)
}
