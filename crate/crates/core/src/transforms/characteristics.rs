//! Forward characteristics `ẏ = −h(t, y)` from a uniform grid of seeds,
//! carried together with their first and second variations and, optionally,
//! the transported field `f` and its seed derivative.

use rayon::prelude::*;

use super::drift::DriftFunction;
use crate::error::{Error, Result};
use crate::functions::ScalarFn;
pub(crate) use crate::numerics::lagrange4;
use crate::numerics::{bisect_newton, hermite, hermite_deriv};
use crate::stochastic::TimeGrid;

#[derive(Clone, Debug)]
pub(crate) struct Characteristics {
    pub tg: TimeGrid,
    pub seed_lo: f64,
    pub seed_dy: f64,
    pub ns: usize,
    /// `Φ_{t_i}(s_k)` stored as `[i * ns + k]`; likewise below.
    pub phi: Vec<f64>,
    /// `∂Φ/∂y0`
    pub xi: Vec<f64>,
    /// `∂²Φ/∂y0²`
    pub eta: Vec<f64>,
    /// transported `f`, empty unless requested
    pub f: Vec<f64>,
    /// `∂f/∂y0`, empty unless requested
    pub zeta: Vec<f64>,
}

const NSTATE: usize = 5;

fn rhs(h: &DriftFunction, t: f64, s: &[f64; NSTATE]) -> [f64; NSTATE] {
    let [y, xi, eta, f, zeta] = *s;
    let [hv, hy, hyy, hyyy] = h.derivs(t, y);
    [
        -hv,
        -hy * xi,
        -hyy * xi * xi - hy * eta,
        hy * f + 0.5 * hyy,
        hyy * xi * f + hy * zeta + 0.5 * hyyy * xi,
    ]
}

fn rk4(h: &DriftFunction, t: f64, dt: f64, s: &[f64; NSTATE]) -> [f64; NSTATE] {
    let add = |a: &[f64; NSTATE], k: &[f64; NSTATE], c: f64| {
        let mut o = *a;
        for i in 0..NSTATE {
            o[i] += c * k[i];
        }
        o
    };
    let k1 = rhs(h, t, s);
    let k2 = rhs(h, t + 0.5 * dt, &add(s, &k1, 0.5 * dt));
    let k3 = rhs(h, t + 0.5 * dt, &add(s, &k2, 0.5 * dt));
    let k4 = rhs(h, t + dt, &add(s, &k3, dt));
    let mut o = *s;
    for i in 0..NSTATE {
        o[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

impl Characteristics {
    fn integrate(h: &DriftFunction, tg: &TimeGrid, lo: f64, dy: f64, ns: usize, f0: Option<&ScalarFn>) -> Result<Self> {
        let nodes = tg.nodes();
        let nt = tg.n_steps();
        let columns: Vec<Result<Vec<[f64; NSTATE]>>> = (0..ns)
            .into_par_iter()
            .map(|k| {
                let y0 = lo + k as f64 * dy;
                let (f, z) = match f0 {
                    Some(f0) => (f0.eval(y0), f0.d1(y0)),
                    None => (0.0, 0.0),
                };
                let mut s = [y0, 1.0, 0.0, f, z];
                let mut col = Vec::with_capacity(nt + 1);
                col.push(s);
                for i in 0..nt {
                    s = rk4(h, nodes[i], nodes[i + 1] - nodes[i], &s);
                    if !(s[1] > 0.0) || !s[0].is_finite() {
                        return Err(Error::MonotoneViolation { t: nodes[i + 1], y0, xi: s[1] });
                    }
                    col.push(s);
                }
                Ok(col)
            })
            .collect();
        let n = (nt + 1) * ns;
        let mut out = Characteristics {
            tg: tg.clone(),
            seed_lo: lo,
            seed_dy: dy,
            ns,
            phi: vec![0.0; n],
            xi: vec![0.0; n],
            eta: vec![0.0; n],
            f: if f0.is_some() { vec![0.0; n] } else { Vec::new() },
            zeta: if f0.is_some() { vec![0.0; n] } else { Vec::new() },
        };
        for (k, col) in columns.into_iter().enumerate() {
            let col = col?;
            for (i, s) in col.iter().enumerate() {
                let idx = i * ns + k;
                out.phi[idx] = s[0];
                out.xi[idx] = s[1];
                out.eta[idx] = s[2];
                if f0.is_some() {
                    out.f[idx] = s[3];
                    out.zeta[idx] = s[4];
                }
            }
        }
        Ok(out)
    }

    /// Integrate from seeds covering `[lo, hi]` with spacing `dy`, widening
    /// the seed range once if some slice `Φ_t(seeds)` fails to cover `[lo, hi]`.
    pub fn build(h: &DriftFunction, tg: &TimeGrid, lo: f64, hi: f64, dy: f64, f0: Option<&ScalarFn>) -> Result<Self> {
        let ns = ((hi - lo) / dy).round() as usize + 1;
        let first = Self::integrate(h, tg, lo, dy, ns, f0)?;
        let Some(short) = first.coverage_gap(lo, hi) else {
            return Ok(first);
        };
        let extra = ((2.0 * short.1 + 2.0 * dy) / dy).ceil() as usize;
        let second = Self::integrate(h, tg, lo - extra as f64 * dy, dy, ns + 2 * extra, f0)?;
        match second.coverage_gap(lo, hi) {
            None => Ok(second),
            Some((t, _)) => Err(Error::GridEscape { t, lo, hi }),
        }
    }

    /// First time at which the seed image misses `[lo, hi]`, and the largest
    /// seed displacement seen over all slices.
    fn coverage_gap(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        let mut first_t = None;
        let mut disp: f64 = 0.0;
        let (s_lo, s_hi) = self.seed_range();
        for (i, t) in self.tg.nodes().iter().enumerate() {
            let row = self.row(&self.phi, i);
            disp = disp.max((row[0] - s_lo).abs()).max((row[self.ns - 1] - s_hi).abs());
            if (row[0] > lo + tol || row[self.ns - 1] < hi - tol) && first_t.is_none() {
                first_t = Some(*t);
            }
        }
        first_t.map(|t| (t, disp))
    }

    pub fn seed_range(&self) -> (f64, f64) {
        (self.seed_lo, self.seed(self.ns - 1))
    }

    pub fn seed(&self, k: usize) -> f64 {
        self.seed_lo + k as f64 * self.seed_dy
    }

    pub fn row<'a>(&self, table: &'a [f64], i: usize) -> &'a [f64] {
        &table[i * self.ns..(i + 1) * self.ns]
    }

    fn cell(&self, y0: f64) -> usize {
        let s = (y0 - self.seed_lo) / self.seed_dy;
        (s.floor().max(0.0) as usize).min(self.ns - 2)
    }

    /// Hermite interpolation in the seed variable of `values` with slopes `slopes`.
    pub fn hermite_at(&self, values: &[f64], slopes: &[f64], i: usize, y0: f64) -> f64 {
        let k = self.cell(y0);
        let (v, d) = (self.row(values, i), self.row(slopes, i));
        hermite(self.seed(k), self.seed(k + 1), v[k], v[k + 1], d[k], d[k + 1], y0)
    }

    pub fn lagrange_at(&self, values: &[f64], i: usize, y0: f64) -> f64 {
        lagrange4(self.row(values, i), self.seed_lo, self.seed_dy, y0)
    }

    /// `Φ_{t_i}(y0)`, extrapolated linearly outside the seed range.
    pub fn forward(&self, i: usize, y0: f64) -> f64 {
        let (lo, hi) = self.seed_range();
        let phi = self.row(&self.phi, i);
        let xi = self.row(&self.xi, i);
        if y0 < lo {
            return phi[0] + xi[0] * (y0 - lo);
        }
        if y0 > hi {
            return phi[self.ns - 1] + xi[self.ns - 1] * (y0 - hi);
        }
        self.hermite_at(&self.phi, &self.xi, i, y0)
    }

    /// The seed `y0` with `Φ_{t_i}(y0) = y`: bracketing search over seeds,
    /// bisection on the Hermite cell to 1e-12, then a Newton polish.
    pub fn invert(&self, i: usize, y: f64) -> Result<f64> {
        let phi = self.row(&self.phi, i);
        let n = self.ns;
        if y < phi[0] || y > phi[n - 1] {
            let (lo, hi) = self.seed_range();
            return Err(Error::GridEscape { t: self.tg.nodes()[i], lo, hi });
        }
        let k = phi.partition_point(|&p| p <= y).saturating_sub(1).min(n - 2);
        let (a, b) = (self.seed(k), self.seed(k + 1));
        if phi[k] == y {
            return Ok(a);
        }
        let xi = self.row(&self.xi, i);
        let f = |s: f64| hermite(a, b, phi[k], phi[k + 1], xi[k], xi[k + 1], s) - y;
        let df = |s: f64| hermite_deriv(a, b, phi[k], phi[k + 1], xi[k], xi[k + 1], s);
        bisect_newton(f, df, a, b, 1e-12)
    }
}
