use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::characteristics::{lagrange4, Characteristics};
use super::drift::DriftFunction;
use crate::error::{invalid, Result};
use crate::numerics::{hermite, hermite_deriv, node_time_derivative};
use crate::stochastic::TimeGrid;

/// Uniform grid `[lo, hi]` with `n` nodes in the `y` variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl YRange {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n < 4 {
            return invalid(format!("y range needs lo < hi and n >= 4, got [{lo}, {hi}] x {n}"));
        }
        Ok(YRange { lo, hi, n })
    }

    pub fn dy(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n - 1 {
            self.hi
        } else {
            self.lo + j as f64 * self.dy()
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }
}

/// Tabulated change of variables `v(t, y) = Φ_t⁻¹(y)` with `∂_y v`, `∂_yy v`.
#[derive(Clone, Debug)]
pub struct FlowTable {
    pub drift: DriftFunction,
    tg: TimeGrid,
    range: YRange,
    v: Vec<f64>,
    dv: Vec<f64>,
    ddv: Vec<f64>,
    chars: Characteristics,
    m1: f64,
    big_m1: f64,
}

/// JSON descriptor of a flow table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowDescriptor {
    pub drift: DriftFunction,
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub y: YRange,
    pub m1: f64,
    pub big_m1: f64,
}

/// Solve `∂_t v = h ∂_y v`, `v(0, y) = y`, by characteristics.
pub fn solve_characteristics(h: &DriftFunction, tg: &TimeGrid, range: &YRange) -> Result<FlowTable> {
    let range = YRange::new(range.lo, range.hi, range.n)?;
    let chars = Characteristics::build(h, tg, range.lo, range.hi, range.dy(), None)?;
    let ny = range.n;
    let nt = tg.n_steps();
    let rows: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..=nt)
        .into_par_iter()
        .map(|i| {
            let mut v = vec![0.0; ny];
            let mut dv = vec![1.0; ny];
            let mut ddv = vec![0.0; ny];
            for j in 0..ny {
                let y = range.node(j);
                if i == 0 {
                    v[j] = y;
                    continue;
                }
                let y0 = chars.invert(i, y)?;
                let xi = chars.hermite_at(&chars.xi, &chars.eta, i, y0);
                let eta = chars.lagrange_at(&chars.eta, i, y0);
                v[j] = y0;
                dv[j] = 1.0 / xi;
                ddv[j] = -eta / (xi * xi * xi);
            }
            Ok((v, dv, ddv))
        })
        .collect();
    let mut v = Vec::with_capacity((nt + 1) * ny);
    let mut dv = Vec::with_capacity((nt + 1) * ny);
    let mut ddv = Vec::with_capacity((nt + 1) * ny);
    for r in rows {
        let (a, b, c) = r?;
        v.extend(a);
        dv.extend(b);
        ddv.extend(c);
    }
    let m1 = dv.iter().cloned().fold(f64::INFINITY, f64::min);
    let big_m1 = dv.iter().cloned().fold(0.0, f64::max);
    Ok(FlowTable { drift: h.clone(), tg: tg.clone(), range, v, dv, ddv, chars, m1, big_m1 })
}

impl FlowTable {
    pub fn drift(&self) -> &DriftFunction {
        &self.drift
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tg
    }

    pub fn y_range(&self) -> YRange {
        self.range
    }

    /// `min ∂_y v` over the table.
    pub fn m1(&self) -> f64 {
        self.m1
    }

    /// `max ∂_y v` over the table.
    pub fn big_m1(&self) -> f64 {
        self.big_m1
    }

    pub fn descriptor(&self) -> FlowDescriptor {
        FlowDescriptor {
            drift: self.drift.clone(),
            t0: self.tg.t0(),
            t_end: self.tg.t_end(),
            n_steps: self.tg.n_steps(),
            y: self.range,
            m1: self.m1,
            big_m1: self.big_m1,
        }
    }

    fn row<'a>(&self, table: &'a [f64], i: usize) -> &'a [f64] {
        &table[i * self.range.n..(i + 1) * self.range.n]
    }

    pub fn v_node(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.range.n + j]
    }

    pub fn dv_node(&self, i: usize, j: usize) -> f64 {
        self.dv[i * self.range.n + j]
    }

    pub fn ddv_node(&self, i: usize, j: usize) -> f64 {
        self.ddv[i * self.range.n + j]
    }

    /// Bracketing nodes and linear weight for time `t`.
    fn time_weights(&self, t: f64) -> (usize, f64) {
        if let Some(i) = self.tg.index_of(t) {
            return (i, 0.0);
        }
        let i = self.tg.step_index(t);
        let w = ((t - self.tg.nodes()[i]) / self.tg.dt(i)).clamp(0.0, 1.0);
        (i, w)
    }

    fn in_time<F: Fn(usize) -> f64>(&self, t: f64, f: F) -> f64 {
        let (i, w) = self.time_weights(t);
        if w == 0.0 {
            f(i)
        } else {
            (1.0 - w) * f(i) + w * f(i + 1)
        }
    }

    fn hermite_row(&self, vals: &[f64], slopes: &[f64], i: usize, y: f64) -> f64 {
        let r = &self.range;
        let (v, d) = (self.row(vals, i), self.row(slopes, i));
        let n = r.n;
        if y <= r.lo {
            return v[0] + d[0] * (y - r.lo);
        }
        if y >= r.hi {
            return v[n - 1] + d[n - 1] * (y - r.hi);
        }
        let k = (((y - r.lo) / r.dy()).floor() as usize).min(n - 2);
        hermite(r.node(k), r.node(k + 1), v[k], v[k + 1], d[k], d[k + 1], y)
    }

    fn hermite_row_slope(&self, vals: &[f64], slopes: &[f64], i: usize, y: f64) -> f64 {
        let r = &self.range;
        let (v, d) = (self.row(vals, i), self.row(slopes, i));
        let n = r.n;
        let yc = y.clamp(r.lo, r.hi);
        let k = (((yc - r.lo) / r.dy()).floor() as usize).min(n - 2);
        hermite_deriv(r.node(k), r.node(k + 1), v[k], v[k + 1], d[k], d[k + 1], yc)
    }

    /// `v(t, y)`: Hermite in `y`, linear in `t` between nodes, linear
    /// extrapolation outside the `y` range.
    pub fn v(&self, t: f64, y: f64) -> f64 {
        self.in_time(t, |i| self.hermite_row(&self.v, &self.dv, i, y))
    }

    /// `∂_y v(t, y)`.
    pub fn dv(&self, t: f64, y: f64) -> f64 {
        self.in_time(t, |i| {
            if self.range.contains(y) {
                self.hermite_row(&self.dv, &self.ddv, i, y)
            } else {
                self.hermite_row_slope(&self.v, &self.dv, i, y)
            }
        })
    }

    /// `∂_yy v(t, y)`.
    pub fn ddv(&self, t: f64, y: f64) -> f64 {
        self.in_time(t, |i| lagrange4(self.row(&self.ddv, i), self.range.lo, self.range.dy(), y))
    }

    fn dt_v_node(&self, i: usize, y: f64) -> f64 {
        node_time_derivative(self.tg.nodes(), i, |k| self.hermite_row(&self.v, &self.dv, k, y))
    }

    /// `∂_t v(t, y)` from the table by finite differences in `t`.
    pub fn dt_v(&self, t: f64, y: f64) -> f64 {
        self.in_time(t, |i| self.dt_v_node(i, y))
    }

    /// `v⁻¹(t, u) = Φ_t(u)`, the forward characteristic started at `u`.
    pub fn v_inv(&self, t: f64, u: f64) -> f64 {
        self.in_time(t, |i| self.chars.forward(i, u))
    }

    /// Largest `|∂_t v − h ∂_y v|` over interior table nodes.
    pub fn transport_residual(&self) -> f64 {
        let nodes = self.tg.nodes();
        let mut worst: f64 = 0.0;
        for i in 1..self.tg.n_steps() {
            for j in 1..self.range.n - 1 {
                let y = self.range.node(j);
                let r = self.dt_v_node(i, y) - self.drift.h(nodes[i], y) * self.dv_node(i, j);
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    /// Rows `(t, y, v, dv, ddv)` as CSV.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,y,v,dv,ddv")?;
        for (i, t) in self.tg.nodes().iter().enumerate() {
            for j in 0..self.range.n {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    t,
                    self.range.node(j),
                    self.v_node(i, j),
                    self.dv_node(i, j),
                    self.ddv_node(i, j)
                )?;
            }
        }
        Ok(())
    }
}
