use std::fmt::Debug;
use std::sync::Arc;

use rayon::prelude::*;

use super::characteristics::Characteristics;
use super::drift::DriftFunction;
use super::flow::YRange;
use crate::error::Result;
use crate::functions::ScalarFn;
use crate::numerics::{hermite, hermite_deriv, node_time_derivative};
use crate::stochastic::TimeGrid;

/// A scalar field `f(t, y)` with its first partial derivatives.
pub trait ScalarField: Send + Sync + Debug {
    fn value(&self, t: f64, y: f64) -> f64;
    fn dt(&self, t: f64, y: f64) -> f64;
    fn dy(&self, t: f64, y: f64) -> f64;
}

/// Runtime field used as the `|z|²` coefficient of drift-quadratic generators.
#[derive(Clone, Debug)]
pub enum Field {
    Const(f64),
    /// `c·e^{a t}`
    ExpTime { c: f64, a: f64 },
    Table(Arc<TabulatedField>),
    /// `base + delta`
    Shifted { base: Arc<Field>, delta: f64 },
    Custom(Arc<dyn ScalarField>),
}

impl Field {
    pub fn shifted(self, delta: f64) -> Field {
        Field::Shifted { base: Arc::new(self), delta }
    }
}

impl ScalarField for Field {
    fn value(&self, t: f64, y: f64) -> f64 {
        match self {
            Field::Const(c) => *c,
            Field::ExpTime { c, a } => c * (a * t).exp(),
            Field::Table(tab) => tab.value(t, y),
            Field::Shifted { base, delta } => base.value(t, y) + delta,
            Field::Custom(f) => f.value(t, y),
        }
    }

    fn dt(&self, t: f64, y: f64) -> f64 {
        match self {
            Field::Const(_) => 0.0,
            Field::ExpTime { c, a } => c * a * (a * t).exp(),
            Field::Table(tab) => tab.dt(t, y),
            Field::Shifted { base, .. } => base.dt(t, y),
            Field::Custom(f) => f.dt(t, y),
        }
    }

    fn dy(&self, t: f64, y: f64) -> f64 {
        match self {
            Field::Const(_) | Field::ExpTime { .. } => 0.0,
            Field::Table(tab) => tab.dy(t, y),
            Field::Shifted { base, .. } => base.dy(t, y),
            Field::Custom(f) => f.dy(t, y),
        }
    }
}

/// Field tabulated on a `(t, y)` grid with `∂_y` slopes: Hermite in `y`,
/// linear in `t`, `∂_t` by five-node differences in `t`. Outside the `y`
/// range the field is held at its edge value.
#[derive(Clone, Debug)]
pub struct TabulatedField {
    tg: TimeGrid,
    range: YRange,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedField {
    pub fn new(tg: TimeGrid, range: YRange, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        let n = (tg.n_steps() + 1) * range.n;
        if values.len() != n || slopes.len() != n {
            return crate::error::invalid(format!("field tables need {n} entries"));
        }
        Ok(TabulatedField { tg, range, values, slopes })
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tg
    }

    pub fn y_range(&self) -> YRange {
        self.range
    }

    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.range.n + j]
    }

    pub fn node_slope(&self, i: usize, j: usize) -> f64 {
        self.slopes[i * self.range.n + j]
    }

    fn cell(&self, y: f64) -> (usize, f64) {
        let r = &self.range;
        let yc = y.clamp(r.lo, r.hi);
        let k = (((yc - r.lo) / r.dy()).floor() as usize).min(r.n - 2);
        (k, yc)
    }

    fn row_value(&self, i: usize, y: f64) -> f64 {
        let (k, yc) = self.cell(y);
        let (r, b) = (&self.range, i * self.range.n);
        let (v, d) = (&self.values[b..], &self.slopes[b..]);
        hermite(r.node(k), r.node(k + 1), v[k], v[k + 1], d[k], d[k + 1], yc)
    }

    fn row_slope(&self, i: usize, y: f64) -> f64 {
        if !self.range.contains(y) {
            return 0.0;
        }
        let (k, yc) = self.cell(y);
        let (r, b) = (&self.range, i * self.range.n);
        let (v, d) = (&self.values[b..], &self.slopes[b..]);
        hermite_deriv(r.node(k), r.node(k + 1), v[k], v[k + 1], d[k], d[k + 1], yc)
    }

    fn row_dt(&self, i: usize, y: f64) -> f64 {
        node_time_derivative(self.tg.nodes(), i, |k| self.row_value(k, y))
    }

    fn in_time<F: Fn(usize) -> f64>(&self, t: f64, f: F) -> f64 {
        if let Some(i) = self.tg.index_of(t) {
            return f(i);
        }
        let i = self.tg.step_index(t);
        let w = ((t - self.tg.nodes()[i]) / self.tg.dt(i)).clamp(0.0, 1.0);
        (1.0 - w) * f(i) + w * f(i + 1)
    }
}

impl ScalarField for TabulatedField {
    fn value(&self, t: f64, y: f64) -> f64 {
        self.in_time(t, |i| self.row_value(i, y))
    }

    fn dt(&self, t: f64, y: f64) -> f64 {
        self.in_time(t, |i| self.row_dt(i, y))
    }

    fn dy(&self, t: f64, y: f64) -> f64 {
        self.in_time(t, |i| self.row_slope(i, y))
    }
}

/// Transport `f(0, ·) = f0` along the characteristics `ẏ = −h`, where
/// `d/dt f(t, y(t)) = ∂_y h·f + ½∂_yy h`, and tabulate the result.
pub fn construct_f(h: &DriftFunction, f0: &ScalarFn, tg: &TimeGrid, range: &YRange) -> Result<TabulatedField> {
    let range = YRange::new(range.lo, range.hi, range.n)?;
    let chars = Characteristics::build(h, tg, range.lo, range.hi, range.dy(), Some(f0))?;
    let ny = range.n;
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..=tg.n_steps())
        .into_par_iter()
        .map(|i| {
            let mut v = vec![0.0; ny];
            let mut d = vec![0.0; ny];
            for j in 0..ny {
                let y = range.node(j);
                if i == 0 {
                    v[j] = f0.eval(y);
                    d[j] = f0.d1(y);
                    continue;
                }
                let y0 = chars.invert(i, y)?;
                v[j] = chars.hermite_at(&chars.f, &chars.zeta, i, y0);
                let xi = chars.hermite_at(&chars.xi, &chars.eta, i, y0);
                d[j] = chars.lagrange_at(&chars.zeta, i, y0) / xi;
            }
            Ok((v, d))
        })
        .collect();
    let mut values = Vec::with_capacity((tg.n_steps() + 1) * ny);
    let mut slopes = Vec::with_capacity(values.capacity());
    for r in rows {
        let (v, d) = r?;
        values.extend(v);
        slopes.extend(d);
    }
    TabulatedField::new(tg.clone(), range, values, slopes)
}

/// Pointwise residual of `∂_t f − h ∂_y f − ∂_y h·f = ½∂_yy h` on a grid.
#[derive(Clone, Debug)]
pub struct ResidualField {
    pub tg: TimeGrid,
    pub range: YRange,
    /// `[i * n_y + j]`
    pub values: Vec<f64>,
}

impl ResidualField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.range.n + j]
    }

    /// Largest absolute residual over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Largest absolute residual over interior nodes.
    pub fn max_abs_interior(&self) -> f64 {
        let (nt, ny) = (self.tg.n_steps(), self.range.n);
        let mut m: f64 = 0.0;
        for i in 1..nt {
            for j in 1..ny - 1 {
                m = m.max(self.at(i, j).abs());
            }
        }
        m
    }
}

pub fn pde_residual_f(h: &DriftFunction, f: &dyn ScalarField, tg: &TimeGrid, range: &YRange) -> ResidualField {
    let ny = range.n;
    let nodes = tg.nodes();
    let mut values = vec![0.0; nodes.len() * ny];
    values.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        let t = nodes[i];
        for (j, r) in row.iter_mut().enumerate() {
            let y = range.node(j);
            let [hv, hy, hyy, _] = h.derivs(t, y);
            *r = f.dt(t, y) - hv * f.dy(t, y) - hy * f.value(t, y) - 0.5 * hyy;
        }
    });
    ResidualField { tg: tg.clone(), range: *range, values }
}
