use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::flow::FlowTable;
use crate::error::{Error, Result};
use crate::functions::ScalarFn;
use crate::numerics::{bisect_newton, hermite, hermite_deriv, integrate};

/// Strictly increasing map tabulated with values and derivatives on sorted
/// nodes; evaluation by cubic Hermite interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedMap {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl TabulatedMap {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 || values.len() != n || derivs.len() != n {
            return Err(Error::InvalidArgument("tabulated map needs matching tables of length >= 2".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("tabulated map must be strictly increasing".into()));
        }
        if derivs.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidArgument("tabulated map needs positive derivatives".into()));
        }
        Ok(TabulatedMap { nodes, values, derivs })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.values[0], *self.values.last().unwrap())
    }

    fn cell(&self, x: f64) -> usize {
        self.nodes.partition_point(|&s| s <= x).saturating_sub(1).min(self.nodes.len() - 2)
    }

    fn check(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        let tol = 1e-12 * (hi - lo);
        if x < lo - tol || x > hi + tol {
            return Err(Error::DomainMismatch(format!("{x} outside map domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let k = self.cell(x);
        let n = &self.nodes;
        Ok(hermite(n[k], n[k + 1], self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1], x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let k = self.cell(x);
        let n = &self.nodes;
        Ok(hermite_deriv(n[k], n[k + 1], self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1], x))
    }

    /// Inverse by a bracketing search over the value table, bisection on
    /// the Hermite cell, then Newton polish.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        let tol = 1e-12 * (hi - lo).abs().max(1.0);
        if u < lo - tol || u > hi + tol {
            return Err(Error::DomainMismatch(format!("{u} outside map range [{lo}, {hi}]")));
        }
        let u = u.clamp(lo, hi);
        let k = self.values.partition_point(|&v| v <= u).saturating_sub(1).min(self.values.len() - 2);
        let n = &self.nodes;
        let (a, b) = (n[k], n[k + 1]);
        let (va, vb, da, db) = (self.values[k], self.values[k + 1], self.derivs[k], self.derivs[k + 1]);
        if va == u {
            return Ok(a);
        }
        if vb == u {
            return Ok(b);
        }
        let f = |x: f64| hermite(a, b, va, vb, da, db, x) - u;
        let df = |x: f64| hermite_deriv(a, b, va, vb, da, db, x);
        bisect_newton(f, df, a, b, 1e-14 * (b - a).max(1e-300))
    }
}

/// `Φ(s, ·) = ψ ∘ v(s, ·)` for a fixed time `s`.
#[derive(Clone, Debug)]
pub struct CompositeMap {
    pub flow: Arc<FlowTable>,
    pub psi: Arc<TabulatedMap>,
    pub s: f64,
    lo: f64,
    hi: f64,
}

/// A strictly increasing scalar map with a numerical inverse.
#[derive(Clone, Debug)]
pub enum MonotoneMap {
    Table(Arc<TabulatedMap>),
    Composite(CompositeMap),
}

impl MonotoneMap {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            MonotoneMap::Table(t) => t.domain(),
            MonotoneMap::Composite(c) => (c.lo, c.hi),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            MonotoneMap::Table(t) => t.eval(x),
            MonotoneMap::Composite(c) => {
                c.check(x)?;
                c.psi.eval(c.flow.v(c.s, x))
            }
        }
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        match self {
            MonotoneMap::Table(t) => t.deriv(x),
            MonotoneMap::Composite(c) => {
                c.check(x)?;
                Ok(c.psi.deriv(c.flow.v(c.s, x))? * c.flow.dv(c.s, x))
            }
        }
    }

    /// For the composite map this is `v⁻¹(s, ψ⁻¹(u))`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        match self {
            MonotoneMap::Table(t) => t.inverse(u),
            MonotoneMap::Composite(c) => Ok(c.flow.v_inv(c.s, c.psi.inverse(u)?)),
        }
    }

    /// `(x, map(x), map'(x))` rows on `n` uniform points of the domain, as CSV.
    pub fn write_csv<W: Write>(&self, w: &mut W, n: usize) -> Result<()> {
        writeln!(w, "x,value,derivative")?;
        let (lo, hi) = self.domain();
        for i in 0..n {
            let x = if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            writeln!(w, "{},{},{}", x, self.eval(x)?, self.deriv(x)?)?;
        }
        Ok(())
    }
}

impl CompositeMap {
    fn check(&self, x: f64) -> Result<()> {
        let tol = 1e-12 * (self.hi - self.lo);
        if x < self.lo - tol || x > self.hi + tol {
            return Err(Error::DomainMismatch(format!("{x} outside [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Options of [`psi_from_k`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiOptions {
    /// Target number of table cells over the domain.
    pub cells: usize,
    /// Largest admissible `ψ'`.
    pub cap: f64,
}

impl Default for PsiOptions {
    fn default() -> Self {
        PsiOptions { cells: 2048, cap: 1e12 }
    }
}

/// Solve `ψ'' = 2kψ'`, `ψ(0) = 0`, `ψ'(0) = 1` on `[lo, hi]`:
/// `ψ'(u) = exp(2∫₀ᵘ k)` and `ψ = ∫₀ᵘ ψ'`, both by adaptive quadrature.
pub fn psi_from_k(k: &ScalarFn, lo: f64, hi: f64, opts: &PsiOptions) -> Result<TabulatedMap> {
    if !(lo < hi) || opts.cells < 2 {
        return Err(Error::InvalidArgument(format!("psi domain [{lo}, {hi}] is empty")));
    }
    let kf = |r: f64| k.eval(r);
    let tol = 1e-15;
    // Nodes: uniform pieces on each side of zero so that ψ(0) = 0 is a node.
    let mut nodes = Vec::new();
    let h = (hi - lo) / opts.cells as f64;
    if lo < 0.0 && hi > 0.0 {
        let nl = ((-lo) / h).ceil().max(1.0) as usize;
        let nr = (hi / h).ceil().max(1.0) as usize;
        for i in 0..nl {
            nodes.push(lo + (-lo) * i as f64 / nl as f64);
        }
        for i in 0..=nr {
            nodes.push(if i == nr { hi } else { hi * i as f64 / nr as f64 });
        }
    } else {
        for i in 0..=opts.cells {
            nodes.push(if i == opts.cells { hi } else { lo + h * i as f64 });
        }
    }
    let n = nodes.len();
    let start = nodes.iter().position(|&x| x == 0.0);
    let mut kint = vec![0.0; n];
    let mut values = vec![0.0; n];
    // Anchor: the node nearest to zero, integrated from zero directly.
    let anchor = start.unwrap_or_else(|| if lo >= 0.0 { 0 } else { n - 1 });
    if start.is_none() {
        let a = nodes[anchor];
        kint[anchor] = integrate(&kf, 0.0, a, tol);
        let dpsi = |s: f64| (2.0 * integrate(&kf, 0.0, s, tol)).exp();
        values[anchor] = integrate(&dpsi, 0.0, a, 1e-14);
    }
    let step = |from: usize, to: usize, kint: &mut Vec<f64>, values: &mut Vec<f64>| {
        let (a, b) = (nodes[from], nodes[to]);
        let k0 = kint[from];
        let dpsi = |s: f64| (2.0 * (k0 + integrate(&kf, a, s, tol))).exp();
        kint[to] = k0 + integrate(&kf, a, b, tol);
        values[to] = values[from] + integrate(&dpsi, a, b, 1e-15 * dpsi(a).max(1.0));
    };
    for i in anchor..n - 1 {
        step(i, i + 1, &mut kint, &mut values);
    }
    for i in (1..=anchor).rev() {
        step(i, i - 1, &mut kint, &mut values);
    }
    let mut derivs = Vec::with_capacity(n);
    for (x, ki) in nodes.iter().zip(&kint) {
        let d = (2.0 * ki).exp();
        if !(d <= opts.cap) {
            return Err(Error::OverflowGuard { u: *x, cap: opts.cap });
        }
        derivs.push(d);
    }
    TabulatedMap::new(nodes, values, derivs)
}

/// Default ψ domain `±(‖φ‖∞·M1 + 1)`.
pub fn default_psi_domain(sup_phi: f64, big_m1: f64) -> (f64, f64) {
    let w = sup_phi * big_m1 + 1.0;
    (-w, w)
}

/// `Φ(s, ·) = ψ(v(s, ·))` on the largest part of the flow's `y` range that
/// `v(s, ·)` maps into ψ's domain.
pub fn phi_map(flow: Arc<FlowTable>, psi: Arc<TabulatedMap>, s: f64) -> Result<MonotoneMap> {
    let (plo, phi_hi) = psi.domain();
    let r = flow.y_range();
    let lo = r.lo.max(flow.v_inv(s, plo));
    let hi = r.hi.min(flow.v_inv(s, phi_hi));
    if !(lo < hi) {
        return Err(Error::DomainMismatch(format!(
            "v({s}, ·) maps no part of [{}, {}] into the psi domain [{plo}, {phi_hi}]",
            r.lo, r.hi
        )));
    }
    Ok(MonotoneMap::Composite(CompositeMap { flow, psi, s, lo, hi }))
}
