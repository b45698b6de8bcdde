//! Serializable descriptors for the scalar functions that parameterize
//! generators, drifts and payoffs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Shared closure used by the `Custom` variants; not serializable.
pub struct Callable<T: ?Sized>(pub Arc<T>);

impl<T: ?Sized> Clone for Callable<T> {
    fn clone(&self) -> Self {
        Callable(Arc::clone(&self.0))
    }
}

impl<T: ?Sized> fmt::Debug for Callable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<closure>")
    }
}

pub type Fn1 = dyn Fn(f64) -> f64 + Send + Sync;

const FD_STEP: f64 = 1e-4;

fn fd1(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

fn fd2(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - 2.0 * f(x) + f(x - FD_STEP)) / (FD_STEP * FD_STEP)
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

/// A scalar function of one real variable, with derivatives.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFn {
    Const { c: f64 },
    /// `a·x + b`
    Linear { a: f64, b: f64 },
    /// `a + b·tanh(x)`
    TanhAffine { a: f64, b: f64 },
    #[serde(skip)]
    Custom(Callable<Fn1>),
}

impl ScalarFn {
    pub fn tanh() -> Self {
        ScalarFn::TanhAffine { a: 0.0, b: 1.0 }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarFn::Custom(Callable(Arc::new(f)))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Const { c } => *c,
            ScalarFn::Linear { a, b } => a * x + b,
            ScalarFn::TanhAffine { a, b } => a + b * x.tanh(),
            ScalarFn::Custom(f) => (f.0)(x),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Const { .. } => 0.0,
            ScalarFn::Linear { a, .. } => *a,
            ScalarFn::TanhAffine { b, .. } => b * sech2(x),
            ScalarFn::Custom(f) => fd1(&*f.0, x),
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Const { .. } | ScalarFn::Linear { .. } => 0.0,
            ScalarFn::TanhAffine { b, .. } => -2.0 * b * x.tanh() * sech2(x),
            ScalarFn::Custom(f) => fd2(&*f.0, x),
        }
    }

    /// Whether the function is constant (used by audits and closed forms).
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            ScalarFn::Const { c } => Some(*c),
            ScalarFn::Linear { a, b } if *a == 0.0 => Some(*b),
            ScalarFn::TanhAffine { a, b } if *b == 0.0 => Some(*a),
            _ => None,
        }
    }
}

/// A function of time.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFn {
    Const { c: f64 },
    /// `value` on `[start, end)`, zero elsewhere.
    Indicator { start: f64, end: f64, #[serde(default = "one")] value: f64 },
    /// `c·exp(a·t)`
    Exp { c: f64, a: f64 },
    /// `amplitude·sin(π t / horizon)`
    SinBump { amplitude: f64, horizon: f64 },
    /// `amplitude·t·(horizon − t)`
    Parabola { amplitude: f64, horizon: f64 },
    /// `+1` on `[start, mid)`, `−1` on `[mid, end)`.
    SignedPulse { start: f64, mid: f64, end: f64 },
    #[serde(skip)]
    Custom(Callable<Fn1>),
}

fn one() -> f64 {
    1.0
}

impl TimeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Const { c } => *c,
            TimeFn::Indicator { start, end, value } => {
                if t >= *start && t < *end {
                    *value
                } else {
                    0.0
                }
            }
            TimeFn::Exp { c, a } => c * (a * t).exp(),
            TimeFn::SinBump { amplitude, horizon } => {
                amplitude * (std::f64::consts::PI * t / horizon).sin()
            }
            TimeFn::Parabola { amplitude, horizon } => amplitude * t * (horizon - t),
            TimeFn::SignedPulse { start, mid, end } => {
                if t >= *start && t < *mid {
                    1.0
                } else if t >= *mid && t < *end {
                    -1.0
                } else {
                    0.0
                }
            }
            TimeFn::Custom(f) => (f.0)(t),
        }
    }

    /// Time derivative; zero away from jumps for the piecewise-constant kinds.
    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            TimeFn::Const { .. } | TimeFn::Indicator { .. } | TimeFn::SignedPulse { .. } => 0.0,
            TimeFn::Exp { c, a } => c * a * (a * t).exp(),
            TimeFn::SinBump { amplitude, horizon } => {
                let w = std::f64::consts::PI / horizon;
                amplitude * w * (w * t).cos()
            }
            TimeFn::Parabola { amplitude, horizon } => amplitude * (horizon - 2.0 * t),
            TimeFn::Custom(f) => fd1(&*f.0, t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeFn::Const { .. }) || matches!(self, TimeFn::Exp { a, .. } if *a == 0.0)
    }
}

/// Bounded terminal payoff `x ↦ φ(x)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffFn {
    Const { c: f64 },
    /// `amplitude·tanh(scale·x + shift)`
    Tanh {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `amplitude·sin(freq·x + phase)`
    Sin { amplitude: f64, freq: f64, #[serde(default)] phase: f64 },
    /// `slope·x + intercept`; only accepted where the sup check passes.
    Linear { slope: f64, #[serde(default)] intercept: f64 },
    /// `c·1{x ≥ threshold}` (or `c·1{x < threshold}` when `upper` is false).
    Indicator { c: f64, #[serde(default)] threshold: f64, upper: bool },
    /// `offset + scale·base(x)`
    Affine { offset: f64, scale: f64, base: Box<PayoffFn> },
    /// `base(−x)`
    Reflected { base: Box<PayoffFn> },
    #[serde(skip)]
    Custom(Callable<Fn1>),
}

impl PayoffFn {
    pub fn tanh() -> Self {
        PayoffFn::Tanh { amplitude: 1.0, scale: 1.0, shift: 0.0 }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        PayoffFn::Custom(Callable(Arc::new(f)))
    }

    pub fn affine(offset: f64, scale: f64, base: PayoffFn) -> Self {
        PayoffFn::Affine { offset, scale, base: Box::new(base) }
    }

    pub fn reflected(base: PayoffFn) -> Self {
        PayoffFn::Reflected { base: Box::new(base) }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PayoffFn::Const { c } => *c,
            PayoffFn::Tanh { amplitude, scale, shift } => amplitude * (scale * x + shift).tanh(),
            PayoffFn::Sin { amplitude, freq, phase } => amplitude * (freq * x + phase).sin(),
            PayoffFn::Linear { slope, intercept } => slope * x + intercept,
            PayoffFn::Indicator { c, threshold, upper } => {
                if (x >= *threshold) == *upper {
                    *c
                } else {
                    0.0
                }
            }
            PayoffFn::Affine { offset, scale, base } => offset + scale * base.eval(x),
            PayoffFn::Reflected { base } => base.eval(-x),
            PayoffFn::Custom(f) => (f.0)(x),
        }
    }

    /// `φ′(x)`; zero away from the jump for indicators, central differences
    /// for closures.
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            PayoffFn::Const { .. } | PayoffFn::Indicator { .. } => 0.0,
            PayoffFn::Tanh { amplitude, scale, shift } => {
                let c = (scale * x + shift).cosh();
                amplitude * scale / (c * c)
            }
            PayoffFn::Sin { amplitude, freq, phase } => amplitude * freq * (freq * x + phase).cos(),
            PayoffFn::Linear { slope, .. } => *slope,
            PayoffFn::Affine { scale, base, .. } => scale * base.deriv(x),
            PayoffFn::Reflected { base } => -base.deriv(-x),
            PayoffFn::Custom(f) => {
                let h = 1e-6;
                ((f.0)(x + h) - (f.0)(x - h)) / (2.0 * h)
            }
        }
    }

    /// Average of φ over the cell `[x − dx/2, x + dx/2]` for discontinuous
    /// payoffs; smooth payoffs return the point value.
    pub fn cell_average(&self, x: f64, dx: f64) -> f64 {
        match self {
            PayoffFn::Indicator { c, threshold, upper } => {
                let lo = x - 0.5 * dx;
                let hi = x + 0.5 * dx;
                let above = if *threshold <= lo {
                    1.0
                } else if *threshold >= hi {
                    0.0
                } else {
                    (hi - threshold) / dx
                };
                let frac = if *upper { above } else { 1.0 - above };
                c * frac
            }
            PayoffFn::Affine { offset, scale, base } => offset + scale * base.cell_average(x, dx),
            PayoffFn::Reflected { base } => base.cell_average(-x, dx),
            _ => self.eval(x),
        }
    }

    /// True when φ has jumps (drives cell averaging and smoothing steps).
    pub fn is_discontinuous(&self) -> bool {
        match self {
            PayoffFn::Indicator { .. } => true,
            PayoffFn::Affine { base, .. } | PayoffFn::Reflected { base } => base.is_discontinuous(),
            _ => false,
        }
    }

    /// Known sup-norm bound when available in closed form.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            PayoffFn::Const { c } => Some(c.abs()),
            PayoffFn::Tanh { amplitude, .. } => Some(amplitude.abs()),
            PayoffFn::Sin { amplitude, .. } => Some(amplitude.abs()),
            PayoffFn::Indicator { c, .. } => Some(c.abs()),
            PayoffFn::Affine { offset, scale, base } => {
                base.sup_bound().map(|b| offset.abs() + scale.abs() * b)
            }
            PayoffFn::Reflected { base } => base.sup_bound(),
            PayoffFn::Linear { slope, intercept } if *slope == 0.0 => Some(intercept.abs()),
            _ => None,
        }
    }

    /// Sup-norm over a sampled interval, using the closed-form bound when known.
    pub fn sampled_sup(&self, lo: f64, hi: f64, n: usize) -> f64 {
        if let Some(b) = self.sup_bound() {
            return b;
        }
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64)
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }
}
