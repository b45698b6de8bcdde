//! Catalog of BSDE drivers `g(t, ω, y, z)` in one dimension, JSON
//! descriptors for them, and a sampled audit of the standing assumptions.

mod audit;
mod drift_process;
mod spec;

use std::sync::Arc;

pub use audit::{audit_assumptions, AuditGrid, AuditReport};
pub use drift_process::{DriftIntegral, DriftProcessSpec};
pub use spec::{FieldSpec, FlowGridSpec, GeneratorSpec};

use crate::error::{Error, Result};
use crate::functions::{Callable, ScalarFn, TimeFn};
use crate::pde_solver::Driver;
use crate::stochastic::PathRef;
use crate::transforms::{DriftFunction, Field, ScalarField};

pub type Fn3 = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// A generator with evaluators for `g`, `∂_y g` and `∂_z g`.
#[derive(Clone, Debug)]
pub enum Generator {
    /// `k(y)|z|²`
    PureQuadratic { k: ScalarFn },
    /// `h(t, y) + f(t, y)|z|²`
    DriftQuadratic { h: DriftFunction, f: Field },
    /// `β|z|²`
    Entropic { beta: f64 },
    /// `k(t)|z|²`
    TimeVaryingQuadratic { k: TimeFn },
    /// `h_t(ω) + β|z|²`
    RandomDriftQuadratic { drift: DriftProcessSpec, beta: f64 },
    /// `a_t + ½|b_t|² + b_t z + ½|z|²` with `(a, b)` from [`ito_wentzell_coeffs`].
    ItoWentzell { r: TimeFn, psi_b: ScalarFn, horizon: f64 },
    /// Deterministic closure, used for negative controls.
    Custom { name: String, g: Callable<Fn3> },
}

/// `(g, ∂_y g, ∂_z g)` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenPoint {
    pub g: f64,
    pub gy: f64,
    pub gz: f64,
}

const FD: f64 = 1e-6;

impl Generator {
    /// `g ≡ 0`
    pub fn zero() -> Self {
        Generator::PureQuadratic { k: ScalarFn::Const { c: 0.0 } }
    }

    pub fn custom<F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static>(name: &str, g: F) -> Self {
        Generator::Custom { name: name.to_string(), g: Callable(Arc::new(g)) }
    }

    pub fn name(&self) -> &str {
        match self {
            Generator::PureQuadratic { .. } => "pure_quadratic",
            Generator::DriftQuadratic { .. } => "drift_quadratic",
            Generator::Entropic { .. } => "entropic",
            Generator::TimeVaryingQuadratic { .. } => "time_varying_quadratic",
            Generator::RandomDriftQuadratic { .. } => "random_drift_quadratic",
            Generator::ItoWentzell { .. } => "ito_wentzell",
            Generator::Custom { name, .. } => name,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Generator::RandomDriftQuadratic { .. } | Generator::ItoWentzell { .. })
    }

    fn deterministic_point(&self, t: f64, y: f64, z: f64) -> GenPoint {
        let z2 = z * z;
        match self {
            Generator::PureQuadratic { k } => GenPoint { g: k.eval(y) * z2, gy: k.d1(y) * z2, gz: 2.0 * k.eval(y) * z },
            Generator::DriftQuadratic { h, f } => {
                let [hv, hy, _, _] = h.derivs(t, y);
                let fv = f.value(t, y);
                GenPoint { g: hv + fv * z2, gy: hy + f.dy(t, y) * z2, gz: 2.0 * fv * z }
            }
            Generator::Entropic { beta } => GenPoint { g: beta * z2, gy: 0.0, gz: 2.0 * beta * z },
            Generator::TimeVaryingQuadratic { k } => {
                let kt = k.eval(t);
                GenPoint { g: kt * z2, gy: 0.0, gz: 2.0 * kt * z }
            }
            Generator::Custom { g, .. } => {
                let f = &g.0;
                GenPoint {
                    g: f(t, y, z),
                    gy: (f(t, y + FD, z) - f(t, y - FD, z)) / (2.0 * FD),
                    gz: (f(t, y, z + FD) - f(t, y, z - FD)) / (2.0 * FD),
                }
            }
            Generator::RandomDriftQuadratic { .. } | Generator::ItoWentzell { .. } => unreachable!(),
        }
    }

    fn mismatch(&self, wanted: &str) -> Error {
        Error::VariantMismatch(format!("{} generator does not support {wanted} evaluation", self.name()))
    }

    /// `(g, ∂_y g, ∂_z g)` of a deterministic generator.
    pub fn point(&self, t: f64, y: f64, z: f64) -> Result<GenPoint> {
        if !self.is_deterministic() {
            return Err(self.mismatch("deterministic"));
        }
        Ok(self.deterministic_point(t, y, z))
    }

    pub fn eval(&self, t: f64, y: f64, z: f64) -> Result<f64> {
        Ok(self.point(t, y, z)?.g)
    }

    pub fn dy(&self, t: f64, y: f64, z: f64) -> Result<f64> {
        Ok(self.point(t, y, z)?.gy)
    }

    pub fn dz(&self, t: f64, y: f64, z: f64) -> Result<f64> {
        Ok(self.point(t, y, z)?.gz)
    }

    /// `(g, ∂_y g, ∂_z g)` of a random generator on a realized path.
    pub fn point_pathwise(&self, path: PathRef<'_>, t: f64, _y: f64, z: f64) -> Result<GenPoint> {
        let z2 = z * z;
        match self {
            Generator::RandomDriftQuadratic { drift, beta } => {
                Ok(GenPoint { g: drift.value(path, t)? + beta * z2, gy: 0.0, gz: 2.0 * beta * z })
            }
            Generator::ItoWentzell { r, psi_b, horizon } => {
                let c = ito_wentzell_coeffs(r, psi_b, path, t, *horizon)?;
                let b = c.b[0];
                let b2: f64 = c.b.iter().map(|x| x * x).sum();
                Ok(GenPoint { g: c.a + 0.5 * b2 + b * z + 0.5 * z2, gy: 0.0, gz: b + z })
            }
            _ => Err(self.mismatch("pathwise")),
        }
    }

    pub fn eval_pathwise(&self, path: PathRef<'_>, t: f64, y: f64, z: f64) -> Result<f64> {
        Ok(self.point_pathwise(path, t, y, z)?.g)
    }

    /// A [`Driver`] view for the PDE engine; fails for random variants.
    pub fn driver(&self) -> Result<DeterministicDriver<'_>> {
        if !self.is_deterministic() {
            return Err(self.mismatch("PDE"));
        }
        Ok(DeterministicDriver(self))
    }

    /// `h(t, y) = g(t, y, 0)` for the drift-quadratic variant.
    pub fn drift(&self) -> Option<&DriftFunction> {
        match self {
            Generator::DriftQuadratic { h, .. } => Some(h),
            _ => None,
        }
    }
}

/// Borrowed deterministic generator usable as a PDE driver.
#[derive(Clone, Copy, Debug)]
pub struct DeterministicDriver<'a>(&'a Generator);

impl Driver for DeterministicDriver<'_> {
    fn g(&self, t: f64, y: f64, z: f64) -> f64 {
        self.0.deterministic_point(t, y, z).g
    }
}

/// Coefficients `a_t` and `b_t` of the Itô–Wentzell construction.
#[derive(Clone, Debug, PartialEq)]
pub struct IwCoeffs {
    pub a: f64,
    /// `r(t)ψ′(W¹_t)·e₁`
    pub b: Vec<f64>,
}

/// `r(0) = r(T) = 0` to 1e-12.
pub fn check_endpoints(r: &TimeFn, horizon: f64) -> Result<()> {
    let (r0, rt) = (r.eval(0.0), r.eval(horizon));
    if r0.abs() > 1e-12 || rt.abs() > 1e-12 {
        return Err(Error::EndpointViolation { r0, rt });
    }
    Ok(())
}

/// `a_t = r′(t)ψ(W¹_t) + ½r(t)ψ″(W¹_t)`, `b_t = r(t)ψ′(W¹_t)e₁`, with `W¹`
/// read at the grid node of the step containing `t`.
pub fn ito_wentzell_coeffs(r: &TimeFn, psi_b: &ScalarFn, path: PathRef<'_>, t: f64, horizon: f64) -> Result<IwCoeffs> {
    check_endpoints(r, horizon)?;
    let i = match path.grid.index_of(t) {
        Some(i) => i,
        None => path.grid.step_index(t),
    };
    let w = path.w1(i);
    Ok(iw_coeffs_at(r, psi_b, t, w, path.d))
}

pub(crate) fn iw_coeffs_at(r: &TimeFn, psi_b: &ScalarFn, t: f64, w: f64, d: usize) -> IwCoeffs {
    let rt = r.eval(t);
    let a = r.deriv(t) * psi_b.eval(w) + 0.5 * rt * psi_b.d2(w);
    let mut b = vec![0.0; d.max(1)];
    b[0] = rt * psi_b.d1(w);
    IwCoeffs { a, b }
}
