//! Dynamic risk measures on Markov payoffs: entropic, shortfall and
//! time-dependent certainty equivalent, with time-consistency gaps and a
//! sampled axiom audit.

mod audit;
mod law;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use audit::{axioms_audit, AxiomResult, AxiomSamples, AxiomsReport};
pub use law::{CondLaw, MarkovPayoff, PayoffStructure, GH_NODES};
pub use law::gh_rule;

use crate::error::{invalid, Error, Result};
use crate::functions::ScalarFn;
use crate::generators::FlowGridSpec;
use crate::numerics::{bisect_newton, lagrange4};
use crate::stochastic::TimeGrid;
use crate::transforms::{default_psi_domain, psi_from_k, solve_characteristics, DriftFunction, FlowTable, MonotoneMap, PsiOptions, YRange};

/// Largest admissible `γ‖X‖∞` for exponential moments.
pub const EXP_CAP: f64 = 700.0;

/// Convex increasing loss with `l(0) = 0` and `inf l < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossFunction {
    Linear,
    /// `e^{2βx} − 1`
    Exponential { beta: f64 },
    /// `e^x − 1` for `x ≥ 0`, `x` below.
    PiecewiseConvex,
}

impl LossFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LossFunction::Linear => x,
            LossFunction::Exponential { beta } => (2.0 * beta * x).exp_m1(),
            LossFunction::PiecewiseConvex => {
                if x >= 0.0 {
                    x.exp_m1()
                } else {
                    x
                }
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            LossFunction::Linear => 1.0,
            LossFunction::Exponential { beta } => 2.0 * beta * (2.0 * beta * x).exp(),
            LossFunction::PiecewiseConvex => {
                if x >= 0.0 {
                    x.exp()
                } else {
                    1.0
                }
            }
        }
    }

    /// Whether Gauss–Hermite is accurate for `E[l(X − m)]`.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, LossFunction::PiecewiseConvex)
    }

    pub fn validate(&self) -> Result<()> {
        if let LossFunction::Exponential { beta } = self {
            if !(*beta > 0.0) {
                return invalid("exponential loss needs beta > 0");
            }
        }
        Ok(())
    }

    /// Sampled check of the loss axioms on `[−r, r]`.
    pub fn check_axioms(&self, r: f64, n: usize) -> bool {
        let xs: Vec<f64> = (0..n).map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64).collect();
        let inc = xs.iter().all(|&x| self.deriv(x) >= 0.0);
        let convex = xs.windows(3).all(|w| self.eval(w[0]) + self.eval(w[2]) - 2.0 * self.eval(w[1]) >= -1e-12);
        let inf_neg = xs.iter().any(|&x| self.eval(x) < 0.0);
        inc && convex && inf_neg && self.eval(0.0) == 0.0
    }
}

/// A dynamic risk measure `ρ_{t,T}`.
#[derive(Clone, Debug)]
pub enum RiskMeasure {
    Entropic { gamma: f64 },
    /// `Φ⁻¹(t, E[Φ(T, X) | F_t])` with `Φ(s, ·) = ψ ∘ v(s, ·)`.
    CertaintyEquivalent { flow: Arc<FlowTable>, psi: MonotoneMap },
    Shortfall { loss: LossFunction },
}

impl RiskMeasure {
    pub fn name(&self) -> &'static str {
        match self {
            RiskMeasure::Entropic { .. } => "entropic",
            RiskMeasure::CertaintyEquivalent { .. } => "certainty_equivalent",
            RiskMeasure::Shortfall { .. } => "shortfall",
        }
    }

    fn kinked(&self) -> bool {
        matches!(self, RiskMeasure::Shortfall { loss } if !loss.is_smooth())
    }

    /// `ρ_{t,T}` of a payoff with conditional law `law`.
    pub fn rho_law(&self, law: &CondLaw<'_>, t: f64, t_end: f64) -> Result<f64> {
        match self {
            RiskMeasure::Entropic { gamma } => entropic_law(law, *gamma),
            RiskMeasure::Shortfall { loss } => shortfall_law(law, loss),
            RiskMeasure::CertaintyEquivalent { flow, psi } => ce_law(law, flow, psi, t, t_end),
        }
    }

    /// `ρ_{t,T}(X)` on `{W_t = x}`.
    pub fn evaluate(&self, x: &MarkovPayoff, t: f64, state: f64) -> Result<f64> {
        x.validate()?;
        self.rho_law(&x.conditional_law(t, state)?, t, x.horizon)
    }
}

fn entropic_law(law: &CondLaw<'_>, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return invalid("entropic risk needs gamma > 0");
    }
    let (lo, hi) = law.bounds();
    let sup = lo.abs().max(hi.abs());
    if gamma * sup > EXP_CAP {
        return Err(Error::OverflowGuard { u: gamma * sup, cap: EXP_CAP });
    }
    let m = hi;
    // Normalising by the total weight keeps constants exact for small gamma.
    let s = law.expect_smooth(|v| (gamma * (v - m)).exp()) / law.expect_smooth(|_| 1.0);
    Ok(m + s.ln() / gamma)
}

fn shortfall_law(law: &CondLaw<'_>, loss: &LossFunction) -> Result<f64> {
    loss.validate()?;
    let kinked = !loss.is_smooth();
    let expect = |u: &dyn Fn(f64) -> f64| if kinked { law.expect_kinked(u) } else { law.expect_smooth(u) };
    let (lo, hi) = law.bounds();
    let (a, b) = (lo - 1.0, hi + 1.0);
    let f = |m: f64| expect(&|v| loss.eval(v - m));
    let df = |m: f64| -expect(&|v| loss.deriv(v - m));
    // The root is unique only if m ↦ E[l(X − m)] is strictly decreasing.
    let n = 9;
    let samples: Vec<f64> = (0..n).map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64)).collect();
    if samples.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::BracketFailure { lo: a, hi: b, f_lo: samples[0], f_hi: samples[n - 1] });
    }
    bisect_newton(f, df, a, b, 1e-10)
}

fn ce_law(law: &CondLaw<'_>, flow: &FlowTable, psi: &MonotoneMap, t: f64, t_end: f64) -> Result<f64> {
    let (values, weights) = law.atoms();
    let mut acc = 0.0;
    for (v, w) in values.iter().zip(&weights) {
        if *w == 0.0 {
            continue;
        }
        acc += w * psi.eval(flow.v(t_end, *v))?;
    }
    Ok(flow.v_inv(t, psi.inverse(acc)?))
}

/// `(1/γ) log E[exp(γX) | W_t = x]`.
pub fn entropic_rho(x: &MarkovPayoff, gamma: f64, t: f64, state: f64) -> Result<f64> {
    RiskMeasure::Entropic { gamma }.evaluate(x, t, state)
}

/// The root `m` of `E[l(X − m) | W_t = x] = 0`.
pub fn shortfall_rho(x: &MarkovPayoff, loss: &LossFunction, t: f64, state: f64) -> Result<f64> {
    RiskMeasure::Shortfall { loss: *loss }.evaluate(x, t, state)
}

/// `Φ⁻¹(t, E[Φ(T, X) | W_t = x])`.
pub fn ce_rho(x: &MarkovPayoff, flow: Arc<FlowTable>, psi: MonotoneMap, t: f64, state: f64) -> Result<f64> {
    RiskMeasure::CertaintyEquivalent { flow, psi }.evaluate(x, t, state)
}

/// Both sides of the time-consistency identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TcGap {
    pub nested: f64,
    pub flat: f64,
    pub gap: f64,
}

/// `|ρ_{0,s}(ρ_{s,T}(X)) − ρ_{0,T}(X)|` with the inner value a function of
/// `W_s` on a quadrature grid.
pub fn tc_gap(rm: &RiskMeasure, x: &MarkovPayoff, s: f64) -> Result<TcGap> {
    x.validate()?;
    if !(s > 0.0 && s < x.horizon) {
        return invalid("tc_gap needs 0 < s < T");
    }
    let flat = rm.evaluate(x, 0.0, 0.0)?;
    let sd = s.sqrt();
    let inner = |w: f64| rm.rho_law(&x.conditional_law(s, w)?, s, x.horizon);
    let nested = if rm.kinked() {
        // The outer integrand has kinks too: tabulate the inner value on a
        // dense grid and integrate adaptively.
        let n = 801;
        let half = 10.0 * sd;
        let dw = 2.0 * half / (n - 1) as f64;
        let table: Vec<f64> = (0..n).into_par_iter().map(|i| inner(-half + i as f64 * dw)).collect::<Result<_>>()?;
        let outer = CondLaw::gaussian(move |w| lagrange4(&table, -half, dw, w), 0.0, sd);
        rm.rho_law(&outer, 0.0, s)?
    } else {
        let rule = law::gh_rule();
        let values: Vec<f64> = rule.nodes.par_iter().map(|z| inner(sd * z)).collect::<Result<_>>()?;
        rm.rho_law(&CondLaw::Atoms { values, weights: rule.weights.clone() }, 0.0, s)?
    };
    Ok(TcGap { nested, flat, gap: (nested - flat).abs() })
}

/// Descriptor of a risk measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RiskMeasureSpec {
    Entropic { gamma: f64 },
    Shortfall { loss: LossFunction },
    CertaintyEquivalent {
        h: DriftFunction,
        k: ScalarFn,
        #[serde(default)]
        grid: FlowGridSpec,
        #[serde(default)]
        psi: PsiOptions,
    },
}

impl RiskMeasureSpec {
    /// Build the measure for payoffs with horizon `T` and sup-norm `sup_x`.
    pub fn resolve(&self, horizon: f64, sup_x: f64) -> Result<RiskMeasure> {
        Ok(match self {
            RiskMeasureSpec::Entropic { gamma } => RiskMeasure::Entropic { gamma: *gamma },
            RiskMeasureSpec::Shortfall { loss } => {
                loss.validate()?;
                RiskMeasure::Shortfall { loss: *loss }
            }
            RiskMeasureSpec::CertaintyEquivalent { h, k, grid, psi } => {
                let (flow, psi) = certainty_equivalent_maps(h, k, horizon, sup_x, grid, psi)?;
                RiskMeasure::CertaintyEquivalent { flow, psi }
            }
        })
    }
}

/// Flow table of `h` and `ψ` of `k` on the default domain for payoffs
/// bounded by `sup_x`.
pub fn certainty_equivalent_maps(
    h: &DriftFunction,
    k: &ScalarFn,
    horizon: f64,
    sup_x: f64,
    grid: &FlowGridSpec,
    opts: &PsiOptions,
) -> Result<(Arc<FlowTable>, MonotoneMap)> {
    let tg = TimeGrid::uniform(0.0, horizon, grid.n_steps)?;
    let flow = solve_characteristics(h, &tg, &YRange::new(grid.y_lo, grid.y_hi, grid.n_y)?)?;
    let shift = flow.v(horizon, 0.0).abs();
    let (lo, hi) = default_psi_domain(sup_x, flow.big_m1());
    let psi = psi_from_k(k, lo - shift, hi + shift, opts)?;
    Ok((Arc::new(flow), MonotoneMap::Table(Arc::new(psi))))
}
