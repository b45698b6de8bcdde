use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::functions::PayoffFn;
use crate::numerics::{integrate, norm_cdf};
use crate::stochastic::{gauss_hermite, PathRef, QuadratureRule};

/// Gauss–Hermite nodes used for smooth conditional expectations.
pub const GH_NODES: usize = 100;
/// Standard-normal truncation for adaptive expectations.
const Z_MAX: f64 = 10.0;

/// Shared Gauss–Hermite rule with [`GH_NODES`] nodes.
pub fn gh_rule() -> Arc<QuadratureRule> {
    static RULE: OnceLock<Arc<QuadratureRule>> = OnceLock::new();
    RULE.get_or_init(|| Arc::new(gauss_hermite(GH_NODES).expect("valid node count"))).clone()
}

/// Bounded payoff `X` built from a Brownian path through `φ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovPayoff {
    pub phi: PayoffFn,
    pub horizon: f64,
    #[serde(default)]
    pub structure: PayoffStructure,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffStructure {
    /// `φ(W_T)`
    #[default]
    Terminal,
    /// `φ(W_{t1})`
    Early { t1: f64 },
    /// `φ(W_{t2} − W_{t1})`
    Increment { t1: f64, t2: f64 },
    /// `c·1{W_{t_obs} ≥ 0}` (or `< 0` when `upper` is false); `φ` is unused.
    IndicatorOfBranch { c: f64, t_obs: f64, upper: bool },
}

/// Conditional law of a payoff given `W_t = x`.
pub enum CondLaw<'a> {
    Point(f64),
    /// `f(mean + sd·Z)`
    Gaussian { f: Box<dyn Fn(f64) -> f64 + Sync + 'a>, mean: f64, sd: f64 },
    Atoms { values: Vec<f64>, weights: Vec<f64> },
}

impl MarkovPayoff {
    pub fn terminal(phi: PayoffFn, horizon: f64) -> Self {
        MarkovPayoff { phi, horizon, structure: PayoffStructure::Terminal }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon;
        if !(t > 0.0) {
            return invalid("payoff horizon must be positive");
        }
        let ok = match self.structure {
            PayoffStructure::Terminal => true,
            PayoffStructure::Early { t1 } => t1 > 0.0 && t1 <= t,
            PayoffStructure::Increment { t1, t2 } => t1 >= 0.0 && t1 < t2 && t2 <= t,
            PayoffStructure::IndicatorOfBranch { t_obs, .. } => t_obs > 0.0 && t_obs <= t,
        };
        if !ok {
            return invalid(format!("payoff observation times are inconsistent: {:?}", self.structure));
        }
        if !matches!(self.structure, PayoffStructure::IndicatorOfBranch { .. }) && self.phi.sampled_sup(-50.0, 50.0, 2001) > 1e6 {
            return invalid("payoff is not bounded on the sampled range");
        }
        Ok(())
    }

    /// Value of the payoff on a simulated path; observation times must be
    /// nodes of the path grid.
    pub fn eval_path(&self, path: PathRef<'_>) -> Result<f64> {
        Ok(match self.structure {
            PayoffStructure::Terminal => self.phi.eval(path.w1_at_time(self.horizon)?),
            PayoffStructure::Early { t1 } => self.phi.eval(path.w1_at_time(t1)?),
            PayoffStructure::Increment { t1, t2 } => self.phi.eval(path.w1_at_time(t2)? - path.w1_at_time(t1)?),
            PayoffStructure::IndicatorOfBranch { c, t_obs, upper } => {
                if (path.w1_at_time(t_obs)? >= 0.0) == upper {
                    c
                } else {
                    0.0
                }
            }
        })
    }

    /// Last time at which the payoff is observed.
    pub fn observation_time(&self) -> f64 {
        match self.structure {
            PayoffStructure::Terminal => self.horizon,
            PayoffStructure::Early { t1 } => t1,
            PayoffStructure::Increment { t2, .. } => t2,
            PayoffStructure::IndicatorOfBranch { t_obs, .. } => t_obs,
        }
    }

    /// Law of `X` given `W_t = x`. Only times where `W_t` is a sufficient
    /// statistic are accepted.
    pub fn conditional_law(&self, t: f64, x: f64) -> Result<CondLaw<'_>> {
        let obs = self.observation_time();
        let tol = 1e-12;
        if t > obs + tol {
            // Known at t but not a function of W_t alone.
            return invalid(format!("payoff observed at {obs} is not a function of W_{t}"));
        }
        let gaussian = |mean: f64, var: f64| -> CondLaw<'_> {
            if var <= tol {
                CondLaw::Point(self.phi.eval(mean))
            } else if let PayoffFn::Indicator { c, threshold, upper } = self.phi {
                // Two-point law; quadrature on a jump would be inaccurate.
                let p_up = 1.0 - norm_cdf((threshold - mean) / var.sqrt());
                let p = if upper { p_up } else { 1.0 - p_up };
                CondLaw::Atoms { values: vec![c, 0.0], weights: vec![p, 1.0 - p] }
            } else {
                CondLaw::Gaussian { f: Box::new(move |w| self.phi.eval(w)), mean, sd: var.sqrt() }
            }
        };
        Ok(match self.structure {
            PayoffStructure::Terminal => gaussian(x, self.horizon - t),
            PayoffStructure::Early { t1 } => gaussian(x, t1 - t),
            PayoffStructure::Increment { t1, t2 } => {
                if t > t1 + tol {
                    return invalid(format!("increment payoff needs W_{t1}, not only W_{t}"));
                }
                gaussian(0.0, t2 - t1)
            }
            PayoffStructure::IndicatorOfBranch { c, t_obs, upper } => {
                let var = t_obs - t;
                let p_up = if var <= tol {
                    if x >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    norm_cdf(x / var.sqrt())
                };
                let p = if upper { p_up } else { 1.0 - p_up };
                CondLaw::Atoms { values: vec![c, 0.0], weights: vec![p, 1.0 - p] }
            }
        })
    }

    /// Values and weights of `X` at time 0 on the Gauss–Hermite nodes.
    pub fn node_values(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(self.conditional_law(0.0, 0.0)?.atoms())
    }
}

impl<'a> CondLaw<'a> {
    pub fn gaussian<F: Fn(f64) -> f64 + Sync + 'a>(f: F, mean: f64, sd: f64) -> Self {
        CondLaw::Gaussian { f: Box::new(f), mean, sd }
    }

    /// Discrete version: exact for atoms, Gauss–Hermite for Gaussians.
    pub fn atoms(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            CondLaw::Point(v) => (vec![*v], vec![1.0]),
            CondLaw::Gaussian { f, mean, sd } => {
                let r = gh_rule();
                (r.nodes.iter().map(|z| f(mean + sd * z)).collect(), r.weights.clone())
            }
            CondLaw::Atoms { values, weights } => (values.clone(), weights.clone()),
        }
    }

    /// `E[u(X)]` by Gauss–Hermite (smooth `u ∘ f`).
    pub fn expect_smooth<U: Fn(f64) -> f64>(&self, u: U) -> f64 {
        match self {
            CondLaw::Point(v) => u(*v),
            CondLaw::Gaussian { f, mean, sd } => gh_rule().expect(|z| u(f(mean + sd * z))),
            CondLaw::Atoms { values, weights } => values.iter().zip(weights).map(|(v, w)| w * u(*v)).sum(),
        }
    }

    /// `E[u(X)]` by adaptive Gauss–Legendre against the normal density,
    /// for integrands with kinks.
    pub fn expect_kinked<U: Fn(f64) -> f64>(&self, u: U) -> f64 {
        match self {
            CondLaw::Gaussian { f, mean, sd } => {
                let dens = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let h = |z: f64| dens(z) * u(f(mean + sd * z));
                let mut s = 0.0;
                // Panels of unit width keep the adaptive recursion local.
                let n = (2.0 * Z_MAX) as usize;
                for k in 0..n {
                    let a = -Z_MAX + k as f64;
                    s += integrate(&h, a, a + 1.0, 1e-14);
                }
                s
            }
            _ => self.expect_smooth(u),
        }
    }

    /// Range of `X` over the sampled support.
    pub fn bounds(&self) -> (f64, f64) {
        let fold = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        match self {
            CondLaw::Point(v) => (*v, *v),
            CondLaw::Gaussian { f, mean, sd } => {
                let n = 2001;
                fold(&mut (0..n).map(|i| f(mean + sd * (-Z_MAX + 2.0 * Z_MAX * i as f64 / (n - 1) as f64))))
            }
            CondLaw::Atoms { values, weights } => {
                fold(&mut values.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(v, _)| *v))
            }
        }
    }
}
