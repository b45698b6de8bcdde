//! Equal-in-law payoff pairs, law-invariance gap tests and pathwise
//! identity checks.

mod engine;
mod identities;
mod invariance;
mod ito_wentzell;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::functions::PayoffFn;
use crate::risk::{MarkovPayoff, PayoffStructure};
use crate::stochastic::{path_rng, std_normal};

pub use engine::{clli_gap, li_gap, mli_gap, pair_gap, EngineConfig, GapResult, McConfig, PdeConfig};
pub use identities::{cons1_check, gateaux_check, quadratic_homogeneity_check, representation_slope, HomogeneitySample};
pub use invariance::{brownian_invariance_check, pair_ks_check, InvarianceParams};
pub use ito_wentzell::{ito_wentzell_check, IwCheck, IwLevel};

/// Two payoffs with the same law under P.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffPair {
    /// `φ(W_T)` and `φ(−W_T)`
    Reflection { phi: PayoffFn },
    /// `φ(W_{t1})` and `φ(W_T − W_{T−t1})`
    IncrementShift { phi: PayoffFn, t1: f64 },
    /// `c·1{W_{t_obs} ≥ 0}` and `c·1{W_{t_obs} < 0}`
    BranchSwap { c: f64, t_obs: f64 },
}

impl PayoffPair {
    pub fn name(&self) -> &'static str {
        match self {
            PayoffPair::Reflection { .. } => "reflection",
            PayoffPair::IncrementShift { .. } => "increment_shift",
            PayoffPair::BranchSwap { .. } => "branch_swap",
        }
    }

    /// Both payoffs with maturity `horizon`.
    pub fn legs(&self, horizon: f64) -> Result<(MarkovPayoff, MarkovPayoff)> {
        let (x, y) = match self {
            PayoffPair::Reflection { phi } => (
                MarkovPayoff::terminal(phi.clone(), horizon),
                MarkovPayoff::terminal(PayoffFn::reflected(phi.clone()), horizon),
            ),
            PayoffPair::IncrementShift { phi, t1 } => {
                if !(*t1 > 0.0 && *t1 <= horizon + 1e-12) {
                    return invalid(format!("increment length {t1} must lie in (0, {horizon}]"));
                }
                let t1 = t1.min(horizon);
                (
                    MarkovPayoff { phi: phi.clone(), horizon, structure: PayoffStructure::Early { t1 } },
                    MarkovPayoff {
                        phi: phi.clone(),
                        horizon,
                        structure: PayoffStructure::Increment { t1: horizon - t1, t2: horizon },
                    },
                )
            }
            PayoffPair::BranchSwap { c, t_obs } => {
                let leg = |upper| MarkovPayoff {
                    phi: PayoffFn::Const { c: 0.0 },
                    horizon,
                    structure: PayoffStructure::IndicatorOfBranch { c: *c, t_obs: *t_obs, upper },
                };
                (leg(true), leg(false))
            }
        };
        x.validate()?;
        y.validate()?;
        Ok((x, y))
    }

    /// Independent samples of both payoffs (streams `2i` and `2i + 1`).
    pub fn sample(&self, horizon: f64, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (x, y) = self.legs(horizon)?;
        let draw = |leg: &MarkovPayoff, stream: u64| {
            let z = std_normal(&mut path_rng(seed, stream));
            match leg.structure {
                PayoffStructure::Terminal => leg.phi.eval(horizon.sqrt() * z),
                PayoffStructure::Early { t1 } => leg.phi.eval(t1.sqrt() * z),
                PayoffStructure::Increment { t1, t2 } => leg.phi.eval((t2 - t1).sqrt() * z),
                PayoffStructure::IndicatorOfBranch { c, upper, .. } => {
                    if (z >= 0.0) == upper {
                        c
                    } else {
                        0.0
                    }
                }
            }
        };
        let a = (0..n as u64).map(|i| draw(&x, 2 * i)).collect();
        let b = (0..n as u64).map(|i| draw(&y, 2 * i + 1)).collect();
        Ok((a, b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// One row of a sweep: the swept parameter, the measured value and its target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub x: f64,
    pub value: f64,
    pub target: f64,
}

/// Outcome of an identity check: LHS and RHS arrays, their sup and mean
/// gap, and the verdict `sup_gap ≤ tolerance`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub test: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub sup_gap: f64,
    pub mean_gap: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesPoint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    pub verdict: Verdict,
}

impl IdentityReport {
    pub fn new(
        test: &str,
        params: serde_json::Value,
        seed: Option<u64>,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        tolerance: f64,
    ) -> Self {
        assert_eq!(lhs.len(), rhs.len());
        let gaps = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs());
        let (sup, sum) = gaps.fold((0.0f64, 0.0), |(m, s), g| (if g.is_nan() { f64::NAN } else { m.max(g) }, s + g));
        let mean = if lhs.is_empty() { 0.0 } else { sum / lhs.len() as f64 };
        IdentityReport {
            test: test.to_string(),
            params,
            seed,
            lhs,
            rhs,
            sup_gap: sup,
            mean_gap: mean,
            tolerance,
            series: Vec::new(),
            metrics: BTreeMap::new(),
            verdict: Verdict::from_bool(sup <= tolerance),
        }
    }

    pub fn with_series(mut self, series: Vec<SeriesPoint>) -> Self {
        self.series = series;
        self
    }

    pub fn with_metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}
