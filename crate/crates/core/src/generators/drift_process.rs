use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::functions::{ScalarFn, TimeFn};
use crate::stochastic::{exit_time, PathRef, StoppingTimeSpec};

fn tanh_clamp() -> ScalarFn {
    ScalarFn::tanh()
}

/// Random drift `h_t(ω)` of a random-drift quadratic generator. Drifts are
/// step functions on the path grid: the value on `[t_i, t_{i+1})` is the
/// rule evaluated at the step midpoint, so window edges at grid nodes give
/// exact integrals.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftProcessSpec {
    /// `h_t = 1_{[τ, τ + eps_w]}(t)`
    IndicatorWindow { tau: StoppingTimeSpec, eps_w: f64 },
    /// `h_t = clamp(W_{t_obs})·shape(t)` with `∫ shape = 0` after `t_obs`.
    SignedWindow {
        t_obs: f64,
        shape: TimeFn,
        #[serde(default = "tanh_clamp")]
        clamp: ScalarFn,
    },
    /// `h_t = clamp(W_{t_obs})·1_{t ≥ t_obs}`; not law-invariant.
    PersistentDrift {
        t_obs: f64,
        #[serde(default = "tanh_clamp")]
        clamp: ScalarFn,
    },
}

/// Pathwise drift integral: total and running values at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftIntegral {
    pub total: f64,
    pub nodes: Vec<f64>,
    /// `∫₀^{t_i} h dt`
    pub cumulative: Vec<f64>,
}

impl DriftIntegral {
    /// `∫₀^{T′} h dt`, linear between nodes (exact for step drifts).
    pub fn partial(&self, t_prime: f64) -> f64 {
        let n = self.nodes.len();
        if t_prime <= self.nodes[0] {
            return 0.0;
        }
        if t_prime >= self.nodes[n - 1] {
            return self.total;
        }
        let k = self.nodes.partition_point(|&s| s <= t_prime) - 1;
        let w = (t_prime - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k]);
        self.cumulative[k] + w * (self.cumulative[k + 1] - self.cumulative[k])
    }
}

impl DriftProcessSpec {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            DriftProcessSpec::IndicatorWindow { tau, eps_w } => {
                tau.validate(horizon)?;
                if !(*eps_w > 0.0) {
                    return invalid("IndicatorWindow needs eps_w > 0");
                }
                if let StoppingTimeSpec::ThresholdBranch { t_high, .. } = tau {
                    if t_high + eps_w > horizon + 1e-12 {
                        return invalid("IndicatorWindow window ends after the horizon");
                    }
                }
            }
            DriftProcessSpec::SignedWindow { t_obs, shape, .. } => {
                if !(*t_obs >= 0.0 && *t_obs < horizon) {
                    return invalid("SignedWindow needs 0 <= t_obs < T");
                }
                if let TimeFn::SignedPulse { start, mid, end } = shape {
                    if !(start >= t_obs && start < mid && mid < end && *end <= horizon + 1e-12) {
                        return invalid("SignedWindow pulse must satisfy t_obs <= start < mid < end <= T");
                    }
                    if ((mid - start) - (end - mid)).abs() > 1e-12 {
                        return invalid("SignedWindow pulse halves must have equal length");
                    }
                }
            }
            DriftProcessSpec::PersistentDrift { t_obs, .. } => {
                if !(*t_obs >= 0.0 && *t_obs < horizon) {
                    return invalid("PersistentDrift needs 0 <= t_obs < T");
                }
            }
        }
        Ok(())
    }

    /// Per-step drift values `h_i` on `[t_i, t_{i+1})`.
    pub fn realize(&self, path: PathRef<'_>) -> Result<Vec<f64>> {
        let nodes = path.grid.nodes();
        let mids = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1]));
        Ok(match self {
            DriftProcessSpec::IndicatorWindow { tau, eps_w } => {
                let tau = exit_time(path, path.grid.t0(), tau)?;
                mids.map(|m| if m >= tau && m < tau + eps_w { 1.0 } else { 0.0 }).collect()
            }
            DriftProcessSpec::SignedWindow { t_obs, shape, clamp } => {
                let c = clamp.eval(path.w1_at_time(*t_obs)?);
                mids.map(|m| if m < *t_obs { 0.0 } else { c * shape.eval(m) }).collect()
            }
            DriftProcessSpec::PersistentDrift { t_obs, clamp } => {
                let c = clamp.eval(path.w1_at_time(*t_obs)?);
                mids.map(|m| if m >= *t_obs { c } else { 0.0 }).collect()
            }
        })
    }

    /// `h_t` on the path at time `t` (step containing `t`; the last step at `T`).
    pub fn value(&self, path: PathRef<'_>, t: f64) -> Result<f64> {
        let steps = self.realize(path)?;
        Ok(steps[path.grid.step_index(t).min(steps.len() - 1)])
    }

    pub fn drift_integral(&self, path: PathRef<'_>) -> Result<DriftIntegral> {
        let steps = self.realize(path)?;
        let nodes = path.grid.nodes().to_vec();
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for (i, h) in steps.iter().enumerate() {
            acc += h * (nodes[i + 1] - nodes[i]);
            cumulative.push(acc);
        }
        Ok(DriftIntegral { total: acc, nodes, cumulative })
    }
}
