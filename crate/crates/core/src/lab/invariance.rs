use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{IdentityReport, PayoffPair};
use crate::error::{invalid, Result};
use crate::stochastic::{kolmogorov_q, ks_two_sample, path_rng, std_normal, KsResult};

/// Significance level of the KS verdicts.
const ALPHA: f64 = 0.01;

/// Parameters of the Brownian scaling check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceParams {
    pub lambda: f64,
    /// `O ∈ {+1, −1}`
    pub sign: f64,
    pub level: f64,
    pub eps: f64,
    pub t: f64,
    pub s: f64,
    pub n_paths: usize,
    /// Monitoring steps per sample path.
    pub n_sub: usize,
    pub seed: u64,
    /// Clip the right-hand sample at `C` instead of `λC` (negative control).
    pub mismatched_clip: bool,
}

impl Default for InvarianceParams {
    fn default() -> Self {
        InvarianceParams {
            lambda: 0.5,
            sign: 1.0,
            level: 1.0,
            eps: 0.2,
            t: 0.4,
            s: 0.1,
            n_paths: 100_000,
            n_sub: 200,
            seed: 7,
            mismatched_clip: false,
        }
    }
}

/// Critical KS statistic at level `ALPHA` for samples of sizes `n` and `m`,
/// using the same asymptotic correction as `ks_two_sample`.
fn ks_critical(n: usize, m: usize) -> f64 {
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let (mut lo, mut hi) = (0.1, 5.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_q(mid) > ALPHA {
            lo = mid
        } else {
            hi = mid
        }
    }
    let lambda = 0.5 * (lo + hi);
    lambda / (en + 0.12 + 0.11 / en)
}

fn ks_report(test: &str, params: serde_json::Value, seed: u64, a: &[f64], b: &[f64]) -> Result<IdentityReport> {
    let KsResult { statistic, p_value } = ks_two_sample(a, b)?;
    let crit = ks_critical(a.len(), b.len());
    Ok(IdentityReport::new(test, params, Some(seed), vec![statistic], vec![0.0], crit)
        .with_metric("statistic", statistic)
        .with_metric("p_value", p_value))
}

/// Brownian motion started at 0, monitored on `n_sub` steps over `[0, len]`
/// and stopped at the first node with `|W| > level`.
fn stopped_increment(seed: u64, stream: u64, len: f64, level: f64, n_sub: usize) -> f64 {
    let mut rng = path_rng(seed, stream);
    let sd = (len / n_sub as f64).sqrt();
    let mut w = 0.0;
    for _ in 0..n_sub {
        w += sd * std_normal(&mut rng);
        if w.abs() > level {
            break;
        }
    }
    w
}

/// KS comparison of `λO(W_{t+ε∧τ^t_C} − W_t)` with `W_{s+λ²ε∧τ^s_{λC}} − W_s`.
///
/// Increments after a deterministic time form a fresh Brownian motion, so
/// both samples start from zero; `t` and `s` only enter the validation.
/// The right-hand grid is the left-hand grid scaled by `λ²`, which keeps
/// the identity exact under discrete monitoring.
pub fn brownian_invariance_check(p: &InvarianceParams) -> Result<IdentityReport> {
    if !(p.lambda > 0.0 && p.lambda <= 1.0) {
        return invalid("lambda must lie in (0, 1]");
    }
    if p.sign.abs() != 1.0 {
        return invalid("sign must be +1 or -1");
    }
    if !(p.level > 0.0 && p.eps > 0.0 && p.s >= 0.0 && p.s <= p.t) {
        return invalid("need C > 0, eps > 0 and 0 <= s <= t");
    }
    if p.n_paths == 0 || p.n_sub == 0 {
        return invalid("need n_paths >= 1 and n_sub >= 1");
    }
    let right_level = if p.mismatched_clip { p.level } else { p.lambda * p.level };
    let left: Vec<f64> = (0..p.n_paths as u64)
        .into_par_iter()
        .map(|i| p.lambda * p.sign * stopped_increment(p.seed, 2 * i, p.eps, p.level, p.n_sub))
        .collect();
    let right: Vec<f64> = (0..p.n_paths as u64)
        .into_par_iter()
        .map(|i| stopped_increment(p.seed, 2 * i + 1, p.lambda * p.lambda * p.eps, right_level, p.n_sub))
        .collect();
    ks_report("brownian_invariance", serde_json::to_value(p).unwrap_or_default(), p.seed, &left, &right)
}

/// KS smoke test that the two payoffs of a pair share one law.
pub fn pair_ks_check(pair: &PayoffPair, horizon: f64, n: usize, seed: u64) -> Result<IdentityReport> {
    let (a, b) = pair.sample(horizon, n, seed)?;
    ks_report("pair_equal_in_law", json!({ "pair": pair.name(), "horizon": horizon, "n": n }), seed, &a, &b)
}
