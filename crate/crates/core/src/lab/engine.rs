use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functions::PayoffFn;
use crate::generators::{check_endpoints, DriftProcessSpec, Generator};
use crate::pde_solver::{staged_value, vanishes_at_zero_z, Driver, SchemeParams, SpatialGrid};
use crate::risk::{entropic_rho, MarkovPayoff, PayoffStructure};
use crate::stochastic::{fill_path, PathRef, TimeGrid};

use super::PayoffPair;

/// Grids of the PDE engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    /// Time steps per unit of time.
    pub steps_per_unit: usize,
    pub n_x: usize,
    /// Half-width of the spatial domain for a unit-variance problem; scaled
    /// by `√(b − a)` when the solved interval is longer.
    pub x_max: f64,
    pub scheme: SchemeParams,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig { steps_per_unit: 400, n_x: 801, x_max: 6.0, scheme: SchemeParams::default() }
    }
}

/// Paths of the Monte Carlo engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { n_paths: 100_000, n_steps: 20, seed: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub pde: PdeConfig,
    pub mc: McConfig,
}

/// Values of both payoffs and their absolute difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub engine: String,
    pub value: f64,
    pub value_prime: f64,
    pub gap: f64,
    /// Standard error of `value − value_prime` (Monte Carlo only).
    pub std_error: Option<f64>,
}

/// `|E^g_{0,T}[X] − E^g_{0,T}[X′]|` for a pair maturing at `horizon`.
pub fn li_gap(g: &Generator, pair: &PayoffPair, horizon: f64, cfg: &EngineConfig) -> Result<GapResult> {
    let (x, y) = pair.legs(horizon)?;
    pair_gap(g, &x, &y, horizon, horizon, cfg)
}

/// Gap of the `E^g_{0,T′}` values of a pair built at maturity `t_prime`;
/// `horizon` is the generator's horizon (paths and endpoint checks).
pub fn clli_gap(g: &Generator, pair: &PayoffPair, horizon: f64, t_prime: f64, cfg: &EngineConfig) -> Result<GapResult> {
    if !(t_prime > 0.0 && t_prime <= horizon + 1e-12) {
        return invalid(format!("T' = {t_prime} must lie in (0, {horizon}]"));
    }
    let (x, y) = pair.legs(t_prime)?;
    pair_gap(g, &x, &y, horizon, t_prime, cfg)
}

/// `|E^g_{0,τ}[φ(W_τ − W_{τ−ℓ})] − E^g_{0,τ′}[φ(W_{τ′} − W_{τ′−ℓ})]|` for
/// deterministic maturities and a generator with `g(t, y, 0) = 0`.
pub fn mli_gap(g: &Generator, phi: &PayoffFn, ell: f64, tau: f64, tau_prime: f64, cfg: &EngineConfig) -> Result<GapResult> {
    if !(ell > 0.0 && ell <= tau.min(tau_prime) + 1e-12) {
        return invalid(format!("increment length {ell} must lie in (0, min(tau, tau'))"));
    }
    let driver = g.driver()?;
    let t_max = tau.max(tau_prime);
    let tg = pde_grid(t_max, &[], &cfg.pde)?;
    let y_max = phi.sampled_sup(-cfg.pde.x_max, cfg.pde.x_max, cfg.pde.n_x) + 1.0;
    if !vanishes_at_zero_z(&driver, &tg, y_max) {
        return Err(Error::AuditRejected("maturity test needs g(t, y, 0) = 0".into()));
    }
    let leg = |m: f64| MarkovPayoff {
        phi: phi.clone(),
        horizon: m,
        structure: PayoffStructure::Increment { t1: (m - ell).max(0.0), t2: m },
    };
    let v = pde_leg(&driver, &leg(tau), tau, &cfg.pde)?;
    let w = pde_leg(&driver, &leg(tau_prime), tau_prime, &cfg.pde)?;
    Ok(GapResult { engine: "pde".into(), value: v, value_prime: w, gap: (v - w).abs(), std_error: None })
}

/// Gap of two payoffs observed by `t_end`, with the engine chosen by the
/// generator variant.
pub fn pair_gap(
    g: &Generator,
    x: &MarkovPayoff,
    y: &MarkovPayoff,
    horizon: f64,
    t_end: f64,
    cfg: &EngineConfig,
) -> Result<GapResult> {
    for leg in [x, y] {
        if leg.observation_time() > t_end + 1e-12 {
            return invalid(format!("payoff observed at {} is not known at {t_end}", leg.observation_time()));
        }
    }
    match g {
        Generator::RandomDriftQuadratic { drift, beta } => mc_pair(drift, *beta, x, y, horizon, t_end, &cfg.mc),
        Generator::ItoWentzell { r, psi_b, horizon: h } => {
            check_endpoints(r, *h)?;
            let rt = r.eval(t_end);
            let value = |leg: &MarkovPayoff| -> Result<f64> {
                // E^g̃_{0,t}[X] = log E[exp(X + r(t)ψ(W_t))], since Ỹ = Y − rψ(W)
                // and Y solves the ½|z|² equation.
                if rt.abs() <= 1e-12 {
                    return entropic_rho(leg, 1.0, 0.0, 0.0);
                }
                if leg.structure != PayoffStructure::Terminal || (leg.horizon - t_end).abs() > 1e-12 {
                    return Err(Error::ClosedFormUnavailable(
                        "r(t) != 0 needs a terminal payoff observed at t".into(),
                    ));
                }
                let (phi, psi) = (leg.phi.clone(), psi_b.clone());
                let shifted = PayoffFn::custom(move |w| phi.eval(w) + rt * psi.eval(w));
                entropic_rho(&MarkovPayoff::terminal(shifted, t_end), 1.0, 0.0, 0.0)
            };
            let (v, w) = (value(x)?, value(y)?);
            Ok(GapResult { engine: "transform".into(), value: v, value_prime: w, gap: (v - w).abs(), std_error: None })
        }
        _ => {
            let driver = g.driver()?;
            let (v, w) = rayon::join(|| pde_leg(&driver, x, t_end, &cfg.pde), || pde_leg(&driver, y, t_end, &cfg.pde));
            let (v, w) = (v?, w?);
            Ok(GapResult { engine: "pde".into(), value: v, value_prime: w, gap: (v - w).abs(), std_error: None })
        }
    }
}

/// Uniform grid on `[0, t_end]` with `extra` times inserted as nodes.
fn pde_grid(t_end: f64, extra: &[f64], cfg: &PdeConfig) -> Result<TimeGrid> {
    let n = ((cfg.steps_per_unit as f64 * t_end).ceil() as usize).max(8);
    let tg = TimeGrid::uniform(0.0, t_end, n)?;
    if extra.iter().all(|&t| tg.index_of(t).is_some()) {
        return Ok(tg);
    }
    let mut nodes = tg.nodes().to_vec();
    let tol = 1e-9 * t_end;
    for &t in extra {
        if t > tol && t < t_end - tol && !nodes.iter().any(|s| (s - t).abs() <= tol) {
            nodes.push(t);
        }
    }
    nodes.sort_by(f64::total_cmp);
    TimeGrid::from_nodes(nodes)
}

/// `E^g_{0,t_end}[X]` by the staged PDE solve in the payoff's increment.
pub(crate) fn pde_leg(g: &dyn Driver, leg: &MarkovPayoff, t_end: f64, cfg: &PdeConfig) -> Result<f64> {
    let (phi, a, b) = match leg.structure {
        PayoffStructure::Terminal => (leg.phi.clone(), 0.0, leg.horizon),
        PayoffStructure::Early { t1 } => (leg.phi.clone(), 0.0, t1),
        PayoffStructure::Increment { t1, t2 } => (leg.phi.clone(), t1, t2),
        PayoffStructure::IndicatorOfBranch { c, t_obs, upper } => {
            (PayoffFn::Indicator { c, threshold: 0.0, upper }, 0.0, t_obs)
        }
    };
    let tg = pde_grid(t_end, &[a, b], cfg)?;
    let half = cfg.x_max * (b - a).sqrt().max(1.0);
    let sg = SpatialGrid::new(-half, half, cfg.n_x)?;
    staged_value(g, &phi, a, b, &tg, &sg, &cfg.scheme)
}

const CHUNK: usize = 4096;

/// Exponential-transform Monte Carlo for `g = h_t + β|z|²`:
/// `Y_0 = (1/2β) log E[exp(2β(X + ∫₀^{T′} h dt))]`, both payoffs on the
/// same paths.
fn mc_pair(
    drift: &DriftProcessSpec,
    beta: f64,
    x: &MarkovPayoff,
    y: &MarkovPayoff,
    horizon: f64,
    t_end: f64,
    mc: &McConfig,
) -> Result<GapResult> {
    if !(beta > 0.0) {
        return invalid("Monte Carlo engine needs beta > 0");
    }
    if mc.n_paths < 2 {
        return invalid("Monte Carlo engine needs at least two paths");
    }
    drift.validate(horizon)?;
    let tg = TimeGrid::uniform(0.0, horizon, mc.n_steps)?;
    for t in [t_end, x.observation_time(), y.observation_time()] {
        if tg.index_of(t).is_none() {
            return invalid(format!("t = {t} is not a node of the {}-step Monte Carlo grid", mc.n_steps));
        }
    }
    let g2 = 2.0 * beta;
    let stride = tg.n_steps() + 1;
    let n_chunks = mc.n_paths.div_ceil(CHUNK);
    // Per-chunk sums in a fixed order keep the result independent of the thread count.
    let sums: Vec<Result<[f64; 5]>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![0.0; stride];
            let mut s = [0.0; 5];
            for p in c * CHUNK..((c + 1) * CHUNK).min(mc.n_paths) {
                fill_path(&tg, 1, mc.seed, p as u64, &mut buf);
                let path = PathRef::new(&tg, 1, &buf);
                let int_h = drift.drift_integral(path)?.partial(t_end);
                let ea = g2 * (x.eval_path(path)? + int_h);
                let eb = g2 * (y.eval_path(path)? + int_h);
                if ea.abs().max(eb.abs()) > 700.0 {
                    return Err(Error::OverflowGuard { u: ea.abs().max(eb.abs()), cap: 700.0 });
                }
                let (a, b) = (ea.exp(), eb.exp());
                s[0] += a;
                s[1] += b;
                s[2] += a * a;
                s[3] += b * b;
                s[4] += a * b;
            }
            Ok(s)
        })
        .collect();
    let mut s = [0.0; 5];
    for part in sums {
        for (acc, v) in s.iter_mut().zip(part?) {
            *acc += v;
        }
    }
    let n = mc.n_paths as f64;
    let (ma, mb) = (s[0] / n, s[1] / n);
    let (v, w) = (ma.ln() / g2, mb.ln() / g2);
    // Delta method on log(ā) − log(b̄).
    let var = s[2] / n / (ma * ma) + s[3] / n / (mb * mb) - 2.0 * s[4] / n / (ma * mb);
    let se = (var.max(0.0) / (n - 1.0)).sqrt() / g2;
    Ok(GapResult { engine: "monte_carlo".into(), value: v, value_prime: w, gap: (v - w).abs(), std_error: Some(se) })
}
