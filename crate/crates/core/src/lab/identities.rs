use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::engine::PdeConfig;
use super::{IdentityReport, SeriesPoint};
use crate::error::{invalid, Error, Result};
use crate::functions::{PayoffFn, ScalarFn};
use crate::generators::{DriftProcessSpec, Generator};
use crate::numerics::{extrapolate_to_zero, linear_fit, log_sum_exp};
use crate::pde_solver::{solve_markov, zero_z_step, Boundary, Driver, SchemeParams, SpatialGrid};
use crate::risk::{entropic_rho, MarkovPayoff};
use crate::stochastic::{PathBatch, PathRef, TimeGrid};

/// `β` when `g = β|z|²` exactly, so that the exponential transform gives
/// closed-form values.
fn exponential_beta(g: &Generator) -> Option<f64> {
    match g {
        Generator::Entropic { beta } => Some(*beta),
        Generator::PureQuadratic { k: ScalarFn::Const { c } } => Some(*c),
        _ => None,
    }
}

/// `(1/2β) log E[exp(2β(y + σξ))]` by Gauss–Hermite.
fn gaussian_entropic(beta: f64, y: f64, sigma: f64) -> f64 {
    if beta == 0.0 {
        return y;
    }
    let rule = crate::risk::gh_rule();
    let g2 = 2.0 * beta;
    let a: Vec<f64> = rule.nodes.iter().map(|xi| g2 * sigma * xi).collect();
    y + log_sum_exp(&a, &rule.weights) / g2
}

fn check_eps(eps: &[f64], max: f64) -> Result<()> {
    if eps.is_empty() {
        return invalid("epsilon list is empty");
    }
    if eps.iter().any(|&e| !(e > 0.0 && e <= max + 1e-12)) {
        return invalid(format!("every epsilon must lie in (0, {max}]"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("epsilon list must be strictly decreasing");
    }
    Ok(())
}

/// Difference quotients `(E^g_{t,t+ε∧τ_C}[y + z(W_{t+ε∧τ_C} − W_t)] − y)/ε`,
/// their polynomial extrapolation to `ε = 0`, and `g(t, y, z)`.
///
/// `level = None` removes the exit clip. The verdict compares the
/// extrapolated limit with `g(t, y, z)`.
#[allow(clippy::too_many_arguments)]
pub fn representation_slope(
    g: &Generator,
    t: f64,
    y: f64,
    z: f64,
    eps: &[f64],
    level: Option<f64>,
    horizon: f64,
    cfg: &PdeConfig,
    tolerance: f64,
) -> Result<IdentityReport> {
    check_eps(eps, horizon - t)?;
    let target = g.eval(t, y, z)?;
    let driver = g.driver()?;
    if let Some(c) = level {
        if !(c > 0.0) {
            return invalid("exit level must be positive");
        }
    }
    let quadrature = level.is_none().then(|| exponential_beta(g)).flatten();
    let value = |e: f64| -> Result<f64> {
        if let Some(beta) = quadrature {
            return Ok(gaussian_entropic(beta, y, z * e.sqrt()));
        }
        let n = ((cfg.steps_per_unit as f64 * e).ceil() as usize).max(100);
        let tg = TimeGrid::uniform(t, t + e, n)?;
        let (half, boundary) = match level {
            // Stopped at ±C: the boundary keeps the payoff.
            Some(c) => (c, Boundary::Frozen),
            None => (cfg.x_max * e.sqrt().max(1.0), Boundary::Linear),
        };
        let sg = SpatialGrid::new(-half, half, cfg.n_x)?;
        let sp = SchemeParams { boundary, boundary_threshold: None, ..cfg.scheme.clone() };
        let vs = solve_markov(&driver, &PayoffFn::Linear { slope: z, intercept: y }, &tg, &sg, &sp)?;
        vs.value_at(t, 0.0)
    };
    let values: Vec<f64> = eps.par_iter().map(|&e| value(e)).collect::<Result<_>>()?;
    let slopes: Vec<f64> = values.iter().zip(eps).map(|(v, e)| (v - y) / e).collect();
    let limit = extrapolate_to_zero(eps, &slopes);
    let series = eps.iter().zip(&slopes).map(|(&x, &s)| SeriesPoint { x, value: s, target }).collect();
    let engine = if quadrature.is_some() { "quadrature" } else { "pde" };
    Ok(IdentityReport::new(
        "representation_slope",
        json!({ "generator": g.name(), "t": t, "y": y, "z": z, "eps": eps, "level": level, "engine": engine }),
        None,
        vec![limit],
        vec![target],
        tolerance,
    )
    .with_series(series)
    .with_metric("limit", limit)
    .with_metric("target", target))
}

/// Backward `z = 0` flow from `y` at the last node: the solution `Y^y` of
/// the BSDE with constant terminal value.
fn constant_flow(g: &dyn Driver, tg: &TimeGrid, y: f64) -> Vec<f64> {
    let nodes = tg.nodes();
    let mut ys = vec![y; nodes.len()];
    for i in (0..nodes.len() - 1).rev() {
        ys[i] = zero_z_step(g, nodes[i], nodes[i + 1], ys[i + 1]);
    }
    ys
}

fn trapezoid(nodes: &[f64], f: &[f64]) -> f64 {
    nodes.windows(2).zip(f.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Finite-difference slopes `(E^g_{0,T}[y + εX] − E^g_{0,T}[y])/ε` against
/// `E[Γ_T X]`, with `Γ` linearised along `(Y^y, 0)`.
///
/// Metric `error_slope` is the fitted coefficient of `slope − target`
/// against `ε`.
pub fn gateaux_check(
    g: &Generator,
    y: f64,
    x: &MarkovPayoff,
    eps: &[f64],
    cfg: &PdeConfig,
    tolerance: f64,
) -> Result<IdentityReport> {
    if x.structure != crate::risk::PayoffStructure::Terminal {
        return invalid("gateaux_check needs a terminal payoff");
    }
    x.validate()?;
    check_eps(eps, f64::INFINITY)?;
    let horizon = x.horizon;
    let driver = g.driver()?;
    let n = ((cfg.steps_per_unit as f64 * horizon).ceil() as usize).max(8);
    let tg = TimeGrid::uniform(0.0, horizon, n)?;
    let ys = constant_flow(&driver, &tg, y);
    let nodes = tg.nodes();
    let gy: Vec<f64> = nodes.iter().zip(&ys).map(|(&t, &v)| g.dy(t, v, 0.0)).collect::<Result<_>>()?;
    let gz: Vec<f64> = nodes.iter().zip(&ys).map(|(&t, &v)| g.dz(t, v, 0.0)).collect::<Result<_>>()?;
    // Deterministic θ = ∂_z g: the Doléans factor is a Girsanov shift of W_T.
    let shift = trapezoid(nodes, &gz);
    let scale = trapezoid(nodes, &gy).exp();
    let rule = crate::risk::gh_rule();
    let target = scale * rule.expect(|xi| x.phi.eval(horizon.sqrt() * xi + shift));

    let quadrature = exponential_beta(g);
    let half = cfg.x_max * horizon.sqrt().max(1.0);
    let sg = SpatialGrid::new(-half, half, cfg.n_x)?;
    let solve = |phi: PayoffFn| -> Result<f64> {
        solve_markov(&driver, &phi, &tg, &sg, &cfg.scheme)?.value_at(0.0, 0.0)
    };
    let base = match quadrature {
        Some(_) => y,
        None => solve(PayoffFn::Const { c: y })?,
    };
    let values: Vec<f64> = eps
        .par_iter()
        .map(|&e| {
            let phi = PayoffFn::affine(y, e, x.phi.clone());
            match quadrature {
                Some(beta) if beta > 0.0 => entropic_rho(&MarkovPayoff::terminal(phi, horizon), 2.0 * beta, 0.0, 0.0),
                Some(_) => Ok(y + e * rule.expect(|xi| x.phi.eval(horizon.sqrt() * xi))),
                None => solve(phi),
            }
        })
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = values.iter().zip(eps).map(|(v, e)| (v - base) / e).collect();
    let limit = extrapolate_to_zero(eps, &slopes);
    let errors: Vec<f64> = slopes.iter().map(|s| s - target).collect();
    let error_slope = if eps.len() >= 2 { linear_fit(eps, &errors).0 } else { f64::NAN };
    let series = eps.iter().zip(&slopes).map(|(&x, &s)| SeriesPoint { x, value: s, target }).collect();
    Ok(IdentityReport::new(
        "gateaux_check",
        json!({ "generator": g.name(), "y": y, "horizon": horizon, "eps": eps,
                "engine": if quadrature.is_some() { "quadrature" } else { "pde" } }),
        None,
        vec![limit],
        vec![target],
        tolerance,
    )
    .with_series(series)
    .with_metric("limit", limit)
    .with_metric("target", target)
    .with_metric("gamma_t", scale)
    .with_metric("error_slope", error_slope))
}

/// Pathwise check of `ℰ(∫∂_z g dW)_T = e^{−∫∂_y g ds} / E[e^{−∫∂_y g ds}]`
/// along the solution `(Y^y, Z^y)` with constant terminal value `y`.
pub fn cons1_check(g: &Generator, y: f64, paths: &PathBatch, tolerance: f64) -> Result<IdentityReport> {
    let tg = &paths.grid;
    let nodes = tg.nodes();
    let n = tg.n_steps();
    // (∂_y g, ∂_z g) per step, for one path.
    type Coeffs = Vec<(f64, f64)>;
    let coeffs: Box<dyn Fn(PathRef<'_>) -> Result<Coeffs> + Sync + '_> = match g {
        Generator::RandomDriftQuadratic { drift, beta } => {
            let totals: Vec<f64> = (0..paths.n_paths)
                .into_par_iter()
                .map(|p| Ok(drift.drift_integral(paths.path(p))?.total))
                .collect::<Result<_>>()?;
            let (lo, hi) = totals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let beta = *beta;
            if hi - lo <= 1e-12 {
                // Ỹ = Y + ∫₀ᵗ h has constant terminal value, so Z ≡ 0.
                Box::new(move |path| {
                    (0..n).map(|i| g.point_pathwise(path, nodes[i], y, 0.0).map(|p| (p.gy, p.gz))).collect()
                })
            } else if let DriftProcessSpec::PersistentDrift { t_obs, clamp } = drift {
                let (t_obs, clamp) = (*t_obs, clamp.clone());
                let a = tg.t_end() - t_obs;
                Box::new(move |path| {
                    (0..n)
                        .map(|i| {
                            let z = persistent_z(&clamp, beta, a, t_obs - nodes[i], path.w1(i));
                            g.point_pathwise(path, nodes[i], y, z).map(|p| (p.gy, p.gz))
                        })
                        .collect()
                })
            } else {
                return Err(Error::ClosedFormUnavailable(
                    "random drift with non-constant total needs the persistent-drift form".into(),
                ));
            }
        }
        Generator::ItoWentzell { r, psi_b, .. } => {
            // Y ≡ y and Z ≡ 0 for the ½|z|² equation, so Ỹ = y − rψ(W) and Z̃ = −b.
            let (r, psi_b) = (r.clone(), psi_b.clone());
            Box::new(move |path| {
                (0..n)
                    .map(|i| {
                        let (t, w) = (nodes[i], path.w1(i));
                        let yt = y - r.eval(t) * psi_b.eval(w);
                        let zt = -r.eval(t) * psi_b.d1(w);
                        g.point_pathwise(path, t, yt, zt).map(|p| (p.gy, p.gz))
                    })
                    .collect()
            })
        }
        _ => {
            let driver = g.driver()?;
            let ys = constant_flow(&driver, tg, y);
            let c: Coeffs = (0..n).map(|i| g.point(nodes[i], ys[i], 0.0).map(|p| (p.gy, p.gz))).collect::<Result<_>>()?;
            Box::new(move |_| Ok(c.clone()))
        }
    };
    let per_path: Vec<(f64, f64)> = (0..paths.n_paths)
        .into_par_iter()
        .map(|p| {
            let path = paths.path(p);
            let c = coeffs(path)?;
            let (mut stoch, mut quad, mut dy) = (0.0, 0.0, 0.0);
            for (i, (gy, gz)) in c.iter().enumerate() {
                let dt = nodes[i + 1] - nodes[i];
                stoch += gz * (path.w1(i + 1) - path.w1(i));
                quad += gz * gz * dt;
                dy += gy * dt;
            }
            Ok(((stoch - 0.5 * quad).exp(), (-dy).exp()))
        })
        .collect::<Result<_>>()?;
    let norm = per_path.iter().map(|v| v.1).sum::<f64>() / paths.n_paths as f64;
    let lhs: Vec<f64> = per_path.iter().map(|v| v.0).collect();
    let rhs: Vec<f64> = per_path.iter().map(|v| v.1 / norm).collect();
    Ok(IdentityReport::new(
        "cons1_check",
        json!({ "generator": g.name(), "y": y, "n_paths": paths.n_paths, "n_steps": n }),
        Some(paths.seed),
        lhs,
        rhs,
        tolerance,
    ))
}

/// `∂_x` of `(1/2β) log E[exp(2β·a·clamp(x + √s ξ))]`, zero once `s ≤ 0`.
fn persistent_z(clamp: &ScalarFn, beta: f64, a: f64, s: f64, x: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let rule = crate::risk::gh_rule();
    let g2a = 2.0 * beta * a;
    let sd = s.sqrt();
    let us: Vec<f64> = rule.nodes.iter().map(|xi| x + sd * xi).collect();
    let ex: Vec<f64> = us.iter().map(|&u| g2a * clamp.eval(u)).collect();
    let m = ex.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for ((u, e), w) in us.iter().zip(&ex).zip(&rule.weights) {
        let e = w * (e - m).exp();
        num += e * a * clamp.d1(*u);
        den += e;
    }
    num / den
}

/// One sample `(t, y, z, λ)` of the homogeneity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneitySample {
    pub t: f64,
    pub y: f64,
    pub z: f64,
    pub lambda: f64,
}

impl HomogeneitySample {
    /// A small product set over `[0, 1) × [−2, 2] × [−3, 3] × (0, 1)`.
    pub fn default_set() -> Vec<Self> {
        let mut out = Vec::new();
        for &t in &[0.0, 0.3, 0.7] {
            for &y in &[-2.0, -0.5, 0.0, 1.0, 2.0] {
                for &z in &[-3.0, -1.0, 0.5, 2.0] {
                    for &lambda in &[0.25, 0.5, 0.9] {
                        out.push(HomogeneitySample { t, y, z, lambda });
                    }
                }
            }
        }
        out
    }
}

/// `sup |g(t, y, λOz) − λ²g(t, y, z)|` over the samples and `O = ±1`.
pub fn quadratic_homogeneity_check(g: &Generator, samples: &[HomogeneitySample], tolerance: f64) -> Result<IdentityReport> {
    let mut lhs = Vec::with_capacity(2 * samples.len());
    let mut rhs = Vec::with_capacity(2 * samples.len());
    for s in samples {
        let base = g.eval(s.t, s.y, s.z)?;
        for o in [1.0, -1.0] {
            lhs.push(g.eval(s.t, s.y, s.lambda * o * s.z)?);
            rhs.push(s.lambda * s.lambda * base);
        }
    }
    Ok(IdentityReport::new(
        "quadratic_homogeneity",
        json!({ "generator": g.name(), "n_samples": samples.len() }),
        None,
        lhs,
        rhs,
        tolerance,
    ))
}
