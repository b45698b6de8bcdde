use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functions::PayoffFn;
use crate::generators::{check_endpoints, Generator};
use crate::risk::{entropic_rho, gh_rule, MarkovPayoff};
use crate::stochastic::{sample_paths, TimeGrid};

/// Discrete BSDE residual of the constructed pair at one step size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwLevel {
    pub n_steps: usize,
    pub dt: f64,
    /// RMS over paths of `Ỹ_T − Ỹ_0 + Σ (g̃ Δt − Z̃ ΔW)`.
    pub residual_rms: f64,
    /// Sup over paths and nodes of the running residual.
    pub residual_sup: f64,
    /// `mean(Ỹ_T + Σ (g̃ Δt − Z̃ ΔW))`, an estimate of `Ỹ_0`.
    pub value_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwCheck {
    /// `log E[e^X]`
    pub entropic: f64,
    /// `Ỹ_0 = Y_0 − r(0)ψ(0)`
    pub transformed: f64,
    pub levels: Vec<IwLevel>,
    /// Residual RMS strictly decreasing with the step size.
    pub monotone: bool,
    pub seed: u64,
}

/// `(Y, Z)` of the `½|z|²` equation with terminal `φ(W_T)` at `(t, x)`.
fn entropic_yz(phi: &PayoffFn, s: f64, x: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (phi.eval(x), phi.deriv(x));
    }
    let rule = gh_rule();
    let sd = s.sqrt();
    let m = phi.sup_bound().unwrap_or(0.0);
    let (mut den, mut num) = (0.0, 0.0);
    for (xi, w) in rule.nodes.iter().zip(&rule.weights) {
        let u = x + sd * xi;
        let e = w * (phi.eval(u) - m).exp();
        den += e;
        num += e * phi.deriv(u);
    }
    (m + den.ln(), num / den)
}

/// Builds `(Ỹ, Z̃) = (Y − rψ(W), Z − b)` from the `½|z|²` solution on
/// simulated paths and measures how well it solves the constructed
/// generator's discrete BSDE at each step count in `step_counts`.
///
/// Step counts must divide the largest one; coarser levels subsample the
/// finest paths.
pub fn ito_wentzell_check(
    g: &Generator,
    phi: &PayoffFn,
    step_counts: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<IwCheck> {
    let Generator::ItoWentzell { r, psi_b, horizon } = g else {
        return Err(Error::VariantMismatch(format!("{} is not an Itô–Wentzell generator", g.name())));
    };
    check_endpoints(r, *horizon)?;
    let n_max = step_counts.iter().copied().max().unwrap_or(0);
    if n_max == 0 || step_counts.iter().any(|&n| n == 0 || n_max % n != 0) {
        return invalid("step counts must be positive divisors of the largest one");
    }
    let t_end = *horizon;
    let tg = TimeGrid::uniform(0.0, t_end, n_max)?;
    let paths = sample_paths(&tg, 1, n_paths, seed)?;
    let nodes = tg.nodes();

    // Per path and finest node: (W, Ỹ, Z̃, g̃(Ỹ, Z̃)).
    let fields: Vec<Vec<[f64; 4]>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let path = paths.path(p);
            (0..=n_max)
                .map(|i| {
                    let (t, w) = (nodes[i], path.w1(i));
                    let (y, z) = entropic_yz(phi, t_end - t, w);
                    let yt = y - r.eval(t) * psi_b.eval(w);
                    let zt = z - r.eval(t) * psi_b.d1(w);
                    let gt = g.eval_pathwise(path, t, yt, zt)?;
                    Ok([w, yt, zt, gt])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut counts = step_counts.to_vec();
    counts.sort_unstable();
    let levels: Vec<IwLevel> = counts
        .iter()
        .map(|&n| {
            let stride = n_max / n;
            let dt = t_end / n as f64;
            let (mut sq, mut sup, mut val) = (0.0, 0.0f64, 0.0);
            for f in &fields {
                let mut acc = 0.0;
                for j in 0..n {
                    let (a, b) = (&f[j * stride], &f[(j + 1) * stride]);
                    acc += b[1] - a[1] + a[3] * dt - a[2] * (b[0] - a[0]);
                    sup = sup.max(acc.abs());
                }
                sq += acc * acc;
                val += f[0][1] - acc;
            }
            IwLevel {
                n_steps: n,
                dt,
                residual_rms: (sq / n_paths as f64).sqrt(),
                residual_sup: sup,
                value_estimate: val / n_paths as f64,
            }
        })
        .collect();
    // Finest first for the monotonicity reading.
    let monotone = levels.windows(2).all(|w| w[1].residual_rms < w[0].residual_rms);
    let entropic = entropic_rho(&MarkovPayoff::terminal(phi.clone(), t_end), 1.0, 0.0, 0.0)?;
    let (y0, _) = entropic_yz(phi, t_end, 0.0);
    let transformed = y0 - r.eval(0.0) * psi_b.eval(0.0);
    Ok(IwCheck { entropic, transformed, levels, monotone, seed })
}
