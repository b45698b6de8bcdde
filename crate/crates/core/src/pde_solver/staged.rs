use serde::{Deserialize, Serialize};

use super::scheme::{SchemeParams, SpatialGrid};
use super::solver::{solve_terminal_values, zero_z_flow, Driver};
use crate::error::{invalid, Error, Result};
use crate::functions::PayoffFn;
use crate::stochastic::TimeGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoStageMode {
    /// `φ(W_{t_split})`
    EarlyPayoff,
    /// `φ(W_T − W_{t_split})`
    IncrementPayoff,
}

/// Sampled check that `g(t, y, 0) = 0` on the grid times and `|y| ≤ y_max`.
pub fn vanishes_at_zero_z(g: &dyn Driver, tg: &TimeGrid, y_max: f64) -> bool {
    let nodes = tg.nodes();
    let stride = (nodes.len() / 64).max(1);
    nodes.iter().step_by(stride).chain(std::iter::once(&tg.t_end())).all(|&t| {
        (0..=40).all(|k| {
            let y = -y_max + 2.0 * y_max * k as f64 / 40.0;
            g.g(t, y, 0.0).abs() <= 1e-12
        })
    })
}

/// `E^g_{t0,T}[φ(W_b − W_a)]` for grid nodes `t0 ≤ a < b ≤ T` of `tg`.
///
/// The payoff is known at `b`, so its value on `[b, T]` follows the `z = 0`
/// flow; on `[a, b]` it solves the PDE in the increment variable started at
/// zero; the resulting constant follows the `z = 0` flow back to `t0`.
pub fn staged_value(
    g: &dyn Driver,
    phi: &PayoffFn,
    a: f64,
    b: f64,
    tg: &TimeGrid,
    sg: &SpatialGrid,
    sp: &SchemeParams,
) -> Result<f64> {
    if !(a < b) {
        return invalid(format!("staged_value needs a < b, got a = {a}, b = {b}"));
    }
    let t0 = tg.t0();
    let ib = tg.index_of(b).ok_or_else(|| Error::InvalidArgument(format!("{b} is not a grid node")))?;
    let dx = sg.dx();
    let mut terminal: Vec<f64> = (0..sg.n_x()).map(|j| phi.cell_average(sg.x(j), dx)).collect();
    if ib < tg.n_steps() {
        let after = &tg.nodes()[ib..];
        for v in terminal.iter_mut() {
            *v = zero_z_flow(g, after, *v);
        }
    }
    let inner = tg.sub_grid(a, b)?;
    let vs = solve_terminal_values(g, terminal, phi.is_discontinuous(), &inner, sg, sp)?;
    let c = vs.value_at(inner.t0(), 0.0)?;
    if tg.index_of(a) == Some(0) {
        return Ok(c);
    }
    let before = tg.sub_grid(t0, a)?;
    Ok(zero_z_flow(g, before.nodes(), c))
}

/// Two-stage evaluation of payoffs that depend on one Brownian increment,
/// for generators with `g(t, y, 0) = 0`.
pub fn two_stage_value(
    g: &dyn Driver,
    phi: &PayoffFn,
    t_split: f64,
    mode: TwoStageMode,
    tg: &TimeGrid,
    sg: &SpatialGrid,
    sp: &SchemeParams,
) -> Result<f64> {
    let y_max = phi.sampled_sup(sg.x_min(), sg.x_max(), sg.n_x()) + 1.0;
    if !vanishes_at_zero_z(g, tg, y_max) {
        return Err(Error::AuditRejected("two_stage_value needs g(t, y, 0) = 0".into()));
    }
    match mode {
        TwoStageMode::EarlyPayoff => staged_value(g, phi, tg.t0(), t_split, tg, sg, sp),
        TwoStageMode::IncrementPayoff => staged_value(g, phi, t_split, tg.t_end(), tg, sg, sp),
    }
}
