use serde::Serialize;

use super::flow::FlowTable;
use super::ScalarField;
use crate::error::{invalid, Error, Result};
use crate::functions::PayoffFn;
use crate::generators::Generator;
use crate::pde_solver::{solve_markov, solve_terminal_values, Driver, SchemeParams, SpatialGrid};
use crate::stochastic::TimeGrid;

/// `g̃(t, u, z̃) = −∂_t v + ∂_y v·g(t, y, z̃/∂_y v) − ½∂_yy v·(z̃/∂_y v)²`
/// with `y = v⁻¹(t, u)`: the generator of `Ũ = v(t, Y)`.
pub struct TransformedDriver<'a> {
    g: &'a Generator,
    flow: &'a FlowTable,
}

impl<'a> TransformedDriver<'a> {
    pub fn new(g: &'a Generator, flow: &'a FlowTable) -> Result<Self> {
        g.driver()?;
        Ok(TransformedDriver { g, flow })
    }
}

impl Driver for TransformedDriver<'_> {
    fn g(&self, t: f64, u: f64, zt: f64) -> f64 {
        let f = self.flow;
        let y = f.v_inv(t, u);
        let dv = f.dv(t, y);
        let z = zt / dv;
        let gv = match self.g {
            Generator::DriftQuadratic { h, f: coef } => h.h(t, y) + coef.value(t, y) * z * z,
            other => other.eval(t, y, z).unwrap_or(f64::NAN),
        };
        -f.dt_v(t, y) + dv * gv - 0.5 * f.ddv(t, y) * z * z
    }
}

/// Both sides of the transfer identity at `(0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferGap {
    /// `E^{g̃}_{0,T}[v(T, φ)]`
    pub transformed: f64,
    /// `v(0, E^g_{0,T}[φ])`
    pub direct: f64,
    pub gap: f64,
}

/// Solve the transformed and the original problem independently and
/// compare through `v(0, ·)`.
pub fn transfer_identity_gap(
    g: &Generator,
    flow: &FlowTable,
    phi: &PayoffFn,
    tg: &TimeGrid,
    sg: &SpatialGrid,
    sp: &SchemeParams,
) -> Result<TransferGap> {
    let Generator::DriftQuadratic { h, .. } = g else {
        return Err(Error::VariantMismatch(format!("transfer identity needs a drift-quadratic generator, got {}", g.name())));
    };
    if h != flow.drift() {
        return invalid("flow table was built for a different drift");
    }
    let ft = flow.time_grid();
    if (ft.t0() - tg.t0()).abs() > 1e-12 || (ft.t_end() - tg.t_end()).abs() > 1e-12 {
        return invalid("flow table and solver grid must span the same interval");
    }
    let t_end = tg.t_end();
    let direct_surface = solve_markov(&g.driver()?, phi, tg, sg, sp)?;
    let direct = flow.v(tg.t0(), direct_surface.value_at(tg.t0(), 0.0)?);

    let terminal: Vec<f64> = (0..sg.n_x()).map(|j| flow.v(t_end, phi.cell_average(sg.x(j), sg.dx()))).collect();
    let gt = TransformedDriver::new(g, flow)?;
    let surface = solve_terminal_values(&gt, terminal, phi.is_discontinuous(), tg, sg, sp)?;
    let transformed = surface.value_at(tg.t0(), 0.0)?;
    Ok(TransferGap { transformed, direct, gap: (transformed - direct).abs() })
}
