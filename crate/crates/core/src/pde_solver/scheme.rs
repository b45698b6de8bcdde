use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// How the two outermost nodes are closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Boundary value follows the `z = 0` flow `u_t = −g(t, u, 0)` of the payoff.
    #[default]
    Dirichlet,
    /// Boundary value held at the terminal payoff (stopped problems).
    Frozen,
    /// `u_x = 0` through a mirrored ghost node.
    NeumannZero,
    /// `u_xx = 0` (linear extrapolation).
    Linear,
}

/// Numerical parameters of the backward solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeParams {
    /// Implicitness of the diffusion and of the generator average.
    pub theta: f64,
    pub max_nonlinear_iters: usize,
    pub nonlinear_tol: f64,
    pub boundary: Boundary,
    /// Number of leading steps replaced by two implicit half steps; `None`
    /// picks 2 for discontinuous payoffs and 0 otherwise.
    pub smoothing_steps: Option<usize>,
    /// Threshold of the boundary-influence detector at `t0`; `None` disables it.
    pub boundary_threshold: Option<f64>,
    /// Payoffs whose sampled sup-norm exceeds this cap are rejected.
    pub sup_cap: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            theta: 0.5,
            max_nonlinear_iters: 100,
            nonlinear_tol: 1e-12,
            boundary: Boundary::Dirichlet,
            smoothing_steps: None,
            boundary_threshold: Some(1e-3),
            sup_cap: 1e6,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return invalid("theta must lie in [0, 1]");
        }
        if !(self.nonlinear_tol > 0.0) {
            return invalid("nonlinear_tol must be positive");
        }
        if self.max_nonlinear_iters == 0 {
            return invalid("max_nonlinear_iters must be positive");
        }
        Ok(())
    }
}

/// Uniform grid of the Brownian state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n_x: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_x: usize) -> Result<Self> {
        if n_x < 3 {
            return invalid("spatial grid needs n_x >= 3");
        }
        if !(x_min < 0.0 && 0.0 < x_max) {
            return invalid(format!("spatial grid needs x_min < 0 < x_max, got [{x_min}, {x_max}]"));
        }
        Ok(SpatialGrid { x_min, x_max, n_x })
    }

    /// Six standard deviations of `W` over `horizon` on each side of zero.
    pub fn default_for(horizon: f64, n_x: usize) -> Result<Self> {
        let w = 6.0 * horizon.sqrt();
        Self::new(-w, w, n_x)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j == self.n_x - 1 {
            self.x_max
        } else {
            self.x_min + j as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }

    /// Linear interpolation of nodal values at `x`; `None` outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        let tol = 1e-12 * (self.x_max - self.x_min);
        if x < self.x_min - tol || x > self.x_max + tol {
            return None;
        }
        let s = ((x - self.x_min) / self.dx()).clamp(0.0, (self.n_x - 1) as f64);
        let j = (s.floor() as usize).min(self.n_x - 2);
        let w = s - j as f64;
        if w == 0.0 {
            return Some(values[j]);
        }
        Some(values[j] * (1.0 - w) + values[j + 1] * w)
    }
}
