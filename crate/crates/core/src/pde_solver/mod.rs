//! Backward θ-scheme for `u_t + ½u_xx + g(t, u, u_x) = 0`, realizing the
//! g-expectation of Markovian payoffs as `u(t, W_t)`.

mod scheme;
mod solver;
mod staged;
mod surface;

pub use scheme::{Boundary, SchemeParams, SpatialGrid};
pub use solver::{solve_markov, solve_terminal_values, zero_z_flow, zero_z_step, Driver};
pub use staged::{staged_value, two_stage_value, vanishes_at_zero_z, TwoStageMode};
pub use surface::{g_expectation, spatial_derivative, ValueSurface};

