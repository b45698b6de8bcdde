//! Quadratic g-expectations: PDE and Monte Carlo engines, change-of-variable
//! transforms, generator catalog, dynamic risk measures and law-invariance
//! gap tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod error;
pub mod functions;
pub mod generators;
pub mod lab;
pub mod numerics;
pub mod pde_solver;
pub mod risk;
pub mod stochastic;
pub mod transforms;

pub use error::{Error, Result};
pub use functions::{PayoffFn, ScalarFn, TimeFn};
pub use pde_solver::{Driver, SchemeParams, SpatialGrid, ValueSurface};
pub use stochastic::{PathBatch, QuadratureRule, StoppingTimeSpec, TimeGrid};
