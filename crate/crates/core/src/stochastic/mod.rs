//! Brownian paths, time grids, stopping rules, Gauss–Hermite quadrature and
//! the two-sample Kolmogorov–Smirnov test.

mod exit;
mod grid;
mod ks;
mod paths;
mod quadrature;

pub use exit::{exit_time, level_exit_index, StoppingTimeSpec};
pub use grid::TimeGrid;
pub use ks::{kolmogorov_q, ks_two_sample, KsResult};
pub use paths::{fill_path, path_rng, sample_paths, std_normal, BinaryHeader, PathBatch, PathRef};
pub(crate) use paths::{read_f64, read_f64s, write_f64s, FORMAT_VERSION};
pub use quadrature::{gauss_hermite, QuadratureRule};
