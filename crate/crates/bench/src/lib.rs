//! Shared fixtures for the benches in `benches/`.

use qbsde_core::generators::{DriftProcessSpec, Generator};
use qbsde_core::lab::PayoffPair;
use qbsde_core::StoppingTimeSpec;

/// Random-drift generator whose window opens at a branch-dependent time.
pub fn branch_window_generator() -> Generator {
    Generator::RandomDriftQuadratic {
        drift: DriftProcessSpec::IndicatorWindow {
            tau: StoppingTimeSpec::ThresholdBranch { t_obs: 0.25, t_low: 0.5, t_high: 0.75 },
            eps_w: 0.1,
        },
        beta: 0.5,
    }
}

pub fn branch_pair() -> PayoffPair {
    PayoffPair::BranchSwap { c: 1.0, t_obs: 0.25 }
}
