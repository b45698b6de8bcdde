//! Deterministic change of variables: the characteristic flow `v`, the
//! maps `ψ` and `Φ = ψ ∘ v`, and admissible `|z|²` coefficients `f`.

mod characteristics;
mod drift;
mod field;
mod flow;
mod monotone;
mod transfer;

pub use drift::DriftFunction;
pub use field::{construct_f, pde_residual_f, Field, ResidualField, ScalarField, TabulatedField};
pub use flow::{solve_characteristics, FlowDescriptor, FlowTable, YRange};
pub use monotone::{default_psi_domain, phi_map, psi_from_k, CompositeMap, MonotoneMap, PsiOptions, TabulatedMap};
pub use transfer::{transfer_identity_gap, TransferGap, TransformedDriver};
