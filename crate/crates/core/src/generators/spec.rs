use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_endpoints, DriftProcessSpec, Generator};
use crate::error::{invalid, Result};
use crate::functions::{ScalarFn, TimeFn};
use crate::stochastic::TimeGrid;
use crate::transforms::{construct_f, DriftFunction, Field, YRange};

/// Grid used when a `|z|²` coefficient is built along characteristics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowGridSpec {
    pub n_steps: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub n_y: usize,
}

impl Default for FlowGridSpec {
    fn default() -> Self {
        FlowGridSpec { n_steps: 200, y_lo: -4.0, y_hi: 4.0, n_y: 161 }
    }
}

/// Descriptor of the `f` in `h + f|z|²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Const { c: f64 },
    /// `c·e^{a t}`
    ExpTime { c: f64, a: f64 },
    /// Transported from `f(0, ·) = f0` along the characteristics of `h`.
    Constructed {
        f0: ScalarFn,
        #[serde(default)]
        grid: FlowGridSpec,
    },
    /// `base + delta`
    Shifted { base: Box<FieldSpec>, delta: f64 },
}

impl FieldSpec {
    pub fn resolve(&self, h: &DriftFunction, horizon: f64) -> Result<Field> {
        Ok(match self {
            FieldSpec::Const { c } => Field::Const(*c),
            FieldSpec::ExpTime { c, a } => Field::ExpTime { c: *c, a: *a },
            FieldSpec::Constructed { f0, grid } => {
                let tg = TimeGrid::uniform(0.0, horizon, grid.n_steps)?;
                let range = YRange::new(grid.y_lo, grid.y_hi, grid.n_y)?;
                Field::Table(Arc::new(construct_f(h, f0, &tg, &range)?))
            }
            FieldSpec::Shifted { base, delta } => base.resolve(h, horizon)?.shifted(*delta),
        })
    }
}

/// JSON descriptor of a generator (variant tag plus parameters).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Zero,
    PureQuadratic { k: ScalarFn },
    DriftQuadratic { h: DriftFunction, f: FieldSpec },
    Entropic { beta: f64 },
    TimeVaryingQuadratic { k: TimeFn },
    RandomDriftQuadratic { drift: DriftProcessSpec, beta: f64 },
    ItoWentzell { r: TimeFn, psi_b: ScalarFn },
}

impl GeneratorSpec {
    /// Build the runtime generator for horizon `T`.
    pub fn resolve(&self, horizon: f64) -> Result<Generator> {
        if !(horizon > 0.0) {
            return invalid("generator horizon must be positive");
        }
        Ok(match self {
            GeneratorSpec::Zero => Generator::zero(),
            GeneratorSpec::PureQuadratic { k } => Generator::PureQuadratic { k: k.clone() },
            GeneratorSpec::DriftQuadratic { h, f } => Generator::DriftQuadratic { h: h.clone(), f: f.resolve(h, horizon)? },
            GeneratorSpec::Entropic { beta } => Generator::Entropic { beta: *beta },
            GeneratorSpec::TimeVaryingQuadratic { k } => Generator::TimeVaryingQuadratic { k: k.clone() },
            GeneratorSpec::RandomDriftQuadratic { drift, beta } => {
                drift.validate(horizon)?;
                Generator::RandomDriftQuadratic { drift: drift.clone(), beta: *beta }
            }
            GeneratorSpec::ItoWentzell { r, psi_b } => {
                check_endpoints(r, horizon)?;
                Generator::ItoWentzell { r: r.clone(), psi_b: psi_b.clone(), horizon }
            }
        })
    }
}
