use serde::Serialize;
use serde_json::{json, Value};

use qbsde_core::generators::{audit_assumptions, AuditReport, GeneratorSpec};
use qbsde_core::lab::{
    brownian_invariance_check, clli_gap, cons1_check, gateaux_check, ito_wentzell_check, li_gap, mli_gap,
    pair_ks_check, representation_slope, GapResult, IdentityReport, PdeConfig, Verdict,
};
use qbsde_core::pde_solver::{solve_markov, SpatialGrid};
use qbsde_core::risk::{tc_gap, MarkovPayoff, PayoffStructure};
use qbsde_core::stochastic::{sample_paths, TimeGrid};
use qbsde_core::transforms::{solve_characteristics, transfer_identity_gap, YRange};
use qbsde_core::Error;

use crate::config::{Assumption, Expect, Experiment, ExperimentConfig};

/// Exit codes of a run.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// A CSV table; `suffix` distinguishes secondary tables of one experiment.
pub struct Table {
    pub suffix: Option<&'static str>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: &[&'static str], rows: Vec<Vec<f64>>) -> Self {
        Table { suffix: None, header: header.to_vec(), rows }
    }
}

pub struct Outcome {
    pub verdict: Verdict,
    pub gap: Option<f64>,
    pub tolerance: Option<f64>,
    pub result: Value,
    pub tables: Vec<Table>,
}

/// Failure to produce a verdict, with its exit code.
#[derive(Debug)]
pub struct RunError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        RunError { code, message: e.to_string() }
    }
}

fn config_error(message: impl Into<String>) -> RunError {
    RunError { code: EXIT_CONFIG, message: message.into() }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// `holds` is whether the identity held at the tolerance; a NaN gap never passes.
fn judge(expect: Expect, holds: bool, gap: f64) -> Verdict {
    if gap.is_nan() {
        return Verdict::Fail;
    }
    Verdict::from_bool(match expect {
        Expect::Invariant => holds,
        Expect::Violated => !holds,
    })
}

/// Monte Carlo gaps hold within `tol + 3 SE`.
fn gap_outcome(r: GapResult, tol: f64, expect: Expect) -> Outcome {
    let slack = tol + 3.0 * r.std_error.unwrap_or(0.0);
    let row = vec![r.value, r.value_prime, r.gap, r.std_error.unwrap_or(f64::NAN)];
    Outcome {
        verdict: judge(expect, r.gap <= slack, r.gap),
        gap: Some(r.gap),
        tolerance: Some(tol),
        result: json!({ "gap": r, "expect": expect, "acceptance_bound": slack }),
        tables: vec![Table::new(&["value", "value_prime", "gap", "std_error"], vec![row])],
    }
}

fn series_table(r: &IdentityReport) -> Table {
    Table::new(&["eps", "slope", "target"], r.series.iter().map(|p| vec![p.x, p.value, p.target]).collect())
}

fn limit_outcome(r: IdentityReport, tol: f64) -> Outcome {
    let gap = (r.metric("limit").unwrap_or(f64::NAN) - r.metric("target").unwrap_or(f64::NAN)).abs();
    Outcome {
        verdict: judge(Expect::Invariant, r.verdict.passed(), gap),
        gap: Some(gap),
        tolerance: Some(tol),
        tables: vec![series_table(&r)],
        result: to_value(&r),
    }
}

fn check_audit(r: &AuditReport, a: Assumption) -> bool {
    match a {
        Assumption::A1 => r.a1_finite,
        Assumption::A2 => r.a2_quadratic_growth,
        Assumption::A3 => r.a3_linear_dz,
        Assumption::A4 => r.a4,
        Assumption::A4Star => r.a4_star,
        Assumption::A5 => r.a5,
    }
}

fn pde_grids(pde: &PdeConfig, horizon: f64) -> Result<(TimeGrid, SpatialGrid), Error> {
    let n = ((pde.steps_per_unit as f64 * horizon).ceil() as usize).max(1);
    let half = pde.x_max * horizon.sqrt().max(1.0);
    Ok((TimeGrid::uniform(0.0, horizon, n)?, SpatialGrid::new(-half, half, pde.n_x)?))
}

fn payoff_sup(x: &MarkovPayoff) -> f64 {
    match x.structure {
        PayoffStructure::IndicatorOfBranch { c, .. } => c.abs(),
        _ => x.phi.sampled_sup(-50.0, 50.0, 2001),
    }
}

/// Run one resolved experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let tol = cfg.tolerance.unwrap_or_else(|| cfg.experiment.default_tolerance());
    let seed = cfg.seed.unwrap_or(1);
    Ok(match &cfg.experiment {
        Experiment::Solve { generator, payoff, horizon, x0, pde, reference } => {
            let g = generator.resolve(*horizon)?;
            let (tg, sg) = pde_grids(pde, *horizon)?;
            let vs = solve_markov(&g.driver()?, payoff, &tg, &sg, &pde.scheme)?;
            let value = vs.value_at(0.0, *x0)?;
            let z = vs.z_at(0.0, *x0)?;
            let gap = reference.map(|r| (value - r).abs());
            let rows = (0..sg.n_x()).map(|j| vec![sg.x(j), vs.u(0, j), vs.z(0, j)]).collect();
            Outcome {
                verdict: Verdict::from_bool(gap.map_or(true, |d| d <= tol)),
                gap,
                tolerance: reference.map(|_| tol),
                result: json!({ "generator": g.name(), "value": value, "z": z, "reference": reference, "sup_norm": vs.sup_norm() }),
                tables: vec![Table::new(&["x", "u", "z"], rows)],
            }
        }
        Experiment::Risk { measure, payoff, t, states, reference } => {
            let rm = measure.resolve(payoff.horizon, payoff_sup(payoff))?;
            let values: Vec<f64> = states.iter().map(|&x| rm.evaluate(payoff, *t, x)).collect::<Result<_, _>>()?;
            let gap = reference.map(|r| (values[0] - r).abs());
            Outcome {
                verdict: Verdict::from_bool(gap.map_or(true, |d| d <= tol)),
                gap,
                tolerance: reference.map(|_| tol),
                result: json!({ "measure": rm.name(), "t": t, "states": states, "values": values, "reference": reference }),
                tables: vec![Table::new(&["state", "value"], states.iter().zip(&values).map(|(s, v)| vec![*s, *v]).collect())],
            }
        }
        Experiment::LiTest { generator, pair, horizon, engine, expect } => {
            let g = generator.resolve(*horizon)?;
            gap_outcome(li_gap(&g, pair, *horizon, engine)?, tol, *expect)
        }
        Experiment::ClliTest { generator, pair, horizon, t_prime, engine, expect } => {
            let g = generator.resolve(*horizon)?;
            gap_outcome(clli_gap(&g, pair, *horizon, *t_prime, engine)?, tol, *expect)
        }
        Experiment::MliTest { generator, phi, ell, tau, tau_prime, engine, expect } => {
            let g = generator.resolve(tau.max(*tau_prime))?;
            gap_outcome(mli_gap(&g, phi, *ell, *tau, *tau_prime, engine)?, tol, *expect)
        }
        Experiment::TcTest { measure, payoff, s, expect } => {
            let rm = measure.resolve(payoff.horizon, payoff_sup(payoff))?;
            let r = tc_gap(&rm, payoff, *s)?;
            Outcome {
                verdict: judge(*expect, r.gap <= tol, r.gap),
                gap: Some(r.gap),
                tolerance: Some(tol),
                result: json!({ "measure": rm.name(), "s": s, "tc": r, "expect": expect }),
                tables: vec![Table::new(&["nested", "flat", "gap"], vec![vec![r.nested, r.flat, r.gap]])],
            }
        }
        Experiment::ReprCheck { generator, t, y, z, eps, level, horizon, pde } => {
            let g = generator.resolve(*horizon)?;
            limit_outcome(representation_slope(&g, *t, *y, *z, eps, *level, *horizon, pde, tol)?, tol)
        }
        Experiment::GateauxCheck { generator, y, payoff, eps, pde } => {
            let g = generator.resolve(payoff.horizon)?;
            limit_outcome(gateaux_check(&g, *y, payoff, eps, pde, tol)?, tol)
        }
        Experiment::Cons1Check { generator, y, horizon, n_paths, n_steps, expect } => {
            let g = generator.resolve(*horizon)?;
            let tg = TimeGrid::uniform(0.0, *horizon, *n_steps)?;
            let paths = sample_paths(&tg, 1, *n_paths, seed)?;
            let r = cons1_check(&g, *y, &paths, tol)?;
            let rows = r.lhs.iter().zip(&r.rhs).enumerate().map(|(i, (a, b))| vec![i as f64, *a, *b]).collect();
            Outcome {
                verdict: judge(*expect, r.verdict.passed(), r.sup_gap),
                gap: Some(r.sup_gap),
                tolerance: Some(tol),
                tables: vec![Table::new(&["path", "lhs", "rhs"], rows)],
                result: to_value(&r),
            }
        }
        Experiment::Transform { generator, payoff, horizon, pde, flow, iw } => match generator {
            GeneratorSpec::DriftQuadratic { h, .. } => {
                let g = generator.resolve(*horizon)?;
                let (tg, sg) = pde_grids(pde, *horizon)?;
                let table = solve_characteristics(h, &tg, &YRange::new(flow.y_lo, flow.y_hi, flow.n_y)?)?;
                let r = transfer_identity_gap(&g, &table, payoff, &tg, &sg, &pde.scheme)?;
                let nodes = tg.nodes();
                let range = table.y_range();
                let stride = (nodes.len() / 50).max(1);
                let mut rows = Vec::new();
                for i in (0..nodes.len()).step_by(stride) {
                    for j in 0..range.n {
                        rows.push(vec![nodes[i], range.node(j), table.v_node(i, j), table.dv_node(i, j)]);
                    }
                }
                Outcome {
                    verdict: judge(Expect::Invariant, r.gap <= tol, r.gap),
                    gap: Some(r.gap),
                    tolerance: Some(tol),
                    result: json!({ "method": "characteristics", "transfer": r, "flow": table.descriptor(),
                                    "transport_residual": table.transport_residual() }),
                    tables: vec![
                        Table::new(&["transformed", "direct", "gap"], vec![vec![r.transformed, r.direct, r.gap]]),
                        Table { suffix: Some("flow"), header: vec!["t", "y", "v", "dv"], rows },
                    ],
                }
            }
            GeneratorSpec::ItoWentzell { .. } => {
                let g = generator.resolve(*horizon)?;
                let r = ito_wentzell_check(&g, payoff, &iw.step_counts, iw.n_paths, seed)?;
                let finest = r.levels.last().map_or(f64::NAN, |l| l.value_estimate);
                let gap = (finest - r.entropic).abs();
                let rows = r
                    .levels
                    .iter()
                    .map(|l| vec![l.n_steps as f64, l.dt, l.residual_rms, l.residual_sup, l.value_estimate])
                    .collect();
                Outcome {
                    verdict: judge(Expect::Invariant, gap <= tol && r.monotone, gap),
                    gap: Some(gap),
                    tolerance: Some(tol),
                    result: json!({ "method": "ito_wentzell", "check": r }),
                    tables: vec![Table::new(&["n_steps", "dt", "residual_rms", "residual_sup", "value_estimate"], rows)],
                }
            }
            other => {
                return Err(config_error(format!(
                    "transform needs a drift_quadratic or ito_wentzell generator, got {}",
                    other.resolve(*horizon).map(|g| g.name().to_string()).unwrap_or_default()
                )))
            }
        },
        Experiment::InvarianceCheck { pair, horizon, n_paths, params, expect } => {
            let r = match pair {
                Some(p) => pair_ks_check(p, *horizon, *n_paths, seed)?,
                None => brownian_invariance_check(params)?,
            };
            let (d, p) = (r.metric("statistic").unwrap_or(f64::NAN), r.metric("p_value").unwrap_or(f64::NAN));
            Outcome {
                verdict: judge(*expect, r.verdict.passed(), d),
                gap: Some(d),
                tolerance: Some(r.tolerance),
                tables: vec![Table::new(&["statistic", "critical", "p_value"], vec![vec![d, r.tolerance, p]])],
                result: to_value(&r),
            }
        }
        Experiment::Audit { generator, grid, require } => {
            let g = generator.resolve(grid.horizon)?;
            let r = audit_assumptions(&g, grid)?;
            let failed: Vec<&Assumption> = require.iter().filter(|a| !check_audit(&r, **a)).collect();
            let rows = r.ell_profile.iter().map(|p| p.to_vec()).collect();
            Outcome {
                verdict: Verdict::from_bool(failed.is_empty()),
                gap: None,
                tolerance: None,
                result: json!({ "audit": r, "required": require, "failed": failed }),
                tables: vec![Table::new(&["level", "ell"], rows)],
            }
        }
    })
}
