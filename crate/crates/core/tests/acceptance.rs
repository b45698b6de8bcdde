//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines are always shown; exits non-zero on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use qbsde_core::functions::{PayoffFn, ScalarFn, TimeFn};
use qbsde_core::generators::*;
use qbsde_core::lab::*;
use qbsde_core::pde_solver::{solve_markov, SchemeParams, SpatialGrid};
use qbsde_core::risk::*;
use qbsde_core::stochastic::{sample_paths, TimeGrid};
use qbsde_core::transforms::*;
use qbsde_core::StoppingTimeSpec;

/// `E[u(Z)]` by composite Simpson on [−9, 9].
fn simpson<F: Fn(f64) -> f64>(u: F) -> f64 {
    let n = 4000;
    let h = 18.0 / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let z = -9.0 + h * i as f64;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * u(z) * (-0.5 * z * z).exp();
    }
    s * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

fn erf_series(x: f64) -> f64 {
    let (mut term, mut sum) = (x, x);
    for n in 1..200 {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit_grid(n: usize) -> TimeGrid {
    TimeGrid::uniform(0.0, 1.0, n).unwrap()
}

fn c1_entropic_agreement() -> Outcome {
    let oracle = simpson(|z| z.tanh().exp()).ln();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let value = pool.install(|| {
        let g = Generator::Entropic { beta: 0.5 };
        let tg = unit_grid(400);
        let sg = SpatialGrid::new(-6.0, 6.0, 801).unwrap();
        solve_markov(&g.driver().unwrap(), &PayoffFn::tanh(), &tg, &sg, &SchemeParams::default())
            .unwrap()
            .value_at(0.0, 0.0)
            .unwrap()
    });
    let secs = start.elapsed().as_secs_f64();
    let err = (value - oracle).abs();
    outcome(err <= 5e-4 && secs < 5.0, format!("|u - oracle| = {err:.2e} (tol 5e-4), {secs:.2} s single-threaded (limit 5 s)"))
}

fn c2_psi_closed_forms() -> Outcome {
    let opts = PsiOptions::default();
    let ent = psi_from_k(&ScalarFn::Const { c: 0.4 }, -3.0, 3.0, &opts).unwrap();
    let gauss = psi_from_k(&ScalarFn::Linear { a: -1.0, b: 0.0 }, -3.0, 3.0, &opts).unwrap();
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for k in 0..=600 {
        let u = -3.0 + 0.01 * k as f64;
        e1 = e1.max((ent.eval(u).unwrap() - ((0.8 * u).exp() - 1.0) / 0.8).abs());
        e2 = e2.max((gauss.eval(u).unwrap() - std::f64::consts::PI.sqrt() / 2.0 * erf_series(u)).abs());
    }
    outcome(e1 <= 1e-8 && e2 <= 1e-8, format!("k = 0.4: {e1:.2e}, k = -u: {e2:.2e} (tol 1e-8)"))
}

fn c3_characteristics() -> Outcome {
    let h = DriftFunction::Linear { a: 0.1, b: 0.0 };
    let tg = unit_grid(100);
    let range = YRange::new(-3.0, 3.0, 121).unwrap();
    let flow = solve_characteristics(&h, &tg, &range).unwrap();
    let big_h = h.lipschitz_integral(tg.nodes());
    let (mut err, mut env) = (0.0f64, 0.0f64);
    for (i, t) in tg.nodes().iter().enumerate() {
        for j in 0..range.n {
            err = err.max((flow.v_node(i, j) - range.node(j) * (0.1 * t).exp()).abs());
            let d = flow.dv_node(i, j);
            env = env.max((-big_h[i]).exp() - d).max(d - big_h[i].exp());
        }
    }
    outcome(err <= 1e-8 && env <= 1e-6, format!("closed-form error {err:.2e} (tol 1e-8), envelope excess {env:.2e} (slack 1e-6)"))
}

fn c4_pde_constraint() -> Outcome {
    let h = DriftFunction::Linear { a: 0.1, b: 0.0 };
    let tg = unit_grid(100);
    let range = YRange::new(-3.0, 3.0, 121).unwrap();
    let res = pde_residual_f(&h, &Field::ExpTime { c: 0.05, a: 0.1 }, &tg, &range).max_abs();
    let f = construct_f(&h, &ScalarFn::Const { c: 0.05 }, &tg, &range).unwrap();
    let mut cf = 0.0f64;
    for (i, t) in tg.nodes().iter().enumerate() {
        for j in 0..range.n {
            cf = cf.max((f.node_value(i, j) - 0.05 * (0.1 * t).exp()).abs());
        }
    }
    let base = FieldSpec::Constructed { f0: ScalarFn::Const { c: 0.05 }, grid: FlowGridSpec::default() };
    let perturbed = GeneratorSpec::DriftQuadratic { h, f: FieldSpec::Shifted { base: Box::new(base), delta: 0.1 } }
        .resolve(1.0)
        .unwrap();
    let pair = PayoffPair::IncrementShift { phi: PayoffFn::Tanh { amplitude: 2.5, scale: 2.0, shift: 0.0 }, t1: 0.5 };
    let gap = li_gap(&perturbed, &pair, 1.0, &EngineConfig::default()).unwrap().gap;
    outcome(
        res <= 1e-10 && cf <= 1e-8 && gap >= 1e-2,
        format!("residual {res:.2e} (tol 1e-10), construct_f error {cf:.2e} (tol 1e-8), perturbed li_gap {gap:.3e} (>= 1e-2)"),
    )
}

fn c5_transfer_identity() -> Outcome {
    let h = DriftFunction::Linear { a: 0.1, b: 0.0 };
    let gap = |nt: usize, nx: usize| {
        let tg = unit_grid(nt);
        let flow = solve_characteristics(&h, &tg, &YRange::new(-4.0, 4.0, 161).unwrap()).unwrap();
        let g = Generator::DriftQuadratic { h: h.clone(), f: Field::ExpTime { c: 0.05, a: 0.1 } };
        let sg = SpatialGrid::new(-6.0, 6.0, nx).unwrap();
        transfer_identity_gap(&g, &flow, &PayoffFn::tanh(), &tg, &sg, &SchemeParams::default()).unwrap().gap
    };
    let (prod, fine) = rayon::join(|| gap(400, 801), || gap(800, 1601));
    let ratio = prod / fine;
    outcome(prod <= 1e-3 && ratio >= 1.8, format!("gap {prod:.2e} at 400x801 (tol 1e-3), {fine:.2e} at 800x1601, reduction {ratio:.2}x (>= 1.8)"))
}

fn c6_certainty_equivalent() -> Outcome {
    let h = DriftFunction::Linear { a: 0.1, b: 0.0 };
    let g = GeneratorSpec::DriftQuadratic {
        h: h.clone(),
        f: FieldSpec::Constructed { f0: ScalarFn::Const { c: 0.05 }, grid: FlowGridSpec::default() },
    }
    .resolve(1.0)
    .unwrap();
    let (flow, psi) = certainty_equivalent_maps(&h, &ScalarFn::Const { c: 0.05 }, 1.0, 1.0, &FlowGridSpec::default(), &PsiOptions::default()).unwrap();
    let tg = unit_grid(400);
    let sg = SpatialGrid::new(-6.0, 6.0, 801).unwrap();
    let sp = SchemeParams { boundary_threshold: None, ..SchemeParams::default() };
    let mut worst = 0.0f64;
    for phi in [
        PayoffFn::tanh(),
        PayoffFn::Sin { amplitude: 0.8, freq: 1.3, phase: 0.2 },
        PayoffFn::Indicator { c: 1.0, threshold: 0.2, upper: true },
    ] {
        let ce = ce_rho(&MarkovPayoff::terminal(phi.clone(), 1.0), Arc::clone(&flow), psi.clone(), 0.0, 0.0).unwrap();
        let pde = solve_markov(&g.driver().unwrap(), &phi, &tg, &sg, &sp).unwrap().value_at(0.0, 0.0).unwrap();
        worst = worst.max((ce - pde).abs());
    }
    outcome(worst <= 1e-3, format!("max |ce_rho - PDE| over 3 payoffs {worst:.2e} (tol 1e-3)"))
}

fn c7_li_dichotomy() -> Outcome {
    let cfg = EngineConfig::default();
    let fine = EngineConfig { pde: PdeConfig { steps_per_unit: 800, n_x: 1601, ..PdeConfig::default() }, ..EngineConfig::default() };
    let catalog = [
        Generator::PureQuadratic { k: ScalarFn::Const { c: 0.4 } },
        Generator::PureQuadratic { k: ScalarFn::TanhAffine { a: 0.4, b: -0.1 } },
        Generator::PureQuadratic { k: ScalarFn::Const { c: 0.2 } },
    ];
    let pairs = [
        PayoffPair::Reflection { phi: PayoffFn::tanh() },
        PayoffPair::IncrementShift { phi: PayoffFn::tanh(), t1: 0.5 },
        PayoffPair::BranchSwap { c: 1.0, t_obs: 0.25 },
    ];
    let (mut prod, mut refined) = (0.0f64, 0.0f64);
    for g in &catalog {
        for pair in &pairs {
            prod = prod.max(li_gap(g, pair, 1.0, &cfg).unwrap().gap);
            prod = prod.max(clli_gap(g, pair, 1.0, 0.65, &cfg).unwrap().gap);
            refined = refined.max(li_gap(g, pair, 1.0, &fine).unwrap().gap);
        }
        prod = prod.max(mli_gap(g, &PayoffFn::tanh(), 0.5, 0.5, 1.0, &cfg).unwrap().gap);
        refined = refined.max(mli_gap(g, &PayoffFn::tanh(), 0.5, 0.5, 1.0, &fine).unwrap().gap);
    }
    let s = 0.5f64.sqrt();
    let oracle = 0.5 * simpson(|z| (2.0 * (s * z).tanh()).exp()).ln() - simpson(|z| (s * z).tanh());
    let tv = Generator::TimeVaryingQuadratic { k: TimeFn::Indicator { start: 0.0, end: 0.5, value: 1.0 } };
    let gap = li_gap(&tv, &PayoffPair::IncrementShift { phi: PayoffFn::tanh(), t1: 0.5 }, 1.0, &cfg).unwrap().gap;
    let rel = (gap - oracle).abs() / oracle;
    outcome(
        prod <= 1e-3 && refined <= 1e-4 && rel <= 0.1,
        format!("pure-quadratic max gap {prod:.2e} (tol 1e-3), refined {refined:.2e} (tol 1e-4); time-varying gap {gap:.5} vs Jensen {oracle:.5} (rel {rel:.1e}, tol 0.1)"),
    )
}

fn c8_random_drift() -> Outcome {
    let g = Generator::RandomDriftQuadratic {
        drift: DriftProcessSpec::IndicatorWindow {
            tau: StoppingTimeSpec::ThresholdBranch { t_obs: 0.25, t_low: 0.5, t_high: 0.75 },
            eps_w: 0.1,
        },
        beta: 0.5,
    };
    let cfg = EngineConfig { mc: McConfig { n_paths: 1_000_000, n_steps: 20, seed: 3 }, ..EngineConfig::default() };
    let pair = PayoffPair::BranchSwap { c: 1.0, t_obs: 0.25 };
    let start = Instant::now();
    let li = li_gap(&g, &pair, 1.0, &cfg).unwrap();
    let cl = clli_gap(&g, &pair, 1.0, 0.65, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (b, c, e) = (0.5f64, 1.0f64, 0.1f64);
    let oracle = ((0.5 * (2.0 * b * (c + e)).exp() + 0.5).ln() - (0.5 * (2.0 * b * c).exp() + 0.5 * (2.0 * b * e).exp()).ln()).abs() / (2.0 * b);
    let (se_li, se_cl) = (li.std_error.unwrap(), cl.std_error.unwrap());
    let ok = li.gap <= 3.0 * se_li && (cl.gap - oracle).abs() <= 3.0 * se_cl && cl.gap > 1e-2 && secs < 30.0;
    outcome(
        ok,
        format!(
            "li_gap at T {:.2e} (3 SE {:.2e}); clli_gap at 0.65 {:.5} vs oracle {oracle:.5} (3 SE {:.2e}); {secs:.1} s",
            li.gap,
            3.0 * se_li,
            cl.gap,
            3.0 * se_cl
        ),
    )
}

fn c9_shortfall() -> Outcome {
    let x = MarkovPayoff::terminal(PayoffFn::tanh(), 1.0);
    let ex = shortfall_rho(&x, &LossFunction::Exponential { beta: 0.5 }, 0.0, 0.0).unwrap();
    let ent = entropic_rho(&x, 1.0, 0.0, 0.0).unwrap();
    let d = (ex - ent).abs();
    let lin = tc_gap(&RiskMeasure::Shortfall { loss: LossFunction::Linear }, &x, 0.5).unwrap().gap;
    let exg = tc_gap(&RiskMeasure::Shortfall { loss: LossFunction::Exponential { beta: 0.5 } }, &x, 0.5).unwrap().gap;
    // Witness 2·tanh(W_1); its nested-Simpson oracle gap is pinned below.
    const PINNED: f64 = 4.7095e-3;
    let w = MarkovPayoff::terminal(PayoffFn::Tanh { amplitude: 2.0, scale: 1.0, shift: 0.0 }, 1.0);
    let pc = tc_gap(&RiskMeasure::Shortfall { loss: LossFunction::PiecewiseConvex }, &w, 0.5).unwrap().gap;
    let ok = d <= 1e-8 && lin <= 1e-6 && exg <= 1e-6 && pc >= 1e-3 && (pc - PINNED).abs() <= 0.1 * PINNED;
    outcome(
        ok,
        format!("|exp shortfall - entropic| {d:.1e}; tc gaps linear {lin:.1e}, exponential {exg:.1e}; piecewise-convex {pc:.4e} (pinned {PINNED:.4e} +-10%)"),
    )
}

fn c10_representation() -> Outcome {
    let pde = PdeConfig::default();
    let eps = [0.1, 0.05, 0.025];
    let beta = 0.5;
    let ent = representation_slope(&Generator::Entropic { beta }, 0.2, 0.3, 1.5, &eps, None, 1.0, &pde, 1e-8).unwrap();
    let exact = ent.series.iter().map(|p| (p.value - beta * 2.25).abs()).fold(0.0, f64::max);
    let g = Generator::PureQuadratic { k: ScalarFn::TanhAffine { a: 0.4, b: -0.1 } };
    let r = representation_slope(&g, 0.0, 1.0, 1.0, &eps, None, 1.0, &pde, 1e-3).unwrap();
    let target = 0.4 - 0.1 * 1f64.tanh();
    let lim = (r.metric("limit").unwrap() - target).abs();
    outcome(exact <= 1e-8 && lim <= 1e-3, format!("entropic per-eps error {exact:.1e} (tol 1e-8); state-dependent limit error {lim:.1e} (tol 1e-3)"))
}

fn c11_gateaux() -> Outcome {
    let pde = PdeConfig::default();
    let x = MarkovPayoff::terminal(PayoffFn::tanh(), 1.0);
    let r = gateaux_check(&Generator::Entropic { beta: 0.5 }, 0.0, &x, &[0.2, 0.1, 0.05, 0.025], &pde, 1e-6).unwrap();
    let mean = simpson(|z| z.tanh());
    let coeff = 0.5 * (simpson(|z| z.tanh().powi(2)) - mean * mean);
    let fitted = r.metric("error_slope").unwrap();
    let rel = (fitted - coeff).abs() / coeff;
    let base = FieldSpec::Constructed { f0: ScalarFn::Const { c: 0.05 }, grid: FlowGridSpec::default() };
    let dq = GeneratorSpec::DriftQuadratic { h: DriftFunction::Linear { a: 0.1, b: 0.0 }, f: base }.resolve(1.0).unwrap();
    let x2 = MarkovPayoff::terminal(PayoffFn::Tanh { amplitude: 1.0, scale: 1.0, shift: 0.5 }, 1.0);
    let r2 = gateaux_check(&dq, 0.3, &x2, &[0.1, 0.05, 0.025], &pde, 1e-3).unwrap();
    let oracle = 0.1f64.exp() * simpson(|z| (z + 0.5).tanh());
    let dq_err = (r2.metric("limit").unwrap() - oracle).abs();
    outcome(
        rel <= 0.2 && dq_err <= 1e-3,
        format!("entropic error slope {fitted:.4} vs {coeff:.4} (rel {rel:.1e}, tol 0.2); drift-quadratic limit error {dq_err:.1e} (tol 1e-3)"),
    )
}

fn c12_cons1() -> Outcome {
    let tg = unit_grid(100);
    let paths = sample_paths(&tg, 1, 2000, 11).unwrap();
    let li_variants = [
        Generator::Entropic { beta: 0.5 },
        Generator::RandomDriftQuadratic {
            drift: DriftProcessSpec::SignedWindow {
                t_obs: 0.25,
                shape: TimeFn::SignedPulse { start: 0.5, mid: 0.7, end: 0.9 },
                clamp: ScalarFn::tanh(),
            },
            beta: 0.5,
        },
        Generator::ItoWentzell { r: TimeFn::SinBump { amplitude: 0.5, horizon: 1.0 }, psi_b: ScalarFn::tanh(), horizon: 1.0 },
    ];
    let li_sup = li_variants.iter().map(|g| cons1_check(g, 0.2, &paths, 1e-6).unwrap().sup_gap).fold(0.0, f64::max);
    let pd = Generator::RandomDriftQuadratic { drift: DriftProcessSpec::PersistentDrift { t_obs: 0.25, clamp: ScalarFn::tanh() }, beta: 0.5 };
    const THRESHOLD: f64 = 0.05;
    let ctl = cons1_check(&pd, 0.2, &paths, 1e-6).unwrap().sup_gap;
    outcome(li_sup <= 1e-6 && ctl >= THRESHOLD, format!("LI variants sup |LHS - RHS| {li_sup:.1e} (tol 1e-6); persistent-drift control {ctl:.3} (threshold {THRESHOLD})"))
}

fn c13_brownian_invariance() -> Outcome {
    let base = InvarianceParams::default();
    let pass = brownian_invariance_check(&base).unwrap();
    let neg = brownian_invariance_check(&InvarianceParams { mismatched_clip: true, ..base }).unwrap();
    let (p, q) = (pass.metric("p_value").unwrap(), neg.metric("p_value").unwrap());
    outcome(p > 0.01 && q < 1e-3, format!("scaling identity p = {p:.3} (> 0.01); mismatched clip p = {q:.1e} (< 1e-3); seed {}", pass.seed.unwrap()))
}

fn c14_ito_wentzell() -> Outcome {
    let g = Generator::ItoWentzell { r: TimeFn::SinBump { amplitude: 0.5, horizon: 1.0 }, psi_b: ScalarFn::tanh(), horizon: 1.0 };
    let c = ito_wentzell_check(&g, &PayoffFn::tanh(), &[100, 200, 400], 2000, 5).unwrap();
    let oracle = simpson(|z| z.tanh().exp()).ln();
    let li = li_gap(&g, &PayoffPair::Reflection { phi: PayoffFn::tanh() }, 1.0, &EngineConfig::default()).unwrap();
    let value_err = (li.value - oracle).abs().max((c.levels[2].value_estimate - oracle).abs());
    let res: Vec<String> = c.levels.iter().map(|l| format!("{:.2e}", l.residual_rms)).collect();
    outcome(
        value_err <= 1e-3 && c.monotone,
        format!("value error {value_err:.1e} (tol 1e-3); residual RMS at dt = 1/100, 1/200, 1/400: {}", res.join(", ")),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("entropic agreement", c1_entropic_agreement),
        ("psi closed forms", c2_psi_closed_forms),
        ("characteristics flow", c3_characteristics),
        ("PDE constraint on f", c4_pde_constraint),
        ("transfer identity", c5_transfer_identity),
        ("certainty equivalent", c6_certainty_equivalent),
        ("LI dichotomy", c7_li_dichotomy),
        ("random-drift dichotomy", c8_random_drift),
        ("shortfall classification", c9_shortfall),
        ("representation limit", c10_representation),
        ("Gateaux derivative", c11_gateaux),
        ("cons1 identity", c12_cons1),
        ("Brownian invariance", c13_brownian_invariance),
        ("Ito-Wentzell construction", c14_ito_wentzell),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<27} {}  {} [{:.1} s]",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
