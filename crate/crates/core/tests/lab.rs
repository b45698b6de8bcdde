use proptest::prelude::*;

use qbsde_core::functions::{PayoffFn, ScalarFn, TimeFn};
use qbsde_core::generators::*;
use qbsde_core::lab::*;
use qbsde_core::risk::MarkovPayoff;
use qbsde_core::stochastic::{sample_paths, TimeGrid};
use qbsde_core::transforms::DriftFunction;
use qbsde_core::{Error, StoppingTimeSpec};

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

/// `ψ⁻¹(E ψ(tanh(√(T/2) Z))) − E tanh(√(T/2) Z)` with `ψ(u) = (e^{2u} − 1)/2`.
fn jensen_oracle() -> f64 {
    let s = 0.5f64.sqrt();
    0.5 * simpson(|z| (2.0 * (s * z).tanh()).exp()).ln() - simpson(|z| (s * z).tanh())
}

fn time_varying() -> Generator {
    Generator::TimeVaryingQuadratic { k: TimeFn::Indicator { start: 0.0, end: 0.5, value: 1.0 } }
}

fn indicator_window() -> Generator {
    Generator::RandomDriftQuadratic {
        drift: DriftProcessSpec::IndicatorWindow {
            tau: StoppingTimeSpec::ThresholdBranch { t_obs: 0.25, t_low: 0.5, t_high: 0.75 },
            eps_w: 0.1,
        },
        beta: 0.5,
    }
}

fn persistent() -> Generator {
    Generator::RandomDriftQuadratic { drift: DriftProcessSpec::PersistentDrift { t_obs: 0.25, clamp: ScalarFn::tanh() }, beta: 0.5 }
}

fn signed_window() -> Generator {
    Generator::RandomDriftQuadratic {
        drift: DriftProcessSpec::SignedWindow {
            t_obs: 0.25,
            shape: TimeFn::SignedPulse { start: 0.5, mid: 0.7, end: 0.9 },
            clamp: ScalarFn::tanh(),
        },
        beta: 0.5,
    }
}

fn ito_wentzell() -> Generator {
    Generator::ItoWentzell { r: TimeFn::SinBump { amplitude: 0.5, horizon: 1.0 }, psi_b: ScalarFn::tanh(), horizon: 1.0 }
}

fn drift_quadratic(delta: f64) -> Generator {
    let base = FieldSpec::Constructed { f0: ScalarFn::Const { c: 0.05 }, grid: FlowGridSpec::default() };
    let f = if delta == 0.0 { base } else { FieldSpec::Shifted { base: Box::new(base), delta } };
    GeneratorSpec::DriftQuadratic { h: DriftFunction::Linear { a: 0.1, b: 0.0 }, f }.resolve(1.0).unwrap()
}

fn pure_catalog() -> Vec<Generator> {
    vec![
        Generator::PureQuadratic { k: ScalarFn::Const { c: 0.4 } },
        Generator::PureQuadratic { k: ScalarFn::TanhAffine { a: 0.4, b: -0.1 } },
        Generator::Entropic { beta: 0.5 },
    ]
}

fn pair_catalog() -> Vec<PayoffPair> {
    vec![
        PayoffPair::Reflection { phi: PayoffFn::tanh() },
        PayoffPair::IncrementShift { phi: PayoffFn::tanh(), t1: 0.5 },
        PayoffPair::BranchSwap { c: 1.0, t_obs: 0.25 },
    ]
}

fn mc(n_paths: usize, seed: u64) -> EngineConfig {
    EngineConfig { mc: McConfig { n_paths, n_steps: 20, seed }, ..EngineConfig::default() }
}

#[test]
fn li_gap_examples() {
    let cfg = EngineConfig::default();
    let pq = Generator::PureQuadratic { k: ScalarFn::Const { c: 0.4 } };
    let r = li_gap(&pq, &PayoffPair::Reflection { phi: PayoffFn::tanh() }, 1.0, &cfg).unwrap();
    assert!(r.gap <= 1e-6, "{r:?}");
    assert_eq!(r.engine, "pde");

    let oracle = jensen_oracle();
    let r = li_gap(&time_varying(), &PayoffPair::IncrementShift { phi: PayoffFn::tanh(), t1: 0.5 }, 1.0, &cfg).unwrap();
    assert!(oracle > 0.0);
    assert!((r.gap - oracle).abs() <= 1e-3 * oracle, "{} vs {oracle}", r.gap);

    for pair in pair_catalog() {
        let r = li_gap(&Generator::zero(), &pair, 1.0, &cfg).unwrap();
        assert!(r.gap <= 1e-12, "{pair:?}: {r:?}");
    }
}

#[test]
fn branch_swap_values_match_closed_form() {
    // With g ≡ 0 each branch is worth c/2.
    let r = li_gap(&Generator::zero(), &PayoffPair::BranchSwap { c: 0.8, t_obs: 0.25 }, 1.0, &EngineConfig::default()).unwrap();
    assert!((r.value - 0.4).abs() < 1e-9 && (r.value_prime - 0.4).abs() < 1e-9, "{r:?}");
    // Entropic: (1/2β) log(½e^{2βc} + ½) on both branches. The jump in the
    // payoff limits the PDE to a slow rate, hence the loose tolerance.
    let r = li_gap(&Generator::Entropic { beta: 0.5 }, &PayoffPair::BranchSwap { c: 0.8, t_obs: 0.25 }, 1.0, &EngineConfig::default()).unwrap();
    let oracle = (0.5 * 0.8f64.exp() + 0.5).ln();
    assert!((r.value - oracle).abs() < 3e-3, "{r:?} vs {oracle}");
    assert!(r.gap < 1e-12);
}

#[test]
fn random_drift_dichotomy() {
    let g = indicator_window();
    let cfg = mc(200_000, 3);
    let pair = PayoffPair::BranchSwap { c: 1.0, t_obs: 0.25 };
    let li = li_gap(&g, &pair, 1.0, &cfg).unwrap();
    let se = li.std_error.unwrap();
    assert!(li.gap <= 3.0 * se, "{li:?}");

    let (b, c, e) = (0.5f64, 1.0f64, 0.1f64);
    let oracle = ((0.5 * (2.0 * b * (c + e)).exp() + 0.5).ln() - (0.5 * (2.0 * b * c).exp() + 0.5 * (2.0 * b * e).exp()).ln()).abs() / (2.0 * b);
    let cl = clli_gap(&g, &pair, 1.0, 0.65, &cfg).unwrap();
    assert!((cl.gap - oracle).abs() <= 3.0 * cl.std_error.unwrap(), "{cl:?} vs {oracle}");
    assert!(cl.gap > 1e-2);
    // Same seed, same numbers.
    assert_eq!(clli_gap(&g, &pair, 1.0, 0.65, &cfg).unwrap(), cl);
}

#[test]
fn monte_carlo_grid_must_contain_observation_times() {
    let cfg = EngineConfig { mc: McConfig { n_paths: 10, n_steps: 3, seed: 1 }, ..EngineConfig::default() };
    let err = li_gap(&indicator_window(), &PayoffPair::BranchSwap { c: 1.0, t_obs: 0.25 }, 1.0, &cfg);
    assert!(matches!(err, Err(Error::InvalidArgument(_))));
}

#[test]
fn deterministic_clli_holds() {
    let cfg = EngineConfig::default();
    let g = Generator::Entropic { beta: 0.5 };
    for pair in pair_catalog() {
        for tp in [0.65, 1.0] {
            let r = clli_gap(&g, &pair, 1.0, tp, &cfg).unwrap();
            assert!(r.gap <= 1e-6, "{pair:?} at {tp}: {r:?}");
        }
    }
}

#[test]
fn mli_examples() {
    let cfg = EngineConfig::default();
    let pq = Generator::PureQuadratic { k: ScalarFn::Const { c: 0.4 } };
    let r = mli_gap(&pq, &PayoffFn::tanh(), 0.5, 0.5, 1.0, &cfg).unwrap();
    assert!(r.gap <= 1e-6, "{r:?}");
    let r = mli_gap(&time_varying(), &PayoffFn::tanh(), 0.5, 0.5, 1.0, &cfg).unwrap();
    assert!(r.gap > 1e-3);
    assert!((r.gap - jensen_oracle()).abs() <= 0.1 * jensen_oracle());
    assert!(mli_gap(&Generator::zero(), &PayoffFn::tanh(), 0.5, 0.5, 1.0, &cfg).unwrap().gap <= 1e-14);
    let err = mli_gap(&drift_quadratic(0.0), &PayoffFn::tanh(), 0.5, 0.5, 1.0, &cfg);
    assert!(matches!(err, Err(Error::AuditRejected(_))));
    assert!(matches!(mli_gap(&indicator_window(), &PayoffFn::tanh(), 0.5, 0.5, 1.0, &cfg), Err(Error::VariantMismatch(_))));
}

#[test]
fn pure_quadratic_catalog_is_coherent() {
    let cfg = EngineConfig::default();
    for g in pure_catalog() {
        for pair in pair_catalog() {
            let li = li_gap(&g, &pair, 1.0, &cfg).unwrap();
            let cl = clli_gap(&g, &pair, 1.0, 0.65, &cfg).unwrap();
            assert!(li.gap <= 1e-4 && cl.gap <= 1e-4, "{} {pair:?}: {li:?} {cl:?}", g.name());
        }
        let m = mli_gap(&g, &PayoffFn::tanh(), 0.5, 0.5, 1.0, &cfg).unwrap();
        assert!(m.gap <= 1e-4, "{}: {m:?}", g.name());
    }
}

#[test]
fn non_pure_quadratic_generators_are_falsified() {
    let cfg = mc(100_000, 9);
    let tol = 1e-3;
    let tv = li_gap(&time_varying(), &PayoffPair::IncrementShift { phi: PayoffFn::tanh(), t1: 0.5 }, 1.0, &cfg).unwrap();
    assert!(tv.gap >= 10.0 * tol);
    let pd = li_gap(&persistent(), &PayoffPair::BranchSwap { c: 1.0, t_obs: 0.25 }, 1.0, &cfg).unwrap();
    assert!(pd.gap >= 10.0 * tol && pd.gap > 10.0 * pd.std_error.unwrap(), "{pd:?}");
}

#[test]
fn perturbed_field_breaks_invariance() {
    let cfg = EngineConfig::default();
    let pair = PayoffPair::IncrementShift { phi: PayoffFn::Tanh { amplitude: 2.5, scale: 2.0, shift: 0.0 }, t1: 0.5 };
    let exact = li_gap(&drift_quadratic(0.0), &pair, 1.0, &cfg).unwrap();
    assert!(exact.gap <= 1e-6, "{exact:?}");
    let shifted = li_gap(&drift_quadratic(0.1), &pair, 1.0, &cfg).unwrap();
    assert!(shifted.gap >= 1e-2, "{shifted:?}");
}

#[test]
fn ito_wentzell_engine() {
    let cfg = EngineConfig::default();
    let iw = ito_wentzell();
    let log_e = simpson(|z| z.tanh().exp()).ln();
    for pair in pair_catalog() {
        let r = li_gap(&iw, &pair, 1.0, &cfg).unwrap();
        assert_eq!(r.engine, "transform");
        assert!(r.gap <= 1e-8, "{pair:?}: {r:?}");
    }
    let r = li_gap(&iw, &PayoffPair::Reflection { phi: PayoffFn::tanh() }, 1.0, &cfg).unwrap();
    assert!((r.value - log_e).abs() < 1e-10);
    // r(1/2) = 1/2: the value at 1/2 carries the ψ term.
    let r = clli_gap(&iw, &PayoffPair::Reflection { phi: PayoffFn::tanh() }, 1.0, 0.5, &cfg).unwrap();
    let s = 0.5f64.sqrt();
    let oracle = simpson(|z| ((s * z).tanh() + 0.5 * (s * z).tanh()).exp()).ln();
    assert!((r.value - oracle).abs() < 1e-10, "{r:?} vs {oracle}");
    let early = clli_gap(&iw, &PayoffPair::IncrementShift { phi: PayoffFn::tanh(), t1: 0.25 }, 1.0, 0.5, &cfg);
    assert!(matches!(early, Err(Error::ClosedFormUnavailable(_))));
}

#[test]
fn ito_wentzell_construction() {
    let c = ito_wentzell_check(&ito_wentzell(), &PayoffFn::tanh(), &[100, 200, 400], 1000, 5).unwrap();
    let log_e = simpson(|z| z.tanh().exp()).ln();
    assert!((c.entropic - log_e).abs() < 1e-10);
    assert!((c.transformed - c.entropic).abs() < 1e-12);
    assert!((c.levels[2].value_estimate - log_e).abs() < 1e-3, "{c:?}");
    assert!(c.monotone, "{c:?}");
    assert_eq!(c.levels.iter().map(|l| l.n_steps).collect::<Vec<_>>(), vec![100, 200, 400]);
    assert!(ito_wentzell_check(&ito_wentzell(), &PayoffFn::tanh(), &[200, 300], 10, 5).is_err());
    assert!(ito_wentzell_check(&Generator::zero(), &PayoffFn::tanh(), &[100], 10, 5).is_err());
}

#[test]
fn representation_examples() {
    let pde = PdeConfig::default();
    let eps = [0.1, 0.05, 0.025];
    for beta in [0.25, 0.5, 1.0] {
        let g = Generator::Entropic { beta };
        let r = representation_slope(&g, 0.2, 0.3, 1.5, &eps, None, 1.0, &pde, 1e-8).unwrap();
        for p in &r.series {
            assert!((p.value - beta * 2.25).abs() <= 1e-8, "{p:?}");
        }
    }
    let r = representation_slope(&Generator::zero(), 0.0, 0.5, 2.0, &eps, None, 1.0, &pde, 1e-12).unwrap();
    assert!(r.series.iter().all(|p| p.value.abs() < 1e-12));
    let g = Generator::PureQuadratic { k: ScalarFn::TanhAffine { a: 0.4, b: -0.1 } };
    let target = 0.4 - 0.1 * 1f64.tanh();
    for level in [None, Some(1.0)] {
        let r = representation_slope(&g, 0.0, 1.0, 1.0, &eps, level, 1.0, &pde, 1e-3).unwrap();
        assert!((r.metric("limit").unwrap() - target).abs() <= 1e-3, "{level:?}: {r:?}");
        assert!(r.verdict.passed());
    }
    assert!(representation_slope(&g, 0.0, 1.0, 1.0, &[0.05, 0.1], None, 1.0, &pde, 1e-3).is_err());
    assert!(representation_slope(&g, 0.95, 1.0, 1.0, &eps, None, 1.0, &pde, 1e-3).is_err());
}

#[test]
fn gateaux_examples() {
    let pde = PdeConfig::default();
    let x = MarkovPayoff::terminal(PayoffFn::tanh(), 1.0);
    let gamma = 1.0;
    let r = gateaux_check(&Generator::Entropic { beta: 0.5 * gamma }, 0.0, &x, &[0.2, 0.1, 0.05, 0.025], &pde, 1e-6).unwrap();
    let mean = simpson(|z| z.tanh());
    let var = simpson(|z| z.tanh().powi(2)) - mean * mean;
    assert!((r.metric("target").unwrap() - mean).abs() < 1e-12);
    assert!(r.verdict.passed());
    let coeff = 0.5 * gamma * var;
    let fitted = r.metric("error_slope").unwrap();
    assert!((fitted - coeff).abs() <= 0.2 * coeff, "{fitted} vs {coeff}");
    // Errors roughly halve with ε.
    let err: Vec<f64> = r.series.iter().map(|p| p.value - p.target).collect();
    for w in err.windows(2) {
        assert!((w[1] / w[0] - 0.5).abs() < 0.05, "{err:?}");
    }

    let c = MarkovPayoff::terminal(PayoffFn::Const { c: 0.7 }, 1.0);
    let r = gateaux_check(&Generator::Entropic { beta: 0.5 }, 0.2, &c, &[0.1, 0.05], &pde, 1e-10).unwrap();
    assert!(r.series.iter().all(|p| (p.value - 0.7).abs() < 1e-10), "{r:?}");

    // h = 0.1y: Y^y_t = y·e^{0.1(T−t)}, Γ_T = e^{0.1T}.
    let x2 = MarkovPayoff::terminal(PayoffFn::Tanh { amplitude: 1.0, scale: 1.0, shift: 0.5 }, 1.0);
    let r = gateaux_check(&drift_quadratic(0.0), 0.3, &x2, &[0.1, 0.05, 0.025], &pde, 1e-3).unwrap();
    let oracle = 0.1f64.exp() * simpson(|z| (z + 0.5).tanh());
    assert!((r.metric("target").unwrap() - oracle).abs() < 1e-8);
    assert!((r.metric("limit").unwrap() - oracle).abs() <= 1e-3, "{r:?}");
}

#[test]
fn cons1_examples() {
    let tg = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
    let paths = sample_paths(&tg, 1, 500, 11).unwrap();
    for g in [Generator::Entropic { beta: 0.5 }, drift_quadratic(0.0), signed_window(), indicator_window(), ito_wentzell()] {
        let r = cons1_check(&g, 0.2, &paths, 1e-6).unwrap();
        assert!(r.verdict.passed(), "{}: {}", g.name(), r.sup_gap);
        assert_eq!(r.lhs.len(), 500);
        assert_eq!(r.seed, Some(11));
    }
    // Pinned detection threshold for the persistent drift control.
    let r = cons1_check(&persistent(), 0.2, &paths, 1e-6).unwrap();
    assert!(r.sup_gap >= 0.05, "{}", r.sup_gap);
    // A z-linear term is detected: LHS = exp(0.3 W_1 − 0.045).
    let lin = Generator::custom("linear_z", |_, _, z| 0.3 * z + z * z);
    let r = cons1_check(&lin, 0.0, &paths, 1e-6).unwrap();
    let p = paths.path(0);
    assert!((r.lhs[0] - (0.3 * p.w1(100) - 0.045).exp()).abs() < 1e-5);
    assert!(!r.verdict.passed());
}

#[test]
fn brownian_invariance_examples() {
    let base = InvarianceParams::default();
    let r = brownian_invariance_check(&base).unwrap();
    assert!(r.metric("p_value").unwrap() > 0.01 && r.verdict.passed(), "{r:?}");
    let flipped = brownian_invariance_check(&InvarianceParams { sign: -1.0, ..base.clone() }).unwrap();
    assert!(flipped.verdict.passed());
    let same = brownian_invariance_check(&InvarianceParams { lambda: 1.0, s: 0.4, n_paths: 20_000, ..base.clone() }).unwrap();
    assert!(same.verdict.passed());
    let neg = brownian_invariance_check(&InvarianceParams { mismatched_clip: true, ..base.clone() }).unwrap();
    assert!(neg.metric("p_value").unwrap() < 1e-3, "{neg:?}");
    assert!(!neg.verdict.passed());
    assert!(brownian_invariance_check(&InvarianceParams { lambda: 1.5, ..base }).is_err());
}

#[test]
fn homogeneity_examples() {
    let samples = HomogeneitySample::default_set();
    for g in [
        Generator::PureQuadratic { k: ScalarFn::TanhAffine { a: 0.4, b: -0.1 } },
        Generator::Entropic { beta: 0.7 },
    ] {
        let r = quadratic_homogeneity_check(&g, &samples, 1e-12).unwrap();
        assert!(r.sup_gap <= 1e-14, "{}: {}", g.name(), r.sup_gap);
    }
    let g = Generator::custom("power_1_5", |_, _, z: f64| z.abs().powf(1.5));
    let r = quadratic_homogeneity_check(&g, &samples, 1e-12).unwrap();
    assert!(r.sup_gap > 0.1 && !r.verdict.passed());
    assert!(quadratic_homogeneity_check(&indicator_window(), &samples, 1e-12).is_err());
}

#[test]
fn pairs_are_equal_in_law() {
    for pair in pair_catalog() {
        let r = pair_ks_check(&pair, 1.0, 100_000, 21).unwrap();
        assert!(r.metric("p_value").unwrap() > 0.01, "{pair:?}: {r:?}");
    }
    assert!(PayoffPair::IncrementShift { phi: PayoffFn::tanh(), t1: 1.5 }.legs(1.0).is_err());
}

#[test]
fn report_json_shape() {
    let r = quadratic_homogeneity_check(&Generator::Entropic { beta: 0.5 }, &HomogeneitySample::default_set(), 1e-12).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    for key in ["test", "params", "seed", "sup_gap", "verdict"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["verdict"], "pass");
    let pair: PayoffPair = serde_json::from_str(r#"{"kind": "increment_shift", "phi": {"kind": "tanh"}, "t1": 0.5}"#).unwrap();
    assert_eq!(pair.name(), "increment_shift");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_legs_mirror(a in 0.1f64..3.0, s in 0.2f64..2.0, w in -4.0f64..4.0) {
        let pair = PayoffPair::Reflection { phi: PayoffFn::Tanh { amplitude: a, scale: s, shift: 0.3 } };
        let (x, y) = pair.legs(1.0).unwrap();
        prop_assert!((x.phi.eval(w) - y.phi.eval(-w)).abs() < 1e-15);
    }

    #[test]
    fn pure_quadratic_is_homogeneous(c in -1.0f64..1.0, y in -3.0f64..3.0, z in -5.0f64..5.0, l in 0.01f64..1.0) {
        let g = Generator::PureQuadratic { k: ScalarFn::Const { c } };
        let r = quadratic_homogeneity_check(&g, &[HomogeneitySample { t: 0.0, y, z, lambda: l }], 1e-12).unwrap();
        prop_assert!(r.sup_gap <= 1e-12);
    }
}
