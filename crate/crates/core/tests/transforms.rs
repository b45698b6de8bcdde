use std::sync::Arc;

use proptest::prelude::*;
use qbsde_core::functions::ScalarFn;
use qbsde_core::stochastic::TimeGrid;
use qbsde_core::transforms::*;

fn grid(n: usize) -> TimeGrid {
    TimeGrid::uniform(0.0, 1.0, n).unwrap()
}

fn linear(a: f64) -> DriftFunction {
    DriftFunction::Linear { a, b: 0.0 }
}

#[test]
fn zero_drift_is_identity_flow() {
    let flow = solve_characteristics(&DriftFunction::Zero, &grid(20), &YRange::new(-3.0, 3.0, 61).unwrap()).unwrap();
    for i in 0..=20 {
        for j in 0..61 {
            let y = -3.0 + 0.1 * j as f64;
            assert!((flow.v_node(i, j) - y).abs() < 1e-14);
            assert!((flow.dv_node(i, j) - 1.0).abs() < 1e-14);
            assert!(flow.ddv_node(i, j).abs() < 1e-14);
        }
    }
}

#[test]
fn linear_drift_flow_matches_closed_form() {
    let a = 0.1;
    let range = YRange::new(-3.0, 3.0, 121).unwrap();
    let flow = solve_characteristics(&linear(a), &grid(100), &range).unwrap();
    let mut worst: f64 = 0.0;
    for (i, t) in flow.time_grid().nodes().iter().enumerate() {
        for j in 0..range.n {
            let y = range.node(j);
            worst = worst.max((flow.v_node(i, j) - y * (a * t).exp()).abs());
            worst = worst.max((flow.dv_node(i, j) - (a * t).exp()).abs());
            worst = worst.max(flow.ddv_node(i, j).abs());
        }
    }
    assert!(worst < 1e-8, "worst {worst}");
    // v(0, y) = y exactly at nodes.
    for j in 0..range.n {
        assert_eq!(flow.v_node(0, j), range.node(j));
    }
    // Off-node interpolation.
    assert!((flow.v(0.505, 0.37) - 0.37 * (0.0505f64).exp()).abs() < 1e-7);
    assert!((flow.dt_v(0.5, 1.0) - a * (0.05f64).exp()).abs() < 1e-6);
}

#[test]
fn flow_bounds_respect_gronwall_envelope() {
    let flow = solve_characteristics(&linear(0.1), &grid(100), &YRange::new(-3.0, 3.0, 121).unwrap()).unwrap();
    assert!(flow.m1() >= (-0.1f64).exp() * (1.0 - 1e-6));
    assert!(flow.big_m1() <= (0.1f64).exp() * (1.0 + 1e-6));

    let h = DriftFunction::CosTanh { a: 0.7, omega: 3.0 };
    let tg = grid(200);
    let range = YRange::new(-3.0, 3.0, 121).unwrap();
    let flow = solve_characteristics(&h, &tg, &range).unwrap();
    let big_h = h.lipschitz_integral(tg.nodes());
    for (i, hi) in big_h.iter().enumerate() {
        for j in 0..range.n {
            let d = flow.dv_node(i, j);
            assert!(d >= (-hi).exp() * (1.0 - 1e-9) && d <= hi.exp() * (1.0 + 1e-9));
        }
    }
}

#[test]
fn flow_inverse_and_transport_residual() {
    let h = DriftFunction::Tanh { a: 0.8 };
    let range = YRange::new(-3.0, 3.0, 241).unwrap();
    let flow = solve_characteristics(&h, &grid(200), &range).unwrap();
    let mut worst: f64 = 0.0;
    for (i, t) in flow.time_grid().nodes().iter().enumerate() {
        for j in 0..range.n {
            worst = worst.max((flow.v_inv(*t, flow.v_node(i, j)) - range.node(j)).abs());
        }
    }
    assert!(worst < 1e-8, "round trip {worst}");
    let r = flow.transport_residual();
    assert!(r < 1e-4, "transport residual {r}");
}

#[test]
fn flow_csv_and_descriptor() {
    let flow = solve_characteristics(&linear(0.1), &grid(4), &YRange::new(-1.0, 1.0, 5).unwrap()).unwrap();
    let mut buf = Vec::new();
    flow.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,y,v,dv,ddv\n"));
    assert_eq!(text.lines().count(), 1 + 5 * 5);
    let d = serde_json::to_value(flow.descriptor()).unwrap();
    assert_eq!(d["n_steps"], 4);
    assert!(d["m1"].as_f64().unwrap() > 0.0);
}

#[test]
fn psi_closed_forms() {
    let opts = PsiOptions::default();
    let id = psi_from_k(&ScalarFn::Const { c: 0.0 }, -3.0, 3.0, &opts).unwrap();
    let c = 0.4;
    let ent = psi_from_k(&ScalarFn::Const { c }, -3.0, 3.0, &opts).unwrap();
    let gauss = psi_from_k(&ScalarFn::Linear { a: -1.0, b: 0.0 }, -3.0, 3.0, &opts).unwrap();
    // erf via its series, independent of the table.
    let erf = |x: f64| {
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    };
    for k in 0..=600 {
        let u = -3.0 + 0.01 * k as f64;
        assert!((id.eval(u).unwrap() - u).abs() < 1e-12);
        let e = ((2.0 * c * u).exp() - 1.0) / (2.0 * c);
        assert!((ent.eval(u).unwrap() - e).abs() < 1e-8, "u {u}");
        assert!((ent.deriv(u).unwrap() - (2.0 * c * u).exp()).abs() < 1e-8);
        let g = std::f64::consts::PI.sqrt() / 2.0 * erf(u);
        assert!((gauss.eval(u).unwrap() - g).abs() < 1e-8, "u {u}");
        assert!((gauss.deriv(u).unwrap() - (-u * u).exp()).abs() < 1e-8);
    }
    assert_eq!(ent.eval(0.0).unwrap(), 0.0);
}

#[test]
fn psi_overflow_guard() {
    let opts = PsiOptions { cells: 256, cap: 1e6 };
    let err = psi_from_k(&ScalarFn::Const { c: 5.0 }, -3.0, 3.0, &opts).unwrap_err();
    assert!(matches!(err, qbsde_core::Error::OverflowGuard { .. }));
}

#[test]
fn psi_domain_not_containing_zero() {
    let c = 0.3;
    let psi = psi_from_k(&ScalarFn::Const { c }, 0.5, 2.0, &PsiOptions::default()).unwrap();
    let e = |u: f64| ((2.0 * c * u).exp() - 1.0) / (2.0 * c);
    assert!((psi.eval(0.5).unwrap() - e(0.5)).abs() < 1e-10);
    assert!((psi.eval(1.7).unwrap() - e(1.7)).abs() < 1e-10);
}

#[test]
fn phi_map_examples() {
    let opts = PsiOptions::default();
    let range = YRange::new(-3.0, 3.0, 121).unwrap();
    let flow0 = Arc::new(solve_characteristics(&DriftFunction::Zero, &grid(10), &range).unwrap());
    let id = Arc::new(psi_from_k(&ScalarFn::Const { c: 0.0 }, -4.0, 4.0, &opts).unwrap());
    for s in [0.0, 0.3, 1.0] {
        let m = phi_map(flow0.clone(), id.clone(), s).unwrap();
        for y in [-2.0, 0.0, 0.7] {
            assert!((m.eval(y).unwrap() - y).abs() < 1e-12);
        }
    }

    let c = 0.4;
    let flow = Arc::new(solve_characteristics(&linear(0.1), &grid(100), &range).unwrap());
    let psi = Arc::new(psi_from_k(&ScalarFn::Const { c }, -4.0, 4.0, &opts).unwrap());
    let m = phi_map(flow, psi, 1.0).unwrap();
    let u = 0.5 * (0.1f64).exp();
    let expect = ((2.0 * c * u).exp() - 1.0) / (2.0 * c);
    assert!((m.eval(0.5).unwrap() - expect).abs() < 1e-8);

    let mut buf = Vec::new();
    m.write_csv(&mut buf, 11).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 12);
}

#[test]
fn phi_map_domain_mismatch() {
    let range = YRange::new(-3.0, 3.0, 61).unwrap();
    let flow = Arc::new(solve_characteristics(&linear(0.1), &grid(10), &range).unwrap());
    let psi = Arc::new(psi_from_k(&ScalarFn::Const { c: 0.0 }, 10.0, 11.0, &PsiOptions::default()).unwrap());
    assert!(matches!(phi_map(flow, psi, 0.5), Err(qbsde_core::Error::DomainMismatch(_))));
}

#[test]
fn phi_map_round_trip_random_points() {
    use rand::{Rng, SeedableRng};
    let range = YRange::new(-3.0, 3.0, 121).unwrap();
    let flow = Arc::new(solve_characteristics(&DriftFunction::Tanh { a: 0.5 }, &grid(100), &range).unwrap());
    let psi = Arc::new(psi_from_k(&ScalarFn::TanhAffine { a: 0.1, b: 0.3 }, -5.0, 5.0, &PsiOptions::default()).unwrap());
    let m = phi_map(flow, psi, 0.6).unwrap();
    let (lo, hi) = m.domain();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let y = rng.gen_range(lo..hi);
        let back = m.inverse(m.eval(y).unwrap()).unwrap();
        assert!((back - y).abs() < 1e-7, "{y} -> {back}");
    }
}

#[test]
fn residual_examples() {
    let (a, c) = (0.1, 0.05);
    let tg = grid(50);
    let range = YRange::new(-3.0, 3.0, 61).unwrap();
    let good = pde_residual_f(&linear(a), &Field::ExpTime { c, a }, &tg, &range);
    assert!(good.max_abs() < 1e-10);
    let trivial = pde_residual_f(&DriftFunction::Zero, &Field::Const(0.3), &tg, &range);
    assert_eq!(trivial.max_abs(), 0.0);
    let bad = pde_residual_f(&linear(a), &Field::Const(c), &tg, &range);
    for v in &bad.values {
        assert!((v + a * c).abs() < 1e-14);
    }
}

#[test]
fn construct_f_linear_drift() {
    let (a, c) = (0.1, 0.05);
    let tg = grid(100);
    let range = YRange::new(-3.0, 3.0, 121).unwrap();
    let f = construct_f(&linear(a), &ScalarFn::Const { c }, &tg, &range).unwrap();
    for (i, t) in tg.nodes().iter().enumerate() {
        for j in 0..range.n {
            assert!((f.node_value(i, j) - c * (a * t).exp()).abs() < 1e-8);
        }
    }
    let r = pde_residual_f(&linear(a), &f, &tg, &range);
    assert!(r.max_abs_interior() < 1e-6);
}

#[test]
fn construct_f_without_drift_is_static() {
    let tg = grid(20);
    let range = YRange::new(-2.0, 2.0, 41).unwrap();
    let f0 = ScalarFn::TanhAffine { a: 0.2, b: -0.1 };
    let f = construct_f(&DriftFunction::Zero, &f0, &tg, &range).unwrap();
    for i in 0..=20 {
        for j in 0..41 {
            assert!((f.node_value(i, j) - f0.eval(range.node(j))).abs() < 1e-12);
        }
    }
    for y in [-1.9, -0.33, 0.0, 1.45] {
        for t in [0.0, 0.5, 0.77, 1.0] {
            assert!((f.value(t, y) - f0.eval(y)).abs() < 1e-6);
            assert!(f.dt(t, y).abs() < 1e-12);
        }
    }
}

#[test]
fn construct_f_passes_residual_for_nonlinear_drifts() {
    let tg = grid(200);
    let range = YRange::new(-3.0, 3.0, 241).unwrap();
    for (h, f0) in [
        (DriftFunction::Tanh { a: 0.5 }, ScalarFn::Const { c: 0.1 }),
        (DriftFunction::CosTanh { a: 0.4, omega: 2.0 }, ScalarFn::TanhAffine { a: 0.2, b: -0.1 }),
        (DriftFunction::Linear { a: -0.2, b: 0.5 }, ScalarFn::TanhAffine { a: 0.1, b: -0.05 }),
    ] {
        let f = construct_f(&h, &f0, &tg, &range).unwrap();
        let r = pde_residual_f(&h, &f, &tg, &range).max_abs_interior();
        assert!(r < 1e-6, "{h:?}: residual {r}");
        // Breaking the transport equation is visible.
        let broken = Field::Table(Arc::new(f)).shifted(0.1);
        let rb = pde_residual_f(&h, &broken, &tg, &range).max_abs_interior();
        assert!(rb > 1e-3, "{h:?}: broken residual {rb}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn psi_is_increasing_and_invertible(c in -0.5f64..0.5, b in -0.5f64..0.5, u in -2.0f64..2.0) {
        let psi = psi_from_k(&ScalarFn::TanhAffine { a: c, b }, -2.5, 2.5, &PsiOptions { cells: 256, cap: 1e12 }).unwrap();
        prop_assert!(psi.derivs.iter().all(|d| *d > 0.0));
        prop_assert!(psi.values.windows(2).all(|w| w[1] > w[0]));
        let x = psi.eval(u).unwrap();
        prop_assert!((psi.eval(psi.inverse(x).unwrap()).unwrap() - x).abs() < 1e-10);
    }

    #[test]
    fn flow_derivative_stays_in_envelope(a in -1.0f64..1.0, omega in 0.0f64..4.0) {
        let h = DriftFunction::CosTanh { a, omega };
        let tg = grid(40);
        let range = YRange::new(-2.0, 2.0, 41).unwrap();
        let flow = solve_characteristics(&h, &tg, &range).unwrap();
        let big_h = h.lipschitz_integral(tg.nodes());
        for (i, hi) in big_h.iter().enumerate() {
            for j in 0..range.n {
                let d = flow.dv_node(i, j);
                prop_assert!(d > 0.0);
                prop_assert!(d >= (-hi).exp() * (1.0 - 1e-9) && d <= hi.exp() * (1.0 + 1e-9));
            }
        }
    }
}

mod transfer {
    use super::*;
    use qbsde_core::functions::PayoffFn;
    use qbsde_core::generators::Generator;
    use qbsde_core::pde_solver::{SchemeParams, SpatialGrid};

    fn gap(h: &DriftFunction, f: Field, nt: usize, nx: usize) -> TransferGap {
        let tg = grid(nt);
        let flow = solve_characteristics(h, &tg, &YRange::new(-4.0, 4.0, 161).unwrap()).unwrap();
        let g = Generator::DriftQuadratic { h: h.clone(), f };
        let sg = SpatialGrid::new(-6.0, 6.0, nx).unwrap();
        transfer_identity_gap(&g, &flow, &PayoffFn::tanh(), &tg, &sg, &SchemeParams::default()).unwrap()
    }

    #[test]
    fn identity_flow_has_no_gap() {
        let r = gap(&DriftFunction::Zero, Field::Const(0.3), 100, 201);
        assert!(r.gap <= 1e-6, "{r:?}");
    }

    #[test]
    fn linear_drift_gap_is_small_and_converges() {
        let h = linear(0.1);
        let f = Field::ExpTime { c: 0.05, a: 0.1 };
        let coarse = gap(&h, f.clone(), 100, 201);
        let fine = gap(&h, f, 200, 401);
        assert!(fine.gap <= 1e-3);
        assert!(coarse.gap / fine.gap >= 1.8, "{coarse:?} {fine:?}");
        // Here g̃ = 0.05|z̃|² and v(T, φ) = e^{0.1}φ: a quadrature oracle.
        let gh = qbsde_core::stochastic::gauss_hermite(80).unwrap();
        let oracle = 10.0 * gh.expect(|x| (0.1 * (0.1f64).exp() * x.tanh()).exp()).ln();
        assert!((fine.transformed - oracle).abs() < 1e-5, "{} vs {oracle}", fine.transformed);
    }

    #[test]
    fn nonlinear_drift_with_constructed_f() {
        let h = DriftFunction::Tanh { a: 0.3 };
        let tg = grid(200);
        let f = construct_f(&h, &ScalarFn::Const { c: 0.1 }, &tg, &YRange::new(-4.0, 4.0, 161).unwrap()).unwrap();
        let r = gap(&h, Field::Table(Arc::new(f)), 200, 401);
        assert!(r.gap <= 1e-3, "{r:?}");
    }

    #[test]
    fn transfer_rejects_other_generators() {
        let tg = grid(10);
        let flow = solve_characteristics(&DriftFunction::Zero, &tg, &YRange::new(-2.0, 2.0, 41).unwrap()).unwrap();
        let sg = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let r = transfer_identity_gap(&Generator::Entropic { beta: 0.5 }, &flow, &PayoffFn::tanh(), &tg, &sg, &SchemeParams::default());
        assert!(matches!(r, Err(qbsde_core::Error::VariantMismatch(_))));
    }
}
