use fbp_core::coeffs::{eval_a, eval_d2a, eval_da, CoeffPoint, Direction1D};
use fbp_core::constants::{compute_thresholds, gagliardo_slopes, ConstantsLedger, DataNorms, SlopeField};
use fbp_core::control::{eval_gradient, eval_jsecond, project_uad, ControlProblem, ProblemData, ReducedPoint};
use fbp_core::expr::Expression;
use fbp_core::femcore::{l2_inner_1d, ControlProfile, IntervalMesh};
use fbp_core::io::fmt_f64;
use fbp_core::state::{solve_state, SolverConfig};
use fbp_core::FbpError;
use proptest::prelude::*;

fn admissible_point() -> impl Strategy<Value = CoeffPoint<f64>> {
    (-0.5f64..0.5, -1.0f64..1.0, 0.0f64..=1.0).prop_map(|(g, s, x2)| CoeffPoint::new(g, s, x2))
}

fn direction() -> impl Strategy<Value = Direction1D<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Direction1D::new(a, b))
}

fn nodal(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, n + 1)
}

proptest! {
    #[test]
    fn coefficient_has_unit_determinant_and_is_spd(p in admissible_point()) {
        let a = eval_a(&p).unwrap();
        prop_assert!((a.det() - 1.0).abs() <= 1e-14);
        prop_assert!(a.is_symmetric());
        prop_assert!(a.a11 > 0.0 && a.trace() > 0.0);
    }

    #[test]
    fn first_derivative_is_linear_in_direction(p in admissible_point(), h in direction(), k in direction(), t in -3.0f64..3.0) {
        let lhs = eval_da(&p, Direction1D::new(h.h_val + t * k.h_val, h.dh_val + t * k.dh_val)).unwrap();
        let rhs = eval_da(&p, h).unwrap() + eval_da(&p, k).unwrap() * t;
        prop_assert!((lhs - rhs).max_abs() <= 1e-12);
    }

    #[test]
    fn second_derivative_is_symmetric(p in admissible_point(), h in direction(), k in direction()) {
        let a = eval_d2a(&p, h, k).unwrap();
        let b = eval_d2a(&p, k, h).unwrap();
        prop_assert!((a - b).max_abs() <= 1e-13);
        prop_assert_eq!(a.a11, 0.0);
        prop_assert_eq!(a.a12, 0.0);
    }

    #[test]
    fn degenerate_geometry_is_rejected(g in -5.0f64..=-1.0, s in -1.0f64..1.0) {
        let r = eval_a(&CoeffPoint::new(g, s, 0.5));
        prop_assert!(matches!(r, Err(FbpError::DegenerateGeometry { .. })), "{:?}", r);
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(a in nodal(8, 2.0), b in nodal(8, 2.0), r in 0.05f64..1.5) {
        let mesh = IntervalMesh::new(8).unwrap();
        let norm = |v: &[f64]| l2_inner_1d(mesh, v, v).sqrt();
        let u = ControlProfile::from_values(a);
        let w = ControlProfile::from_values(b);
        let pu = project_uad(&u, r);
        let pw = project_uad(&w, r);
        prop_assert!(norm(pu.values()) <= r * (1.0 + 1e-12));
        let ppu = project_uad(&pu, r);
        prop_assert!(norm(ppu.axpy(-1.0, &pu).values()) <= 1e-12 * r);
        let d_in = norm(u.axpy(-1.0, &w).values());
        let d_out = norm(pu.axpy(-1.0, &pw).values());
        prop_assert!(d_out <= d_in * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn l2_pairing_is_symmetric_and_positive(a in nodal(6, 1.0), b in nodal(6, 1.0)) {
        let mesh = IntervalMesh::new(6).unwrap();
        prop_assert!((l2_inner_1d(mesh, &a, &b) - l2_inner_1d(mesh, &b, &a)).abs() <= 1e-15);
        prop_assert!(l2_inner_1d(mesh, &a, &a) >= 0.0);
    }

    #[test]
    fn ledger_completion_is_idempotent(
        beta in 0.5f64..3.0, c_a in 0.5f64..5.0, c_e in 1.0f64..3.0, alpha in 0.2f64..4.0,
        frac in 0.05f64..0.95, theta2 in 0.05f64..0.95, gd in 0.0f64..1.0, yd in 0.0f64..1.0, v in 0.0f64..1.0,
    ) {
        let lower = beta * c_a / (1.0 + beta * c_a);
        let theta1 = lower + frac * (1.0 - lower);
        let base = ConstantsLedger::new(1.0, 0.1, 4.0, alpha, beta, c_a, c_e, theta1, theta2);
        let norms = DataNorms { gamma_d_l2: gd, y_d_l2: yd, v_w1p: v };
        let once = compute_thresholds(&base, norms).unwrap();
        let twice = compute_thresholds(&once, norms).unwrap();
        prop_assert_eq!(&once, &twice);
        let d = once.derived.unwrap();
        prop_assert!(d.theta3 > 0.0 && d.v_soc > 0.0);
        let expect = d.v_invariance / d.lambda1 * (1.0 - theta2) / (1.0 - theta1);
        prop_assert!((d.v_contraction - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn theta1_at_or_below_the_lower_end_is_rejected(beta in 0.1f64..3.0, c_a in 0.1f64..5.0, shrink in 0.0f64..1.0) {
        let lower = beta * c_a / (1.0 + beta * c_a);
        let l = ConstantsLedger::new(1.0, 0.1, 4.0, 2.0, beta, c_a, 1.0, lower * shrink, 0.5);
        let rejected = matches!(compute_thresholds(&l, DataNorms::default()), Err(FbpError::ThetaRange { .. }));
        prop_assert!(rejected);
    }

    #[test]
    fn lipschitz_formula_is_linear_in_v(scale in 0.1f64..10.0, v in 0.01f64..1.0) {
        let base = ConstantsLedger::new(1.0, 0.1, 4.0, 2.0, 1.0, 1.0, 1.0, 0.75, 0.5);
        let at = |x: f64| compute_thresholds(&base, DataNorms { v_w1p: x, ..DataNorms::default() }).unwrap().derived.unwrap().l_g;
        prop_assert!((at(scale * v) - scale * at(v)).abs() <= 1e-12 * at(scale * v));
    }

    #[test]
    fn gagliardo_is_homogeneous_and_shift_invariant(slopes in prop::collection::vec(-2.0f64..2.0, 6), c in -3.0f64..3.0, t in 0.1f64..4.0) {
        let base = gagliardo_slopes(&slopes, 0.2, 3.0, SlopeField::PiecewiseConstant).unwrap();
        let scaled: Vec<f64> = slopes.iter().map(|s| s * t).collect();
        let shifted: Vec<f64> = slopes.iter().map(|s| s + c).collect();
        let a = gagliardo_slopes(&scaled, 0.2, 3.0, SlopeField::PiecewiseConstant).unwrap();
        let b = gagliardo_slopes(&shifted, 0.2, 3.0, SlopeField::PiecewiseConstant).unwrap();
        prop_assert!((a - t * base).abs() <= 1e-10 * (1.0 + a));
        prop_assert!((b - base).abs() <= 1e-10 * (1.0 + b));
    }

    #[test]
    fn polynomial_expressions_evaluate_and_differentiate(a in -3.0f64..3.0, b in -3.0f64..3.0, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
        let e = Expression::parse(&format!("{a} * x1 * x2^2 + {b} * sin(pi * x2) - x1 / 2")).unwrap();
        let pi = std::f64::consts::PI;
        let f = a * x1 * x2 * x2 + b * (pi * x2).sin() - x1 / 2.0;
        prop_assert!((e.eval(x1, x2) - f).abs() <= 1e-12);
        prop_assert!((e.d_x2(x1, x2) - (2.0 * a * x1 * x2 + b * pi * (pi * x2).cos())).abs() <= 1e-12);
        prop_assert!((e.d_x2x2(x1, x2) - (2.0 * a * x1 - b * pi * pi * (pi * x2).sin())).abs() <= 1e-11);
    }

    #[test]
    fn csv_numbers_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}

fn small_problem(v: &str, yd: &str) -> ControlProblem<f64> {
    let mut data = ProblemData::new(1.0, 0.1, 4.0);
    data.v = fbp_core::control::DataFunction::expr(v).unwrap();
    data.gamma_d = fbp_core::control::DataFunction::expr("0.1*sin(pi*x1)").unwrap();
    data.y_d = fbp_core::control::DataFunction::expr(yd).unwrap();
    ControlProblem::new(&data, 6, 1.0, SolverConfig::default()).unwrap()
}

fn smooth_control(c: &[f64]) -> ControlProfile<f64> {
    ControlProfile::from_fn(IntervalMesh::new(6).unwrap(), |x: f64| {
        c.iter().enumerate().map(|(k, a)| a * (k as f64 * std::f64::consts::PI * x).cos()).sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn zero_lift_keeps_the_bulk_at_rest(c in prop::collection::vec(-0.3f64..0.3, 3)) {
        let cp = small_problem("0", "0");
        let (s, _) = solve_state(&cp.state, &smooth_control(&c)).unwrap();
        prop_assert!(s.y.values().iter().all(|y| y.abs() <= 1e-14));
    }

    #[test]
    fn adjoint_and_sensitivity_agree(c in prop::collection::vec(-0.2f64..0.2, 3), d in prop::collection::vec(-1.0f64..1.0, 3)) {
        let cp = small_problem("0.05*x2*sin(pi*x1)", "0.02*x1*x2");
        let u = smooth_control(&c);
        let h = smooth_control(&d);
        let pt = ReducedPoint::new(&cp, &u).unwrap();
        let g = eval_gradient(&cp, &u).unwrap();
        let a = pt.inner(&g, &h);
        let s = pt.sensitivity_derivative(&h).unwrap();
        prop_assert!((a - s).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, s);
    }

    #[test]
    fn second_derivative_is_symmetric_bilinear(c in prop::collection::vec(-0.2f64..0.2, 3), d in prop::collection::vec(-1.0f64..1.0, 3), e in prop::collection::vec(-1.0f64..1.0, 3)) {
        let cp = small_problem("0.05*x2*sin(pi*x1)", "0");
        let u = smooth_control(&c);
        let h = smooth_control(&d);
        let k = smooth_control(&e);
        let hk = eval_jsecond(&cp, &u, &h, &k).unwrap();
        let kh = eval_jsecond(&cp, &u, &k, &h).unwrap();
        prop_assert!((hk - kh).abs() <= 1e-10 * (1.0 + hk.abs()));
        let twice = eval_jsecond(&cp, &u, &h.scaled(2.0), &k).unwrap();
        prop_assert!((twice - 2.0 * hk).abs() <= 1e-10 * (1.0 + twice.abs()));
    }
}
