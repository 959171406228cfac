use std::num::NonZeroUsize;

use approx::assert_abs_diff_eq;
use fbp_core::constants::*;
use fbp_core::control::{ControlProblem, DataFunction, ProblemData};
use fbp_core::femcore::{
    a_on_points, BoundaryCurve, BulkQuadrature, ControlProfile, IntervalMesh, SquareMesh,
};
use fbp_core::state::{solve_state, SolverConfig};
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, SymmetricEigen};

#[test]
fn ca_at_the_flat_point_is_one() {
    for x2 in [0.0, 0.3, 1.0] {
        let (a, _, _) = ca_parts_at(0.0, 0.0, x2, MatrixNorm::Spectral).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        let (a, _, _) = ca_parts_at(0.0, 0.0, x2, MatrixNorm::EntryMax).unwrap();
        assert_eq!(a, 1.0);
    }
}

#[test]
fn ca_parts_at_the_extreme_corner() {
    // phi = 4, phi_a = -8, phi_b = 4, phi_aa = 32, phi_ab = -8, phi_bb = 4.
    for slope in [1.0, -1.0] {
        let (a, da, d2a) = ca_parts_at(-0.5, slope, 1.0, MatrixNorm::EntryMax).unwrap();
        assert_abs_diff_eq!(a, 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(da, 8.0, epsilon = 1e-13);
        assert_abs_diff_eq!(d2a, 32.0 / 4.0 + 8.0 + 4.0, epsilon = 1e-12);
    }
    let r = analytic_ca(10, MatrixNorm::EntryMax).unwrap();
    assert_abs_diff_eq!(r.a_part, 4.0, epsilon = 1e-13);
    assert_abs_diff_eq!(r.value, 32.0, epsilon = 1e-12);
    // [[1/2, -1], [-1, 4]] has trace 9/2 and determinant 1.
    let s = analytic_ca(10, MatrixNorm::Spectral).unwrap();
    assert_abs_diff_eq!(s.a_part, (4.5 + 16.25f64.sqrt()) / 2.0, epsilon = 1e-12);
}

#[test]
fn ca_is_grid_stable() {
    let a = analytic_ca(20, MatrixNorm::Spectral).unwrap().value;
    let b = analytic_ca(40, MatrixNorm::Spectral).unwrap().value;
    assert!((a - b).abs() < 1e-3);
}

#[test]
fn alpha_defaults() {
    assert_eq!(default_alpha(1.0), 2.0);
    assert_eq!(default_alpha(2.0), 1.0);
    let mut last = f64::INFINITY;
    for k in [1.0, 10.0, 100.0, 1e6] {
        let a = default_alpha(k);
        assert!(a > 0.0 && a < last);
        last = a;
    }
}

#[test]
fn beta_is_one_for_the_flat_riesz_case() {
    for n in [4, 8, 16] {
        let b = estimate_beta(n, 2.0, &BoundaryCurve::zeros(n), &BetaConfig::default()).unwrap();
        assert_abs_diff_eq!(b.beta, 1.0, epsilon = 1e-6);
    }
}

/// Largest singular value of the flux-to-gradient map in the weighted
/// `L^2` inner product, assembled densely.
fn dense_beta_p2(n: usize, curve: &BoundaryCurve<f64>) -> f64 {
    let sq = SquareMesh::new(n).unwrap();
    let quad = BulkQuadrature::new(sq);
    let coeffs = a_on_points(curve, &quad).unwrap();
    let free: Vec<usize> = (0..sq.n_nodes()).filter(|&k| !sq.is_boundary(k)).collect();
    let mut col = vec![usize::MAX; sq.n_nodes()];
    for (c, &k) in free.iter().enumerate() {
        col[k] = c;
    }
    let m = 2 * quad.len();
    // D maps free nodal values to sqrt(w)-scaled gradients at the points.
    let mut d = DMatrix::<f64>::zeros(m, free.len());
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (k, q) in quad.points.iter().enumerate() {
        let sw = q.weight.sqrt();
        for l in 0..4 {
            if col[q.nodes[l]] != usize::MAX {
                d[(2 * k, col[q.nodes[l]])] += sw * q.grad[l][0];
                d[(2 * k + 1, col[q.nodes[l]])] += sw * q.grad[l][1];
            }
        }
        let c = coeffs[k];
        a[(2 * k, 2 * k)] = c.a11;
        a[(2 * k, 2 * k + 1)] = c.a12;
        a[(2 * k + 1, 2 * k)] = c.a21;
        a[(2 * k + 1, 2 * k + 1)] = c.a22;
    }
    let k = d.transpose() * &a * &d;
    let t = &d * k.try_inverse().unwrap() * d.transpose();
    let sym = t.transpose() * &t;
    SymmetricEigen::new(sym).eigenvalues.max().sqrt()
}

#[test]
fn beta_matches_dense_singular_value_for_p2() {
    let n = 4;
    let mesh = IntervalMesh::new(n).unwrap();
    let curve = BoundaryCurve::from_fn(mesh, |x: f64| 0.4 * x * (1.0 - x));
    let est = estimate_beta(n, 2.0, &curve, &BetaConfig::default()).unwrap().beta;
    let oracle = dense_beta_p2(n, &curve);
    assert!((est - oracle).abs() < 1e-6 * oracle, "{est} {oracle}");
    assert!(oracle > 1.0);
}

#[test]
fn beta_is_refinement_stable_and_finite_on_probes() {
    let cfg = BetaConfig::default();
    let zero = |n| BoundaryCurve::zeros(n);
    let b16 = estimate_beta(16, 4.0, &zero(16), &cfg).unwrap().beta;
    let b32 = estimate_beta(32, 4.0, &zero(32), &cfg).unwrap().beta;
    assert!((b16 - b32).abs() / b32 < 0.05, "{b16} {b32}");
    for c in beta_probe_curves(8) {
        let b = estimate_beta(8, 4.0, &c, &cfg).unwrap().beta;
        assert!(b.is_finite() && b >= 1.0 - 1e-9 && b < 10.0, "{b}");
    }
}

#[test]
fn hat_extension_ratio_by_column_quadrature() {
    // grad E zeta = (zeta' x2, zeta); integrate with the 2x2 Gauss rule.
    let (n, k, q) = (8usize, 3usize, 4.0 / 3.0);
    let h = 1.0 / n as f64;
    let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut acc = 0.0;
    for (e, slope) in [(k - 1, 0.5 / h), (k, -0.5 / h)] {
        for gx in g {
            let x = (e as f64 + gx) * h;
            let zeta = if e == k - 1 { slope * (x - (k - 1) as f64 * h) } else { 0.5 + slope * (x - k as f64 * h) };
            for row in 0..n {
                for gy in g {
                    let x2 = (row as f64 + gy) * h;
                    let mag = ((slope * x2).powi(2) + zeta * zeta).sqrt();
                    acc += 0.25 * h * h * mag.powf(q);
                }
            }
        }
    }
    let oracle = acc.powf(1.0 / q);
    let sq = SquareMesh::new(n).unwrap();
    let quad = BulkQuadrature::new(sq);
    let got = extension_norm(&plateau(n, k - 1, k), q, ExtensionKind::Linear, None, &quad).unwrap();
    assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
}

#[test]
fn ce_is_at_least_one() {
    for kind in [ExtensionKind::Linear, ExtensionKind::Harmonic] {
        for q in [1.2, 1.5, 1.9] {
            assert!(compute_ce(8, q, kind).unwrap().value >= 1.0);
        }
    }
}

#[test]
fn harmonic_ce_is_refinement_stable() {
    for q in [4.0 / 3.0, 1.5] {
        let a = compute_ce(16, q, ExtensionKind::Harmonic).unwrap();
        let b = compute_ce(32, q, ExtensionKind::Harmonic).unwrap();
        assert!((a.value - b.value).abs() / b.value <= 0.10);
        assert!((a.max_ratio - b.max_ratio).abs() / b.max_ratio <= 0.10, "{a:?} {b:?}");
    }
}

#[test]
fn linear_lifting_ratio_grows_under_refinement() {
    // The ramp of E zeta carries |zeta'| x2 over a whole column, so the
    // W^{1,1} -> W^{1,q} ratio grows like h^{(1-q)/q}.
    let q = 4.0 / 3.0;
    let r: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| compute_ce(n, q, ExtensionKind::Linear).unwrap().max_ratio)
        .collect();
    assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
    assert!(r[2] / r[1] > 1.1, "{r:?}");
}

fn gl(n: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(n).unwrap())
}

#[test]
fn gagliardo_vanishes_for_constant_slopes() {
    let slopes = vec![0.7; 9];
    for field in [SlopeField::PiecewiseConstant, SlopeField::Recovered] {
        assert_eq!(gagliardo_slopes(&slopes, 0.75, 4.0, field).unwrap(), 0.0);
    }
}

#[test]
fn gagliardo_is_homogeneous() {
    let mesh = IntervalMesh::new(8).unwrap();
    let c = BoundaryCurve::from_fn(mesh, |x: f64| (3.0 * x).sin() * x * (1.0 - x));
    for (s, field) in [(0.2, SlopeField::PiecewiseConstant), (0.75, SlopeField::Recovered)] {
        let a = gagliardo_seminorm(&c, s, 4.0, field).unwrap();
        let b = gagliardo_seminorm(&c.scaled(2.0), s, 4.0, field).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-13 * b, "{a} {b}");
    }
}

#[test]
fn hat_on_two_elements() {
    let c = BoundaryCurve::from_values(vec![0.0, 0.25, 0.0]).unwrap();
    // Recovered slope 0.5 (1 - 2x): the integrand is identically 1.
    let r = gagliardo_seminorm(&c, 0.5, 2.0, SlopeField::Recovered).unwrap();
    assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
    // A jump is not in W^{1/2,2}.
    let pc = gagliardo_seminorm(&c, 0.5, 2.0, SlopeField::PiecewiseConstant).unwrap();
    assert!(pc.is_infinite());
}

#[test]
fn piecewise_constant_step_against_one_dimensional_quadrature() {
    // Step of height 2 at 1/2, sigma = 1 + s p < 2.
    let (s, p) = (0.3, 2.0);
    let sigma = 1.0 + s * p;
    // With t = 1/2 - x the inner integral is ((1/2 + t)^{1-sigma} - t^{1-sigma}) / (1 - sigma);
    // the singular half integrates in closed form.
    let smooth = gl(20).integrate(0.0, 0.5, |t| (0.5 + t).powf(1.0 - sigma));
    let singular = 0.5f64.powf(2.0 - sigma) / (2.0 - sigma);
    let outer = (smooth - singular) / (1.0 - sigma);
    let oracle = (2.0 * 2f64.powf(p) * outer).powf(1.0 / p);
    let got = gagliardo_piecewise_constant(&[1.0, -1.0], s, p).unwrap();
    assert!((got - oracle).abs() < 1e-9 * oracle, "{got} {oracle}");
}

/// Brute-force double integral for a P1 field, refining every cell pair
/// geometrically toward the diagonal corner it touches.
fn dense_gagliardo_p1(nodal: &[f64], s: f64, p: f64) -> f64 {
    let n = nodal.len() - 1;
    let h = 1.0 / n as f64;
    let sigma = 1.0 + s * p;
    let g = |x: f64| {
        let e = ((x / h) as usize).min(n - 1);
        let t = x / h - e as f64;
        nodal[e] * (1.0 - t) + nodal[e + 1] * t
    };
    let rule = gl(10);
    // A different inner order keeps nodes off the diagonal of same-cell squares.
    let inner = gl(11);
    let f = |x: f64, y: f64| {
        let d = (x - y).abs();
        if d == 0.0 { 0.0 } else { (g(x) - g(y)).abs().powf(p) / d.powf(sigma) }
    };
    let rect = |x0: f64, x1: f64, y0: f64, y1: f64| {
        rule.integrate(x0, x1, |x| inner.integrate(y0, y1, |y| f(x, y)))
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let (c, d) = (j as f64 * h, (j + 1) as f64 * h);
            if i == j {
                // Split along the diagonal into graded squares and strips.
                let mut acc = 0.0;
                let m = 64;
                for u in 0..m {
                    for v in 0..m {
                        let (x0, x1) = (a + u as f64 * h / m as f64, a + (u + 1) as f64 * h / m as f64);
                        let (y0, y1) = (c + v as f64 * h / m as f64, c + (v + 1) as f64 * h / m as f64);
                        acc += rect(x0, x1, y0, y1);
                    }
                }
                total += acc;
            } else if i + 1 == j || j + 1 == i {
                let corner = if i < j { b } else { a };
                let (sx, sy) = if i < j { (-1.0, 1.0) } else { (1.0, -1.0) };
                let mut acc = 0.0;
                let mut r = h;
                for _ in 0..40 {
                    let r2 = 0.5 * r;
                    let (px0, px1) = (corner + sx * r2, corner + sx * r);
                    let (py0, py1) = (corner + sy * r2, corner + sy * r);
                    let (qx0, qx1) = (corner, corner + sx * r2);
                    let (qy0, qy1) = (corner, corner + sy * r2);
                    let lohi = |u: f64, v: f64| if u < v { (u, v) } else { (v, u) };
                    let (ax0, ax1) = lohi(px0, px1);
                    let (ay0, ay1) = lohi(py0, py1);
                    let (bx0, bx1) = lohi(qx0, qx1);
                    let (by0, by1) = lohi(qy0, qy1);
                    acc += rect(ax0, ax1, ay0, ay1) + rect(ax0, ax1, by0, by1) + rect(bx0, bx1, ay0, ay1);
                    r = r2;
                }
                total += acc;
            } else {
                total += rect(a, b, c, d);
            }
        }
    }
    total.powf(1.0 / p)
}

#[test]
fn recovered_seminorm_against_dense_quadrature() {
    let nodal = [0.3, -0.2, 0.5, 0.1, -0.4];
    for (s, p) in [(0.5, 2.0), (0.75, 4.0)] {
        let got = gagliardo_p1(&nodal, s, p).unwrap();
        let oracle = dense_gagliardo_p1(&nodal, s, p);
        assert!((got - oracle).abs() < 1e-6 * oracle, "s={s} p={p}: {got} {oracle}");
    }
}

fn lipschitz_problem(v: &str, weight_factor: f64) -> ControlProblem<f64> {
    let mut d = ProblemData::new(1.0, 0.1, 4.0);
    d.v = DataFunction::expr(v).unwrap();
    let cfg = SolverConfig {
        weight_factor,
        ..SolverConfig::default()
    };
    ControlProblem::new(&d, 8, 0.5, cfg).unwrap()
}

fn unit_ledger() -> ConstantsLedger {
    ConstantsLedger::new(1.0, 0.1, 4.0, 2.0, 1.0, 1.0, 1.0, 0.75, 0.5)
}

#[test]
fn equal_controls_are_skipped() {
    let cp = lipschitz_problem("0", 2.0);
    let u = ControlProfile::constant(8, 0.2);
    assert!(lipschitz_quotient(LipschitzKind::G, &cp, &u, &u, &u).unwrap().is_none());
}

#[test]
fn linear_case_reports_a_vacuous_bound() {
    let cp = lipschitz_problem("0", 2.0);
    let rep = measure_lipschitz(LipschitzKind::G, &cp, &unit_ledger(), 6, 11).unwrap();
    assert!(rep.vacuous);
    assert_eq!(rep.reference, Some(0.0));
    assert!(rep.within_bound.is_none());
    assert_eq!(rep.weight, 1e-8);
    // y = 0 and the quotient is the floored weight times ||gamma'||_inf / ||u||.
    let u = ControlProfile::constant(8, 0.3);
    let z = ControlProfile::zeros(8);
    let (s, _) = solve_state(&cp.state, &u).unwrap();
    let expect = 1e-8 * s.gamma.slopes().iter().fold(0.0f64, |m, x| m.max(x.abs())) / 0.3;
    let got = lipschitz_quotient(LipschitzKind::G, &cp, &u, &z, &u).unwrap().unwrap();
    assert!((got - expect).abs() < 1e-12 * expect);
    assert!(rep.observed > 0.0 && rep.observed.is_finite());
}

#[test]
fn observed_constant_respects_the_formula_under_feasibility() {
    let ledger = unit_ledger();
    let cp = lipschitz_problem("0.01*x2*sin(pi*x1)", ledger.weight_factor());
    let rep = measure_lipschitz(LipschitzKind::G, &cp, &ledger, 8, 5).unwrap();
    assert!(!rep.vacuous);
    assert_eq!(rep.within_bound, Some(true), "{rep:?}");
    for kind in [LipschitzKind::Gprime, LipschitzKind::Gsecond] {
        let r = measure_lipschitz(kind, &cp, &ledger, 3, 5).unwrap();
        assert!(r.observed.is_finite() && r.reference.is_none());
    }
}
