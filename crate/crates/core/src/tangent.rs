//! Linearized state system: first and second derivatives of the
//! control-to-state map and their finite-difference verification.

use serde::{Deserialize, Serialize};

use crate::coeffs::{eval_a, eval_d2a, eval_da_parts, CoeffPoint, Direction1D, Matrix2};
use crate::error::{FbpError, Result};
use crate::femcore::{
    assemble_b_gamma, bulk_coeff_points, bulk_flux_load, eval_on_points, extension_transpose,
    mass_action, BoundaryCurve, BoundaryTag, BulkField, ConstrainedSolver, ControlProfile, CsrMatrix,
    NormKind, NormedField,
};
use crate::scalar::Real;
use crate::state::{solve_state, FixedPointTrace, StatePair, StateProblem};

/// Load vectors of the two functionals on the right-hand side.
///
/// `f_omega[k]` is the bulk functional tested with the Q1 basis function of
/// node `k` (entries on the lateral and bottom edges are never read);
/// `f_gamma[j]` is the interface functional tested with the P1 hat `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRHS<T> {
    pub f_omega: Vec<T>,
    pub f_gamma: Vec<T>,
}

impl<T: Real> LinearRHS<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            f_omega: vec![T::zero(); (n + 1) * (n + 1)],
            f_gamma: vec![T::zero(); n + 1],
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            f_omega: self.f_omega.iter().map(|x| *x * a).collect(),
            f_gamma: self.f_gamma.iter().map(|x| *x * a).collect(),
        }
    }
}

pub type TangentPair<T> = StatePair<T>;

/// Everything the linearized and adjoint systems need about a base state.
#[derive(Debug, Clone)]
pub struct Linearization<'a, T> {
    pub prob: &'a StateProblem<T>,
    pub base: StatePair<T>,
    pub points: Vec<CoeffPoint<T>>,
    pub a: Vec<Matrix2<T>>,
    pub a1: Vec<Matrix2<T>>,
    pub a2: Vec<Matrix2<T>>,
    /// `grad (y + v)` of the base state at the bulk Gauss points.
    pub grad_total: Vec<[T; 2]>,
    /// Stiffness `A[gamma]` with all of the boundary eliminated.
    pub bulk_solver: ConstrainedSolver<T>,
}

impl<'a, T: Real> Linearization<'a, T> {
    pub fn new(prob: &'a StateProblem<T>, base: StatePair<T>) -> Result<Self> {
        let quad = &prob.bulk_quad;
        let points = bulk_coeff_points(&base.gamma, quad)?;
        let a = eval_on_points(quad, &points, |_, p| eval_a(p))?;
        let mut a1 = Vec::with_capacity(points.len());
        let mut a2 = Vec::with_capacity(points.len());
        for (k, p) in points.iter().enumerate() {
            let (m1, m2) = eval_da_parts(p).map_err(|e| tag_x1(e, quad.points[k].x1))?;
            a1.push(m1);
            a2.push(m2);
        }
        let total = prob.total(&base.y);
        let grad_total = quad.gradients(&total);
        let bulk_solver = prob.bulk_solver(&a, prob.boundary_mask())?;
        Ok(Self {
            prob,
            base,
            points,
            a,
            a1,
            a2,
            grad_total,
            bulk_solver,
        })
    }

    /// Value and slope of a P1 nodal curve at every bulk Gauss point.
    pub fn directions(&self, h: &[T]) -> Vec<Direction1D<T>> {
        let line = self.prob.line_quad.interpolate(h);
        self.prob
            .bulk_quad
            .points
            .iter()
            .map(|q| {
                let (v, d) = line[q.line_point];
                Direction1D::new(v, d)
            })
            .collect()
    }

    /// `DA[gamma]<h>` at every bulk Gauss point.
    pub fn da(&self, h: &[T]) -> Vec<Matrix2<T>> {
        self.directions(h)
            .iter()
            .zip(self.a1.iter().zip(&self.a2))
            .map(|(d, (a1, a2))| *a1 * d.h_val + *a2 * d.dh_val)
            .collect()
    }

    /// `(B_Omega[w, phi_k; DA<h>])_k` with `grad w` given at the points.
    pub fn da_flux_load(&self, h: &[T], grad_w: &[[T; 2]]) -> Vec<T> {
        let flux: Vec<[T; 2]> = self.da(h).iter().zip(grad_w).map(|(m, g)| m.apply(*g)).collect();
        bulk_flux_load(&self.prob.bulk_quad, &flux)
    }

    /// `(B_Omega[y + v, phi_k; D2A<h1, h2>])_k` for the base state.
    pub fn d2a_flux_load(&self, h1: &[T], h2: &[T]) -> Result<Vec<T>> {
        let d1 = self.directions(h1);
        let d2 = self.directions(h2);
        let mut flux = Vec::with_capacity(d1.len());
        for k in 0..d1.len() {
            let m = eval_d2a(&self.points[k], d1[k], d2[k])?;
            flux.push(m.apply(self.grad_total[k]));
        }
        Ok(bulk_flux_load(&self.prob.bulk_quad, &flux))
    }

    /// `(B_Omega[y, phi_k; A[gamma]])_k`.
    pub fn a_action(&self, y: &[T]) -> Vec<T> {
        self.bulk_solver.matrix().matvec(y)
    }
}

fn tag_x1<T: Real>(e: FbpError, x1: T) -> FbpError {
    match e {
        FbpError::DegenerateGeometry { one_plus_gamma, .. } => FbpError::DegenerateGeometry {
            one_plus_gamma,
            x1: x1.as_f64(),
        },
        other => other,
    }
}

fn add_into<T: Real>(a: &mut [T], b: &[T], s: T) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * *y;
    }
}

/// One step of the linearized fixed-point map.
pub fn apply_linear_t<T: Real>(lin: &Linearization<'_, T>, s: &TangentPair<T>, rhs: &LinearRHS<T>) -> Result<TangentPair<T>> {
    let prob = lin.prob;
    // interface half-step
    let mut bulk = lin.a_action(s.y.values());
    add_into(&mut bulk, &lin.da_flux_load(s.gamma.values(), &lin.grad_total), T::one());
    add_into(&mut bulk, &rhs.f_omega, -T::one());
    let et = extension_transpose(prob.square, &bulk);
    let load: Vec<T> = rhs.f_gamma.iter().zip(&et).map(|(f, e)| *f - *e).collect();
    let gamma = BoundaryCurve::from_interior(prob.gamma_solver().solve_zero(&load));
    // bulk half-step
    let mut b = lin.da_flux_load(gamma.values(), &lin.grad_total);
    for (x, f) in b.iter_mut().zip(&rhs.f_omega) {
        *x = *f - *x;
    }
    let y = BulkField::from_values(prob.square, lin.bulk_solver.solve_zero(&b), BoundaryTag::ZeroOnBoundary)?;
    Ok(StatePair { gamma, y })
}

/// Contraction iteration for the linearized system, from `(0, 0)`.
pub fn solve_linearized<T: Real>(
    lin: &Linearization<'_, T>,
    rhs: &LinearRHS<T>,
) -> Result<(TangentPair<T>, FixedPointTrace)> {
    let prob = lin.prob;
    let mut trace = FixedPointTrace::default();
    let mut cur = StatePair::zeros(prob.n());
    loop {
        let next = apply_linear_t(lin, &cur, rhs)?;
        let d = prob.w1_distance(&next, &cur).as_f64();
        trace.push(d);
        cur = next;
        if d <= prob.cfg.fp_tol {
            break;
        }
        if trace.iterations >= prob.cfg.max_iter {
            return Err(FbpError::MaxIterations {
                solver: "linearized fixed point",
                iterations: trace.iterations,
                last_increment: d,
            });
        }
    }
    trace.converged = true;
    let (rg, ro) = linear_residuals(lin, &cur, rhs);
    trace.residual_gamma = rg.as_f64();
    trace.residual_omega = ro.as_f64();
    trace.residual_ok = trace.residual_gamma <= prob.cfg.res_tol && trace.residual_omega <= prob.cfg.res_tol;
    Ok((cur, trace))
}

/// Max-norm residuals `(interface, bulk)` of the linearized system.
pub fn linear_residuals<T: Real>(lin: &Linearization<'_, T>, s: &TangentPair<T>, rhs: &LinearRHS<T>) -> (T, T) {
    let prob = lin.prob;
    let mut bulk = lin.a_action(s.y.values());
    add_into(&mut bulk, &lin.da_flux_load(s.gamma.values(), &lin.grad_total), T::one());
    add_into(&mut bulk, &rhs.f_omega, -T::one());
    let r_omega = bulk
        .iter()
        .zip(prob.boundary_mask())
        .filter(|(_, m)| !**m)
        .fold(T::zero(), |m, (b, _)| m.max(b.abs()));
    let et = extension_transpose(prob.square, &bulk);
    let kg = prob.gamma_solver().matrix().matvec(s.gamma.values());
    let n = prob.n();
    let r_gamma = (1..n).fold(T::zero(), |m, j| m.max((kg[j] + et[j] - rhs.f_gamma[j]).abs()));
    (r_gamma, r_omega)
}

/// `G'(u) h`: interface load `int h zeta`, no bulk load.
pub fn apply_gprime<T: Real>(lin: &Linearization<'_, T>, h: &ControlProfile<T>) -> Result<TangentPair<T>> {
    let n = lin.prob.n();
    let rhs = LinearRHS {
        f_omega: vec![T::zero(); (n + 1) * (n + 1)],
        f_gamma: mass_action(lin.prob.line_mesh, h.values()),
    };
    Ok(solve_linearized(lin, &rhs)?.0)
}

/// Bulk load of the second derivative for two first-order directions.
pub fn second_order_rhs<T: Real>(
    lin: &Linearization<'_, T>,
    t1: &TangentPair<T>,
    t2: &TangentPair<T>,
) -> Result<LinearRHS<T>> {
    let quad = &lin.prob.bulk_quad;
    let g1 = quad.gradients(t1.y.values());
    let g2 = quad.gradients(t2.y.values());
    let mut f = lin.da_flux_load(t2.gamma.values(), &g1);
    add_into(&mut f, &lin.da_flux_load(t1.gamma.values(), &g2), T::one());
    add_into(&mut f, &lin.d2a_flux_load(t1.gamma.values(), t2.gamma.values())?, T::one());
    for x in f.iter_mut() {
        *x = -*x;
    }
    Ok(LinearRHS {
        f_omega: f,
        f_gamma: vec![T::zero(); lin.prob.n() + 1],
    })
}

/// `G''(u)[h1, h2]` from the two first-order directions.
pub fn apply_gsecond_with<T: Real>(
    lin: &Linearization<'_, T>,
    t1: &TangentPair<T>,
    t2: &TangentPair<T>,
) -> Result<TangentPair<T>> {
    let rhs = second_order_rhs(lin, t1, t2)?;
    Ok(solve_linearized(lin, &rhs)?.0)
}

pub fn apply_gsecond<T: Real>(
    lin: &Linearization<'_, T>,
    h1: &ControlProfile<T>,
    h2: &ControlProfile<T>,
) -> Result<TangentPair<T>> {
    let (t1, t2) = rayon::join(|| apply_gprime(lin, h1), || apply_gprime(lin, h2));
    apply_gsecond_with(lin, &t1?, &t2?)
}

/// Riesz norms `(||F_Omega||, ||F_Gamma||)` of the two load functionals in
/// the discrete `W^{1,2}_0` inner products of the square and the interval.
pub fn dual_norms<T: Real>(prob: &StateProblem<T>, rhs: &LinearRHS<T>) -> Result<(T, T)> {
    let n = prob.n();
    let mut ends = vec![false; n + 1];
    ends[0] = true;
    ends[n] = true;
    let k1 = ConstrainedSolver::new(assemble_b_gamma(prob.line_mesh, T::one()), ends)?;
    let rg = k1.solve_zero(&rhs.f_gamma);
    let ng: T = rg.iter().zip(&rhs.f_gamma).map(|(a, b)| *a * *b).sum();
    let flat = vec![Matrix2::identity(); prob.bulk_quad.len()];
    let k2 = prob.bulk_solver(&flat, prob.sigma_mask())?;
    let ro = k2.solve_zero(&rhs.f_omega);
    let no: T = ro
        .iter()
        .zip(&rhs.f_omega)
        .zip(prob.sigma_mask())
        .filter(|(_, m)| !**m)
        .map(|((a, b), _)| *a * *b)
        .sum();
    Ok((no.max(T::zero()).sqrt(), ng.max(T::zero()).sqrt()))
}

/// One row of a remainder table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetRow {
    pub eps: f64,
    pub remainder: f64,
    pub ratio: f64,
}

/// Derivative whose Taylor remainder [`verify_frechet`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrechetOrder {
    First,
    Second,
}

/// Remainder ratios of the first derivative
/// `|| G(u + e h) - G(u) - e G'(u) h || / (e ||h||)` or of the second
/// `|| G'(u + e h) h - G'(u) h - e G''(u) h h || / (e ||h||^2)`.
pub fn verify_frechet<T: Real>(
    prob: &StateProblem<T>,
    u: &ControlProfile<T>,
    h: &ControlProfile<T>,
    order: FrechetOrder,
    eps_ladder: &[f64],
) -> Result<Vec<FrechetRow>> {
    let hn = h.norm(NormKind::L2)?;
    let (base, _) = solve_state(prob, u)?;
    let lin = Linearization::new(prob, base.clone())?;
    let d1 = apply_gprime(&lin, h)?;
    let d2 = match order {
        FrechetOrder::First => None,
        FrechetOrder::Second => Some(apply_gsecond_with(&lin, &d1, &d1)?),
    };
    let mut rows = Vec::with_capacity(eps_ladder.len());
    for &e in eps_ladder {
        let et = T::of(e);
        let up = u.axpy(et, h);
        let (moved, _) = solve_state(prob, &up)?;
        let rem = match order {
            FrechetOrder::First => {
                let g: Vec<T> = combine(moved.gamma.values(), base.gamma.values(), d1.gamma.values(), et);
                let y: Vec<T> = combine(moved.y.values(), base.y.values(), d1.y.values(), et);
                prob.w1_norm(&g, &y)
            }
            FrechetOrder::Second => {
                let lin_m = Linearization::new(prob, moved)?;
                let dm = apply_gprime(&lin_m, h)?;
                let d2 = d2.as_ref().expect("second-order direction");
                let g: Vec<T> = combine(dm.gamma.values(), d1.gamma.values(), d2.gamma.values(), et);
                let y: Vec<T> = combine(dm.y.values(), d1.y.values(), d2.y.values(), et);
                prob.w1_norm(&g, &y)
            }
        };
        let denom = match order {
            FrechetOrder::First => et * hn,
            FrechetOrder::Second => et * hn * hn,
        };
        let ratio = if denom > T::zero() { rem / denom } else { T::zero() };
        rows.push(FrechetRow {
            eps: e,
            remainder: rem.as_f64(),
            ratio: ratio.as_f64(),
        });
    }
    Ok(rows)
}

fn combine<T: Real>(a: &[T], b: &[T], c: &[T], e: T) -> Vec<T> {
    a.iter().zip(b).zip(c).map(|((a, b), c)| *a - *b - e * *c).collect()
}

/// Dense matrix of the map `h -> gamma'(u) h` on nodal controls; column `j`
/// is the curve response to the hat at node `j`. Used by oracles.
pub fn gamma_sensitivity_matrix<T: Real>(lin: &Linearization<'_, T>) -> Result<CsrMatrix<T>> {
    let n = lin.prob.n();
    let mut trip = Vec::new();
    for j in 0..=n {
        let mut e = vec![T::zero(); n + 1];
        e[j] = T::one();
        let t = apply_gprime(lin, &ControlProfile::from_values(e))?;
        for (i, v) in t.gamma.values().iter().enumerate() {
            if *v != T::zero() {
                trip.push((i, j, *v));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n + 1, trip))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femcore::SquareMesh;
    use crate::state::SolverConfig;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn problem(n: usize, amp: f64) -> StateProblem<f64> {
        let sq = SquareMesh::new(n).unwrap();
        let v = BulkField::from_fn(sq, BoundaryTag::Free, |x1: f64, x2: f64| amp * x2 * (PI * x1).sin());
        StateProblem::new(n, 1.0, v, SolverConfig::default()).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let p = problem(8, 0.05);
        let (base, _) = solve_state(&p, &ControlProfile::constant(8, 0.1)).unwrap();
        let lin = Linearization::new(&p, base).unwrap();
        let (t, tr) = solve_linearized(&lin, &LinearRHS::zeros(8)).unwrap();
        assert_eq!(t.gamma.max_abs(), 0.0);
        assert_eq!(t.y.max_abs(), 0.0);
        assert_eq!(tr.iterations, 1);
    }

    #[test]
    fn decoupled_tangent_is_parabola() {
        let p = problem(8, 0.0);
        let (base, _) = solve_state(&p, &ControlProfile::constant(8, 0.3)).unwrap();
        let lin = Linearization::new(&p, base).unwrap();
        let t = apply_gprime(&lin, &ControlProfile::constant(8, 1.0)).unwrap();
        for (i, v) in t.gamma.values().iter().enumerate() {
            let x = i as f64 / 8.0;
            assert_abs_diff_eq!(*v, x * (1.0 - x) / 2.0, epsilon = 1e-13);
        }
        assert_eq!(t.y.max_abs(), 0.0);
        let s = apply_gsecond(&lin, &ControlProfile::constant(8, 1.0), &ControlProfile::constant(8, -0.5)).unwrap();
        assert_eq!(s.gamma.max_abs(), 0.0);
        assert_eq!(s.y.max_abs(), 0.0);
    }

    #[test]
    fn linear_in_rhs() {
        let p = problem(8, 0.05);
        let (base, _) = solve_state(&p, &ControlProfile::zeros(8)).unwrap();
        let lin = Linearization::new(&p, base).unwrap();
        let mut rhs = LinearRHS::zeros(8);
        for (k, f) in rhs.f_omega.iter_mut().enumerate() {
            *f = 1e-3 * (k as f64).sin();
        }
        for (k, f) in rhs.f_gamma.iter_mut().enumerate() {
            *f = 1e-2 * (k as f64).cos();
        }
        let (a, tr) = solve_linearized(&lin, &rhs).unwrap();
        assert!(tr.residual_ok);
        let (b, _) = solve_linearized(&lin, &rhs.scaled(2.0)).unwrap();
        for (x, y) in a.gamma.values().iter().zip(b.gamma.values()) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-12);
        }
        for (x, y) in a.y.values().iter().zip(b.y.values()) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn second_derivative_is_symmetric() {
        let p = problem(8, 0.05);
        let m = p.line_mesh;
        let (base, _) = solve_state(&p, &ControlProfile::constant(8, 0.1)).unwrap();
        let lin = Linearization::new(&p, base).unwrap();
        let h1 = ControlProfile::from_fn(m, |x: f64| (2.0 * x).cos());
        let h2 = ControlProfile::from_fn(m, |x: f64| x * x - 0.3);
        let a = apply_gsecond(&lin, &h1, &h2).unwrap();
        let b = apply_gsecond(&lin, &h2, &h1).unwrap();
        assert!(a.gamma.max_abs() > 0.0);
        for (x, y) in a.gamma.values().iter().zip(b.gamma.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
        for (x, y) in a.y.values().iter().zip(b.y.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn frechet_ladders() {
        let p = problem(8, 0.0);
        let u = ControlProfile::constant(8, 0.2);
        let h = ControlProfile::from_fn(p.line_mesh, |x: f64| (PI * x).sin());
        let rows = verify_frechet(&p, &u, &h, FrechetOrder::First, &[1e-1, 5e-2]).unwrap();
        assert!(rows.iter().all(|r| r.ratio < 1e-9));
        let zero = verify_frechet(&p, &u, &ControlProfile::zeros(8), FrechetOrder::First, &[1e-2]).unwrap();
        assert_eq!(zero[0].ratio, 0.0);

        let p = problem(8, 0.05);
        for order in [FrechetOrder::First, FrechetOrder::Second] {
            let rows = verify_frechet(&p, &u, &h, order, &[4e-2, 2e-2, 1e-2]).unwrap();
            for w in rows.windows(2) {
                let f = w[0].ratio / w[1].ratio;
                assert!(f > 1.7 && f < 2.3, "{order:?}: {rows:?}");
            }
        }
    }
}
