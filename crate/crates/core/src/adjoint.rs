//! Adjoint system of the reduced cost: the pair `(r, s)` whose interface
//! component gives the reduced gradient.

use serde::{Deserialize, Serialize};

use crate::control::{ControlProblem, Misfit};
use crate::error::{FbpError, Result};
use crate::femcore::{bulk_load, bulk_norm, line_load, BoundaryCurve, BoundaryTag, BulkField, NormKind};
use crate::scalar::Real;
use crate::state::FixedPointTrace;
use crate::tangent::Linearization;

/// Bulk multiplier `r` (zero on the lateral and bottom edges, equal to `s`
/// on the top edge) and interface multiplier `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointPair<T> {
    pub r: BulkField<T>,
    pub s: BoundaryCurve<T>,
}

impl<T: Real> AdjointPair<T> {
    pub fn zeros(n: usize) -> Self {
        let sq = crate::femcore::SquareMesh::new(n).expect("n >= 2");
        Self {
            r: BulkField::zeros(sq, BoundaryTag::ZeroOnSigma),
            s: BoundaryCurve::zeros(n),
        }
    }
}

/// Interface loads at the interval Gauss points, paired with `zeta` and
/// `zeta'` respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointLoads<T> {
    pub f0: Vec<T>,
    pub f1: Vec<T>,
}

/// The two interface loads for a given bulk multiplier. Vertical integrals
/// use the columns of the bulk rule.
pub fn eval_f0_f1<T: Real>(
    cp: &ControlProblem<T>,
    lin: &Linearization<'_, T>,
    misfit: &Misfit<T>,
    r: &BulkField<T>,
) -> AdjointLoads<T> {
    let quad = &cp.state.bulk_quad;
    let mut f0 = cp.curve_misfit(&lin.base.gamma);
    let mut f1 = vec![T::zero(); f0.len()];
    let half = T::of(0.5);
    for (k, q) in quad.points.iter().enumerate() {
        let gr = q.gradient(r.values());
        let gw = lin.grad_total[k];
        let m = misfit.m[k];
        let a1 = lin.a1[k].form(gw, gr);
        let a2 = lin.a2[k].form(gw, gr);
        let chain = m * misfit.jac[k] * misfit.dm_dgamma[k];
        f0[q.line_point] += q.vertical_weight * (half * m * m - a1 + chain);
        f1[q.line_point] -= q.vertical_weight * a2;
    }
    AdjointLoads { f0, f1 }
}

/// Interface half-step: `s~` from the loads of `r`.
pub fn apply_adjoint_t1<T: Real>(
    cp: &ControlProblem<T>,
    lin: &Linearization<'_, T>,
    misfit: &Misfit<T>,
    r: &BulkField<T>,
) -> BoundaryCurve<T> {
    let loads = eval_f0_f1(cp, lin, misfit, r);
    let b = line_load(&cp.state.line_quad, &loads.f0, &loads.f1);
    BoundaryCurve::from_interior(cp.state.gamma_solver().solve_zero(&b))
}

/// Bulk half-step: `r~` with trace `s~` on the top edge and the weighted
/// misfit as load.
pub fn apply_adjoint_t2<T: Real>(
    cp: &ControlProblem<T>,
    lin: &Linearization<'_, T>,
    misfit: &Misfit<T>,
    s_tilde: &BoundaryCurve<T>,
) -> Result<BulkField<T>> {
    let sq = cp.state.square;
    let weighted: Vec<T> = misfit.m.iter().zip(&misfit.jac).map(|(m, j)| *m * *j).collect();
    let load = bulk_load(&cp.state.bulk_quad, &weighted);
    let mut g = vec![T::zero(); sq.n_nodes()];
    for (i, s) in s_tilde.values().iter().enumerate() {
        if i > 0 && i < sq.n() {
            g[sq.index(i, sq.n())] = *s;
        }
    }
    BulkField::from_values(sq, lin.bulk_solver.solve(&load, &g), BoundaryTag::ZeroOnSigma)
}

/// Max-norm residuals `(interface, bulk)` of the adjoint equations.
pub fn adjoint_residuals<T: Real>(
    cp: &ControlProblem<T>,
    lin: &Linearization<'_, T>,
    misfit: &Misfit<T>,
    a: &AdjointPair<T>,
) -> (T, T) {
    let loads = eval_f0_f1(cp, lin, misfit, &a.r);
    let b = line_load(&cp.state.line_quad, &loads.f0, &loads.f1);
    let ks = cp.state.gamma_solver().matrix().matvec(a.s.values());
    let n = cp.n();
    let r_gamma = (1..n).fold(T::zero(), |m, j| m.max((ks[j] - b[j]).abs()));
    let weighted: Vec<T> = misfit.m.iter().zip(&misfit.jac).map(|(m, j)| *m * *j).collect();
    let load = bulk_load(&cp.state.bulk_quad, &weighted);
    let kr = lin.a_action(a.r.values());
    let r_omega = kr
        .iter()
        .zip(&load)
        .zip(cp.state.boundary_mask())
        .filter(|(_, m)| !**m)
        .fold(T::zero(), |m, ((x, l), _)| m.max((*x - *l).abs()));
    (r_gamma, r_omega)
}

/// Fixed point of the composed half-steps from `r = 0`, measured in the
/// `W^{1,q}` seminorm of `r`.
pub fn solve_adjoint<T: Real>(
    cp: &ControlProblem<T>,
    lin: &Linearization<'_, T>,
) -> Result<(AdjointPair<T>, FixedPointTrace)> {
    let misfit = cp.misfit(&lin.base);
    solve_adjoint_with(cp, lin, &misfit)
}

pub fn solve_adjoint_with<T: Real>(
    cp: &ControlProblem<T>,
    lin: &Linearization<'_, T>,
    misfit: &Misfit<T>,
) -> Result<(AdjointPair<T>, FixedPointTrace)> {
    let prob = &cp.state;
    let q = prob.cfg.p / (prob.cfg.p - 1.0);
    let mut trace = FixedPointTrace::default();
    let mut cur = AdjointPair::zeros(cp.n());
    loop {
        let s = apply_adjoint_t1(cp, lin, misfit, &cur.r);
        let r = apply_adjoint_t2(cp, lin, misfit, &s)?;
        let dr: Vec<T> = r.values().iter().zip(cur.r.values()).map(|(a, b)| *a - *b).collect();
        let d = bulk_norm(&prob.bulk_quad, &dr, NormKind::W1p0(q))?.as_f64();
        trace.push(d);
        cur = AdjointPair { r, s };
        if d <= prob.cfg.fp_tol {
            break;
        }
        if trace.iterations >= prob.cfg.max_iter {
            return Err(FbpError::MaxIterations {
                solver: "adjoint fixed point",
                iterations: trace.iterations,
                last_increment: d,
            });
        }
    }
    trace.converged = true;
    let (rg, ro) = adjoint_residuals(cp, lin, misfit, &cur);
    trace.residual_gamma = rg.as_f64();
    trace.residual_omega = ro.as_f64();
    trace.residual_ok = trace.residual_gamma <= prob.cfg.res_tol && trace.residual_omega <= prob.cfg.res_tol;
    Ok((cur, trace))
}
