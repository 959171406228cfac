use super::problem::{ControlProblem, Misfit};
use crate::adjoint::{solve_adjoint_with, AdjointPair};
use crate::error::Result;
use crate::femcore::{l2_inner_1d, ControlProfile};
use crate::scalar::Real;
use crate::state::{solve_state, FixedPointTrace};
use crate::tangent::{apply_gprime, apply_gsecond_with, Linearization, TangentPair};

/// The reduced functional at a fixed control: state, linearization and
/// target misfit, shared by every derivative evaluated there.
#[derive(Debug, Clone)]
pub struct ReducedPoint<'a, T> {
    pub cp: &'a ControlProblem<T>,
    pub u: ControlProfile<T>,
    pub lin: Linearization<'a, T>,
    pub misfit: Misfit<T>,
    pub state_trace: FixedPointTrace,
}

impl<'a, T: Real> ReducedPoint<'a, T> {
    pub fn new(cp: &'a ControlProblem<T>, u: &ControlProfile<T>) -> Result<Self> {
        let (state, state_trace) = solve_state(&cp.state, u)?;
        let misfit = cp.misfit(&state);
        let lin = Linearization::new(&cp.state, state)?;
        Ok(Self {
            cp,
            u: u.clone(),
            lin,
            misfit,
            state_trace,
        })
    }

    pub fn inner(&self, a: &ControlProfile<T>, b: &ControlProfile<T>) -> T {
        l2_inner_1d(self.cp.state.line_mesh, a.values(), b.values())
    }

    /// `J1 + lambda / 2 ||u||^2`.
    pub fn cost(&self) -> T {
        let cp = self.cp;
        let half = T::of(0.5);
        let curve: T = cp
            .curve_misfit(&self.lin.base.gamma)
            .iter()
            .zip(&cp.state.line_quad.points)
            .map(|(d, q)| q.weight * *d * *d)
            .sum();
        let bulk: T = cp
            .state
            .bulk_quad
            .points
            .iter()
            .enumerate()
            .map(|(k, q)| q.weight * self.misfit.m[k] * self.misfit.m[k] * self.misfit.jac[k])
            .sum();
        half * (curve + bulk) + half * cp.lambda * self.inner(&self.u, &self.u)
    }

    pub fn adjoint(&self) -> Result<(AdjointPair<T>, FixedPointTrace)> {
        solve_adjoint_with(self.cp, &self.lin, &self.misfit)
    }

    /// `lambda u + s` as nodal values.
    pub fn gradient(&self) -> Result<ControlProfile<T>> {
        let (adj, _) = self.adjoint()?;
        Ok(self.gradient_from(&adj))
    }

    pub fn gradient_from(&self, adj: &AdjointPair<T>) -> ControlProfile<T> {
        ControlProfile::from_values(adj.s.values().to_vec()).axpy(self.cp.lambda, &self.u)
    }

    /// Derivative of the tracking part in a state direction.
    pub fn j1_prime(&self, t: &TangentPair<T>) -> T {
        let cp = self.cp;
        let mis = &self.misfit;
        let line = cp.state.line_quad.interpolate(t.gamma.values());
        let curve: T = cp
            .curve_misfit(&self.lin.base.gamma)
            .iter()
            .zip(&cp.state.line_quad.points)
            .zip(&line)
            .map(|((d, q), (g, _))| q.weight * *d * *g)
            .sum();
        let dy = cp.state.bulk_quad.values(t.y.values());
        let half = T::of(0.5);
        let bulk: T = cp
            .state
            .bulk_quad
            .points
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let dg = line[q.line_point].0;
                let dm = dy[k] + mis.dm_dgamma[k] * dg;
                q.weight * (mis.m[k] * mis.jac[k] * dm + half * mis.m[k] * mis.m[k] * dg)
            })
            .sum();
        curve + bulk
    }

    /// Second derivative of the tracking part in two state directions.
    pub fn j1_second(&self, t1: &TangentPair<T>, t2: &TangentPair<T>) -> T {
        let cp = self.cp;
        let mis = &self.misfit;
        let l1 = cp.state.line_quad.interpolate(t1.gamma.values());
        let l2 = cp.state.line_quad.interpolate(t2.gamma.values());
        let curve: T = cp
            .state
            .line_quad
            .points
            .iter()
            .enumerate()
            .map(|(k, q)| q.weight * l1[k].0 * l2[k].0)
            .sum();
        let y1 = cp.state.bulk_quad.values(t1.y.values());
        let y2 = cp.state.bulk_quad.values(t2.y.values());
        let bulk: T = cp
            .state
            .bulk_quad
            .points
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let g1 = l1[q.line_point].0;
                let g2 = l2[q.line_point].0;
                let dm1 = y1[k] + mis.dm_dgamma[k] * g1;
                let dm2 = y2[k] + mis.dm_dgamma[k] * g2;
                let d2m = mis.d2m_dgamma2[k] * g1 * g2;
                let m = mis.m[k];
                q.weight * (mis.jac[k] * (dm1 * dm2 + m * d2m) + m * (dm1 * g2 + dm2 * g1))
            })
            .sum();
        curve + bulk
    }

    /// `J'(u) h` through the tangent of the state.
    pub fn sensitivity_derivative(&self, h: &ControlProfile<T>) -> Result<T> {
        let t = apply_gprime(&self.lin, h)?;
        Ok(self.j1_prime(&t) + self.cp.lambda * self.inner(&self.u, h))
    }

    /// `J''(u)[h1, h2]`.
    pub fn second_derivative(&self, h1: &ControlProfile<T>, h2: &ControlProfile<T>) -> Result<T> {
        let (t1, t2) = rayon::join(|| apply_gprime(&self.lin, h1), || apply_gprime(&self.lin, h2));
        let (t1, t2) = (t1?, t2?);
        let t12 = apply_gsecond_with(&self.lin, &t1, &t2)?;
        Ok(self.j1_second(&t1, &t2) + self.j1_prime(&t12) + self.cp.lambda * self.inner(h1, h2))
    }
}

pub fn eval_cost<T: Real>(cp: &ControlProblem<T>, u: &ControlProfile<T>) -> Result<T> {
    Ok(ReducedPoint::new(cp, u)?.cost())
}

/// Reduced gradient `lambda u + s` (an `L^2(I)` element in nodal form).
pub fn eval_gradient<T: Real>(cp: &ControlProblem<T>, u: &ControlProfile<T>) -> Result<ControlProfile<T>> {
    ReducedPoint::new(cp, u)?.gradient()
}

/// `J'(u) h` without the adjoint.
pub fn eval_gradient_direction<T: Real>(
    cp: &ControlProblem<T>,
    u: &ControlProfile<T>,
    h: &ControlProfile<T>,
) -> Result<T> {
    ReducedPoint::new(cp, u)?.sensitivity_derivative(h)
}

pub fn eval_jsecond<T: Real>(
    cp: &ControlProblem<T>,
    u: &ControlProfile<T>,
    h1: &ControlProfile<T>,
    h2: &ControlProfile<T>,
) -> Result<T> {
    ReducedPoint::new(cp, u)?.second_derivative(h1, h2)
}

/// Metric projection onto the closed `L^2` ball of the given radius.
pub fn project_uad<T: Real>(u: &ControlProfile<T>, radius: T) -> ControlProfile<T> {
    let mesh = crate::femcore::IntervalMesh::new(u.n_elems()).expect("control mesh valid");
    let norm = l2_inner_1d(mesh, u.values(), u.values()).max(T::zero()).sqrt();
    if norm <= radius {
        u.clone()
    } else {
        u.scaled(radius / norm)
    }
}
