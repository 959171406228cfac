use super::data::{ProblemData, SpatialFunction};
use crate::constants::DataNorms;
use crate::error::{FbpError, Result};
use crate::femcore::{
    BoundaryCurve, BoundaryTag, BulkField, ControlProfile, NormKind, NormedField, SquareMesh,
};
use crate::scalar::Real;
use crate::state::{SolverConfig, StatePair, StateProblem};

/// Discretized control problem: state problem, targets and control ball.
#[derive(Debug, Clone)]
pub struct ControlProblem<T> {
    pub state: StateProblem<T>,
    pub data: ProblemData,
    pub lambda: T,
    /// Radius of the admissible control ball in `L^2(I)`.
    pub radius: T,
    /// `gamma_d` at the interval Gauss points.
    pub gamma_d_q: Vec<T>,
    y_d_zero: bool,
}

/// Target misfit `m = y + v - y_d o Psi` and its sensitivities at the bulk
/// Gauss points.
#[derive(Debug, Clone)]
pub struct Misfit<T> {
    pub m: Vec<T>,
    /// `1 + gamma` at the point.
    pub jac: Vec<T>,
    /// `d m / d gamma = -d_x2 y_d(Psi) x2`.
    pub dm_dgamma: Vec<T>,
    /// `d^2 m / d gamma^2 = -d_x2x2 y_d(Psi) x2^2`.
    pub d2m_dgamma2: Vec<T>,
}

impl<T: Real> ControlProblem<T> {
    pub fn new(data: &ProblemData, n: usize, radius: f64, mut cfg: SolverConfig) -> Result<Self> {
        let v = data.violations();
        if !v.is_empty() {
            return Err(FbpError::InvalidInput(v.join("; ")));
        }
        if !(radius > 0.0) {
            return Err(FbpError::InvalidInput(format!("control radius must be > 0, got {radius}")));
        }
        cfg.p = data.p;
        let sq = SquareMesh::new(n)?;
        let lift = BulkField::from_fn(sq, BoundaryTag::Free, |x1: T, x2: T| {
            T::of(data.v.value(x1.as_f64(), x2.as_f64()))
        });
        let state = StateProblem::new(n, T::of(data.kappa), lift, cfg)?;
        let gamma_d_q = state
            .line_quad
            .points
            .iter()
            .map(|q| T::of(data.gamma_d.value(q.x1.as_f64(), 0.0)))
            .collect();
        Ok(Self {
            state,
            data: data.clone(),
            lambda: T::of(data.lambda),
            radius: T::of(radius),
            gamma_d_q,
            y_d_zero: data.y_d.is_zero(),
        })
    }

    pub fn n(&self) -> usize {
        self.state.n()
    }

    pub fn initial_control(&self) -> ControlProfile<T> {
        ControlProfile::from_fn(self.state.line_mesh, |x: T| T::of(self.data.u0.value(x.as_f64(), 0.0)))
    }

    /// Nodal interpolant of `gamma_d` (for reporting).
    pub fn gamma_d_nodal(&self) -> Vec<T> {
        self.state
            .line_mesh
            .nodes::<T>()
            .into_iter()
            .map(|x| T::of(self.data.gamma_d.value(x.as_f64(), 0.0)))
            .collect()
    }

    pub fn misfit(&self, s: &StatePair<T>) -> Misfit<T> {
        let quad = &self.state.bulk_quad;
        let total = quad.values(&self.state.total(&s.y));
        let line = self.state.line_quad.interpolate(s.gamma.values());
        let np = quad.len();
        let mut out = Misfit {
            m: Vec::with_capacity(np),
            jac: Vec::with_capacity(np),
            dm_dgamma: Vec::with_capacity(np),
            d2m_dgamma2: Vec::with_capacity(np),
        };
        for (k, q) in quad.points.iter().enumerate() {
            let g = line[q.line_point].0;
            let jac = T::one() + g;
            out.jac.push(jac);
            if self.y_d_zero {
                out.m.push(total[k]);
                out.dm_dgamma.push(T::zero());
                out.d2m_dgamma2.push(T::zero());
            } else {
                let (x1, x2) = (q.x1.as_f64(), q.x2.as_f64());
                let x2p = jac.as_f64() * x2;
                let yd = self.data.y_d.value(x1, x2p);
                out.m.push(total[k] - T::of(yd));
                out.dm_dgamma.push(-T::of(self.data.y_d.d_x2(x1, x2p) * x2));
                out.d2m_dgamma2.push(-T::of(self.data.y_d.d_x2x2(x1, x2p) * x2 * x2));
            }
        }
        out
    }

    /// `||gamma_d||_{L^2(I)}` by the interval rule.
    pub fn gamma_d_l2(&self) -> f64 {
        self.state
            .line_quad
            .points
            .iter()
            .zip(&self.gamma_d_q)
            .map(|(q, g)| (q.weight * *g * *g).as_f64())
            .sum::<f64>()
            .sqrt()
    }

    /// `||y_d||_{L^2}` on the unit square by the bulk rule.
    pub fn y_d_l2(&self) -> f64 {
        self.state
            .bulk_quad
            .points
            .iter()
            .map(|q| {
                let y = self.data.y_d.value(q.x1.as_f64(), q.x2.as_f64());
                q.weight.as_f64() * y * y
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn v_w1p(&self) -> f64 {
        self.state.v_norm().as_f64()
    }

    pub fn data_norms(&self) -> DataNorms {
        DataNorms {
            gamma_d_l2: self.gamma_d_l2(),
            y_d_l2: self.y_d_l2(),
            v_w1p: self.v_w1p(),
        }
    }

    pub fn l2_norm(&self, u: &ControlProfile<T>) -> T {
        u.norm(NormKind::L2).expect("L2 always defined")
    }

    /// Curve misfit `gamma - gamma_d` at the interval Gauss points.
    pub fn curve_misfit(&self, gamma: &BoundaryCurve<T>) -> Vec<T> {
        self.state
            .line_quad
            .interpolate(gamma.values())
            .iter()
            .zip(&self.gamma_d_q)
            .map(|((g, _), d)| *g - *d)
            .collect()
    }
}
