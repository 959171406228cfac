use serde::{Deserialize, Serialize};

use super::problem::ControlProblem;
use super::reduced::{project_uad, ReducedPoint};
use crate::constants::ConstantsLedger;
use crate::error::{FbpError, Result};
use crate::state::{check_admissibility, FeasibilityReport};
use crate::femcore::{l2_inner_1d, ControlProfile};
use crate::scalar::Real;

/// Projected-gradient settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    /// Stop when `||u - P(u - g / lambda)||_{L^2} <= opt_tol`.
    pub opt_tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub sigma: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            opt_tol: 1e-10,
            max_iter: 500,
            sigma: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptIterate {
    pub iteration: usize,
    pub cost: f64,
    pub residual: f64,
    pub step: f64,
    pub u_norm: f64,
    /// `||J'(u)||_{L^2}`.
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult<T> {
    pub u: ControlProfile<T>,
    pub cost: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<OptIterate>,
    /// Filled by [`optimize_checked`].
    pub feasibility: Option<FeasibilityReport>,
}

fn stationarity<T: Real>(cp: &ControlProblem<T>, u: &ControlProfile<T>, g: &ControlProfile<T>) -> T {
    let trial = project_uad(&u.axpy(-T::one() / cp.lambda, g), cp.radius);
    let d = trial.axpy(-T::one(), u);
    l2_inner_1d(cp.state.line_mesh, d.values(), d.values()).max(T::zero()).sqrt()
}

/// Stationarity residual `||u - P(u - J'(u) / lambda)||_{L^2}`.
pub fn stationarity_residual<T: Real>(cp: &ControlProblem<T>, u: &ControlProfile<T>) -> Result<T> {
    let pt = ReducedPoint::new(cp, u)?;
    Ok(stationarity(cp, u, &pt.gradient()?))
}

/// Projected gradient descent with Armijo backtracking from `u0`.
pub fn optimize<T: Real>(cp: &ControlProblem<T>, u0: &ControlProfile<T>, cfg: &OptConfig) -> Result<OptResult<T>> {
    let mesh = cp.state.line_mesh;
    let mut u = project_uad(u0, cp.radius);
    let mut pt = ReducedPoint::new(cp, &u)?;
    let mut cost = pt.cost();
    let mut g = pt.gradient()?;
    let mut history = Vec::new();
    let mut residual = stationarity(cp, &u, &g);
    history.push(OptIterate {
        iteration: 0,
        cost: cost.as_f64(),
        residual: residual.as_f64(),
        step: 0.0,
        u_norm: cp.l2_norm(&u).as_f64(),
        gradient_norm: cp.l2_norm(&g).as_f64(),
    });
    let mut it = 0;
    while residual.as_f64() > cfg.opt_tol {
        if it >= cfg.max_iter {
            return Ok(OptResult {
                u,
                cost: cost.as_f64(),
                residual: residual.as_f64(),
                iterations: it,
                converged: false,
                history,
                feasibility: None,
            });
        }
        let mut t = T::one() / cp.lambda;
        // Cost differences below a few ulps of |J| are round-off.
        let slack = T::of(16.0 * f64::EPSILON) * cost.abs();
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial = project_uad(&u.axpy(-t, &g), cp.radius);
            let d = trial.axpy(-T::one(), &u);
            let decrease = l2_inner_1d(mesh, g.values(), d.values());
            let tpt = ReducedPoint::new(cp, &trial)?;
            let tcost = tpt.cost();
            if tcost <= cost + T::of(cfg.sigma) * decrease + slack {
                accepted = Some((trial, tpt, tcost));
                break;
            }
            t *= T::of(cfg.shrink);
        }
        let Some((nu, npt, ncost)) = accepted else {
            return Err(FbpError::MaxIterations {
                solver: "Armijo backtracking",
                iterations: cfg.max_backtracks,
                last_increment: t.as_f64(),
            });
        };
        it += 1;
        u = nu;
        pt = npt;
        cost = ncost;
        g = pt.gradient()?;
        residual = stationarity(cp, &u, &g);
        history.push(OptIterate {
            iteration: it,
            cost: cost.as_f64(),
            residual: residual.as_f64(),
            step: t.as_f64(),
            u_norm: cp.l2_norm(&u).as_f64(),
            gradient_norm: cp.l2_norm(&g).as_f64(),
        });
    }
    Ok(OptResult {
        u,
        cost: cost.as_f64(),
        residual: residual.as_f64(),
        iterations: it,
        converged: true,
        history,
        feasibility: None,
    })
}

/// [`optimize`] after checking the smallness conditions at `u0`; a failed
/// check is recorded in the result and does not stop the run.
pub fn optimize_checked<T: Real>(
    cp: &ControlProblem<T>,
    u0: &ControlProfile<T>,
    cfg: &OptConfig,
    ledger: &ConstantsLedger,
) -> Result<OptResult<T>> {
    let feas = check_admissibility(&project_uad(u0, cp.radius), &cp.state.v, ledger);
    let mut r = optimize(cp, u0, cfg)?;
    r.feasibility = Some(feas);
    Ok(r)
}
