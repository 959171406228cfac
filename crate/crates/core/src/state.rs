//! Control-to-state map: Picard iteration of the coupled interface/bulk
//! system on the reference square.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::Matrix2;
use crate::constants::ConstantsLedger;
use crate::error::{FbpError, Result};
use crate::femcore::{
    a_on_points, assemble_b_gamma, assemble_bulk_with, bulk_action, bulk_norm, extension_transpose,
    mass_action, BoundaryCurve, BoundaryTag, BulkField, BulkQuadrature, ConstrainedSolver,
    ControlProfile, IntervalMesh, IntervalQuadrature, NormKind, NormedField, SquareMesh,
};
use crate::scalar::Real;

/// Tolerances and norm parameters shared by the fixed-point solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub fp_tol: f64,
    pub res_tol: f64,
    pub max_iter: usize,
    /// Lower bound on the weight of the curve part of the product norm.
    pub weight_floor: f64,
    /// Integrability exponent of the bulk space.
    pub p: f64,
    /// `1 + beta C_A`.
    pub weight_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            fp_tol: 1e-11,
            res_tol: 1e-8,
            max_iter: 200,
            weight_floor: 1e-8,
            p: 4.0,
            weight_factor: 2.0,
        }
    }
}

/// Discretization, boundary lift and parameters of one state problem.
#[derive(Debug, Clone)]
pub struct StateProblem<T> {
    pub line_mesh: IntervalMesh,
    pub square: SquareMesh,
    pub line_quad: IntervalQuadrature<T>,
    pub bulk_quad: BulkQuadrature<T>,
    pub kappa: T,
    pub v: BulkField<T>,
    pub cfg: SolverConfig,
    gamma_solver: ConstrainedSolver<T>,
    boundary_mask: Vec<bool>,
    sigma_mask: Vec<bool>,
    v_norm: T,
    weight: T,
}

impl<T: Real> StateProblem<T> {
    /// `v` must live on a square with the same number of elements per side
    /// as the interval mesh.
    pub fn new(n: usize, kappa: T, v: BulkField<T>, cfg: SolverConfig) -> Result<Self> {
        if !(kappa > T::zero()) {
            return Err(FbpError::InvalidInput(format!("kappa must be positive, got {kappa}")));
        }
        let line_mesh = IntervalMesh::new(n)?;
        let square = SquareMesh::new(n)?;
        if v.mesh() != square {
            return Err(FbpError::InvalidMesh(format!(
                "lift has {} elements per side, expected {n}",
                v.mesh().n()
            )));
        }
        let bulk_quad = BulkQuadrature::new(square);
        let v_norm = bulk_norm(&bulk_quad, v.values(), NormKind::W1p0(cfg.p))?;
        let weight = (T::of(cfg.weight_factor) * v_norm).max(T::of(cfg.weight_floor));
        let mut ends = vec![false; n + 1];
        ends[0] = true;
        ends[n] = true;
        let gamma_solver = ConstrainedSolver::new(assemble_b_gamma(line_mesh, kappa), ends)?;
        Ok(Self {
            line_mesh,
            square,
            line_quad: IntervalQuadrature::new(line_mesh),
            bulk_quad,
            kappa,
            v,
            cfg,
            gamma_solver,
            boundary_mask: square.boundary_mask(),
            sigma_mask: (0..square.n_nodes()).map(|k| square.is_sigma(k)).collect(),
            v_norm,
            weight,
        })
    }

    pub fn n(&self) -> usize {
        self.line_mesh.n_elems()
    }

    /// Gradient seminorm of the lift in `L^p`.
    pub fn v_norm(&self) -> T {
        self.v_norm
    }

    /// Weight of the curve part in the product norm.
    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn sigma_mask(&self) -> &[bool] {
        &self.sigma_mask
    }

    /// Solver for `kappa int gamma' zeta' = load` with zero end values.
    pub fn gamma_solver(&self) -> &ConstrainedSolver<T> {
        &self.gamma_solver
    }

    /// `w ||gamma||_{W1,inf} + ||y||_{W1,p}`.
    pub fn w1_norm(&self, gamma: &[T], y: &[T]) -> T {
        let g = BoundaryCurve::from_interior(gamma.to_vec())
            .norm(NormKind::W1Inf0)
            .expect("W1inf0 always defined");
        let b = bulk_norm(&self.bulk_quad, y, NormKind::W1p0(self.cfg.p)).expect("p checked at construction");
        self.weight * g + b
    }

    pub fn w1_distance(&self, a: &StatePair<T>, b: &StatePair<T>) -> T {
        let dg: Vec<T> = diff(a.gamma.values(), b.gamma.values());
        let dy: Vec<T> = diff(a.y.values(), b.y.values());
        self.w1_norm(&dg, &dy)
    }

    /// Factorized bulk stiffness with coefficient `coeffs`, Dirichlet nodes
    /// selected by `mask`.
    pub fn bulk_solver(&self, coeffs: &[Matrix2<T>], mask: &[bool]) -> Result<ConstrainedSolver<T>> {
        ConstrainedSolver::new(assemble_bulk_with(&self.bulk_quad, coeffs), mask.to_vec())
    }

    /// `y + v` as a nodal vector.
    pub fn total(&self, y: &BulkField<T>) -> Vec<T> {
        y.values().iter().zip(self.v.values()).map(|(a, b)| *a + *b).collect()
    }
}

pub(crate) fn diff<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

/// Curve and bulk correction `(gamma, y)`; `y` vanishes on all of the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePair<T> {
    pub gamma: BoundaryCurve<T>,
    pub y: BulkField<T>,
}

impl<T: Real> StatePair<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            gamma: BoundaryCurve::zeros(n),
            y: BulkField::zeros(SquareMesh::new(n).expect("n >= 2"), BoundaryTag::ZeroOnBoundary),
        }
    }

    /// `||gamma'||_inf <= 1`.
    pub fn satisfies_state_constraint(&self) -> bool {
        self.gamma.norm(NormKind::W1Inf0).map(|s| s <= T::one()).unwrap_or(false)
    }

    /// Membership in the invariant ball for the given `beta C_A`.
    pub fn in_ball(&self, prob: &StateProblem<T>, beta_ca: T) -> bool {
        let y = bulk_norm(&prob.bulk_quad, self.y.values(), NormKind::W1p0(prob.cfg.p))
            .unwrap_or(T::infinity());
        self.satisfies_state_constraint() && y <= beta_ca * prob.v_norm() * (T::one() + T::of(1e-12))
    }
}

/// Convergence history of a fixed-point solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedPointTrace {
    /// Distance between successive iterates.
    pub distances: Vec<f64>,
    /// `distances[k] / distances[k-1]`.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest residual of the interface equation on the discrete test space.
    pub residual_gamma: f64,
    /// Largest residual of the bulk equation on the discrete test space.
    pub residual_omega: f64,
    pub residual_ok: bool,
}

impl FixedPointTrace {
    pub(crate) fn push(&mut self, d: f64) {
        if let Some(&last) = self.distances.last() {
            if last > 0.0 {
                self.ratios.push(d / last);
            }
        }
        self.distances.push(d);
        self.iterations = self.distances.len();
    }

    /// Largest contraction ratio over iterates whose distance is still above
    /// `floor` (round-off dominates below that).
    pub fn max_ratio_above(&self, floor: f64) -> f64 {
        self.distances
            .windows(2)
            .filter(|w| w[0] > floor && w[1] > floor)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

/// Interface half-step: the curve update for a frozen bulk state.
pub fn apply_t1<T: Real>(
    prob: &StateProblem<T>,
    gamma: &BoundaryCurve<T>,
    y: &BulkField<T>,
    u: &ControlProfile<T>,
) -> Result<BoundaryCurve<T>> {
    let a = a_on_points(gamma, &prob.bulk_quad)?;
    let flux = bulk_action(&prob.bulk_quad, &a, &prob.total(y));
    let et = extension_transpose(prob.square, &flux);
    let mu = mass_action(prob.line_mesh, u.values());
    let load: Vec<T> = mu.iter().zip(&et).map(|(m, e)| *m - *e).collect();
    Ok(BoundaryCurve::from_interior(prob.gamma_solver.solve_zero(&load)))
}

/// Bulk half-step: the zero-trace correction for the geometry `gamma_tilde`.
pub fn apply_t2<T: Real>(prob: &StateProblem<T>, gamma_tilde: &BoundaryCurve<T>) -> Result<BulkField<T>> {
    let a = a_on_points(gamma_tilde, &prob.bulk_quad)?;
    let solver = prob.bulk_solver(&a, &prob.boundary_mask)?;
    let kv = solver.matrix().matvec(prob.v.values());
    let rhs: Vec<T> = kv.iter().map(|x| -*x).collect();
    BulkField::from_values(prob.square, solver.solve_zero(&rhs), BoundaryTag::ZeroOnBoundary)
}

/// One application of the full fixed-point map.
pub fn apply_t<T: Real>(prob: &StateProblem<T>, s: &StatePair<T>, u: &ControlProfile<T>) -> Result<StatePair<T>> {
    let gamma = apply_t1(prob, &s.gamma, &s.y, u)?;
    let y = apply_t2(prob, &gamma)?;
    Ok(StatePair { gamma, y })
}

/// Residuals `(interface, bulk)` of the weak state system in the max norm.
pub fn state_residuals<T: Real>(prob: &StateProblem<T>, s: &StatePair<T>, u: &ControlProfile<T>) -> Result<(T, T)> {
    let a = a_on_points(&s.gamma, &prob.bulk_quad)?;
    let flux = bulk_action(&prob.bulk_quad, &a, &prob.total(&s.y));
    let r_omega = flux
        .iter()
        .zip(&prob.boundary_mask)
        .filter(|(_, m)| !**m)
        .fold(T::zero(), |m, (f, _)| m.max(f.abs()));
    let et = extension_transpose(prob.square, &flux);
    let kg = prob.gamma_solver.matrix().matvec(s.gamma.values());
    let mu = mass_action(prob.line_mesh, u.values());
    let n = prob.n();
    let r_gamma = (1..n).fold(T::zero(), |m, j| m.max((kg[j] + et[j] - mu[j]).abs()));
    Ok((r_gamma, r_omega))
}

/// Picard iteration from `(0, 0)` until successive iterates are `fp_tol`
/// apart in the product norm.
pub fn solve_state<T: Real>(prob: &StateProblem<T>, u: &ControlProfile<T>) -> Result<(StatePair<T>, FixedPointTrace)> {
    solve_state_from(prob, u, StatePair::zeros(prob.n()))
}

pub fn solve_state_from<T: Real>(
    prob: &StateProblem<T>,
    u: &ControlProfile<T>,
    start: StatePair<T>,
) -> Result<(StatePair<T>, FixedPointTrace)> {
    if u.n_elems() != prob.n() {
        return Err(FbpError::InvalidMesh(format!(
            "control has {} elements, problem has {}",
            u.n_elems(),
            prob.n()
        )));
    }
    let mut trace = FixedPointTrace::default();
    let mut cur = start;
    let tol = prob.cfg.fp_tol;
    loop {
        let next = apply_t(prob, &cur, u)?;
        let d = prob.w1_distance(&next, &cur).as_f64();
        trace.push(d);
        cur = next;
        if d <= tol {
            break;
        }
        if trace.iterations >= prob.cfg.max_iter {
            return Err(FbpError::MaxIterations {
                solver: "state fixed point",
                iterations: trace.iterations,
                last_increment: d,
            });
        }
    }
    trace.converged = true;
    let (rg, ro) = state_residuals(prob, &cur, u)?;
    trace.residual_gamma = rg.as_f64();
    trace.residual_omega = ro.as_f64();
    trace.residual_ok = trace.residual_gamma <= prob.cfg.res_tol && trace.residual_omega <= prob.cfg.res_tol;
    Ok((cur, trace))
}

/// Smallness conditions on the lift and the control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub v_norm: f64,
    pub v_invariance_bound: f64,
    pub v_contraction_bound: f64,
    pub u_norm: f64,
    pub u_radius: f64,
    pub uad_radius: f64,
    pub v_invariance_ok: bool,
    pub v_contraction_ok: bool,
    /// Strict: `||u|| < theta1 / alpha`.
    pub u_in_open_set: bool,
    pub u_in_admissible_set: bool,
}

impl FeasibilityReport {
    pub fn all_pass(&self) -> bool {
        self.v_invariance_ok && self.v_contraction_ok && self.u_in_open_set && self.u_in_admissible_set
    }
}

/// Checks the lift and control against the ledger thresholds. Never fails.
pub fn check_admissibility<T: Real>(
    u: &ControlProfile<T>,
    v: &BulkField<T>,
    ledger: &ConstantsLedger,
) -> FeasibilityReport {
    let v_norm = v.norm(NormKind::W1p0(ledger.p)).map(|x| x.as_f64()).unwrap_or(f64::INFINITY);
    let u_norm = u.norm(NormKind::L2).map(|x| x.as_f64()).unwrap_or(f64::INFINITY);
    let t = ledger.thresholds();
    FeasibilityReport {
        v_norm,
        v_invariance_bound: t.v_invariance,
        v_contraction_bound: t.v_contraction,
        u_norm,
        u_radius: t.u_radius,
        uad_radius: t.uad_radius,
        v_invariance_ok: v_norm <= t.v_invariance,
        v_contraction_ok: v_norm <= t.v_contraction,
        u_in_open_set: u_norm < t.u_radius,
        u_in_admissible_set: u_norm <= t.uad_radius,
    }
}

/// Random pair in the invariant ball: `||gamma'||_inf <= 1` and
/// `||grad y||_p <= beta C_A ||grad v||_p`, both built from a few smooth modes.
pub fn sample_ball_point<T: Real>(prob: &StateProblem<T>, beta_ca: f64, rng: &mut ChaCha8Rng) -> StatePair<T> {
    let pi = std::f64::consts::PI;
    let c: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let raw = BoundaryCurve::from_fn(prob.line_mesh, |x: T| {
        let x = x.as_f64();
        T::of(c.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * pi * x).sin() / (k + 1) as f64).sum())
    });
    let slope = raw.norm(NormKind::W1Inf0).expect("W1inf0 defined").as_f64();
    let gamma = if slope > 0.0 {
        raw.scaled(T::of(rng.random_range(0.0..1.0) / slope))
    } else {
        raw
    };
    let d: Vec<f64> = (0..9).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let raw_y = BulkField::from_fn(prob.square, BoundaryTag::ZeroOnBoundary, |x1: T, x2: T| {
        let (x1, x2) = (x1.as_f64(), x2.as_f64());
        let mut acc = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                acc += d[3 * k + l] * ((k + 1) as f64 * pi * x1).sin() * ((l + 1) as f64 * pi * x2).sin()
                    / ((k + l + 2) as f64);
            }
        }
        T::of(acc)
    });
    let yn = bulk_norm(&prob.bulk_quad, raw_y.values(), NormKind::W1p0(prob.cfg.p))
        .expect("p checked at construction")
        .as_f64();
    let radius = beta_ca * prob.v_norm().as_f64();
    let y = if yn > 0.0 {
        raw_y.scaled(T::of(radius * rng.random_range(0.0..1.0) / yn))
    } else {
        raw_y
    };
    StatePair { gamma, y }
}

/// Sampled contraction ratios of the fixed-point map on the invariant ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub pairs: usize,
    pub max_ratio: f64,
    /// `1 - theta2`.
    pub bound: f64,
    pub pairs_ok: bool,
    /// Largest ratio of successive fixed-point increments above round-off.
    pub trace_max_ratio: f64,
    pub trace_ok: bool,
    pub trace_iterations: usize,
    pub feasibility: FeasibilityReport,
}

impl ContractionReport {
    pub fn pass(&self) -> bool {
        self.pairs_ok && self.trace_ok
    }
}

/// Floor below which fixed-point increments are treated as round-off.
pub const TRACE_FLOOR: f64 = 1e-13;

/// Measures `||T(a) - T(b)|| / ||a - b||` over random pairs of the invariant
/// ball and the decay of the fixed-point trace at `u`. The product norm uses
/// the ledger weight `(1 + beta C_A) ||v||`.
pub fn check_contraction<T: Real>(
    prob: &StateProblem<T>,
    u: &ControlProfile<T>,
    ledger: &ConstantsLedger,
    n_pairs: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let beta_ca = ledger.beta * ledger.c_a;
    let w = T::of((ledger.weight_factor() * prob.v_norm().as_f64()).max(prob.cfg.weight_floor));
    let dist = |a: &StatePair<T>, b: &StatePair<T>| {
        let dg = BoundaryCurve::from_interior(diff(a.gamma.values(), b.gamma.values()))
            .norm(NormKind::W1Inf0)
            .expect("W1inf0 defined");
        let dy = bulk_norm(&prob.bulk_quad, &diff(a.y.values(), b.y.values()), NormKind::W1p0(prob.cfg.p))
            .expect("p checked at construction");
        (w * dg + dy).as_f64()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(StatePair<T>, StatePair<T>)> = (0..n_pairs)
        .map(|_| (sample_ball_point(prob, beta_ca, &mut rng), sample_ball_point(prob, beta_ca, &mut rng)))
        .collect();
    let ratios = pairs
        .par_iter()
        .map(|(a, b)| {
            let d = dist(a, b);
            if d == 0.0 {
                return Ok(0.0);
            }
            let ta = apply_t(prob, a, u)?;
            let tb = apply_t(prob, b, u)?;
            Ok(dist(&ta, &tb) / d)
        })
        .collect::<Result<Vec<f64>>>()?;
    let bound = 1.0 - ledger.theta2;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let (_, trace) = solve_state(prob, u)?;
    let trace_max_ratio = trace.max_ratio_above(TRACE_FLOOR);
    Ok(ContractionReport {
        pairs: n_pairs,
        max_ratio,
        bound,
        pairs_ok: max_ratio <= bound,
        trace_max_ratio,
        trace_ok: trace_max_ratio <= bound,
        trace_iterations: trace.iterations,
        feasibility: check_admissibility(u, &prob.v, ledger),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn problem(n: usize, v: impl Fn(f64, f64) -> f64) -> StateProblem<f64> {
        let sq = SquareMesh::new(n).unwrap();
        let v = BulkField::from_fn(sq, BoundaryTag::Free, v);
        StateProblem::new(n, 1.0, v, SolverConfig::default()).unwrap()
    }

    #[test]
    fn t1_of_zero_is_zero() {
        let p = problem(8, |_, _| 0.0);
        let s = StatePair::zeros(8);
        let g = apply_t1(&p, &s.gamma, &s.y, &ControlProfile::zeros(8)).unwrap();
        assert!(g.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn t1_with_unit_load_is_parabola() {
        let p = problem(8, |_, _| 0.0);
        let s = StatePair::zeros(8);
        let u = ControlProfile::constant(8, 1.0);
        let g = apply_t1(&p, &s.gamma, &s.y, &u).unwrap();
        for (i, v) in g.values().iter().enumerate() {
            let x = i as f64 / 8.0;
            assert_abs_diff_eq!(*v, x * (1.0 - x) / 2.0, epsilon = 1e-14);
        }
        let g2 = apply_t1(&p, &s.gamma, &s.y, &u.scaled(2.0)).unwrap();
        for (a, b) in g.values().iter().zip(g2.values()) {
            assert_abs_diff_eq!(2.0 * a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn t2_of_harmonic_lifts_is_zero() {
        for v in [|_: f64, _: f64| 0.7, |_: f64, x2: f64| x2] {
            let p = problem(6, v);
            let y = apply_t2(&p, &BoundaryCurve::zeros(6)).unwrap();
            assert!(y.max_abs() < 1e-14);
        }
    }

    #[test]
    fn flat_fixed_point_takes_one_iteration() {
        let p = problem(8, |_, _| 3.0);
        let (s, tr) = solve_state(&p, &ControlProfile::zeros(8)).unwrap();
        assert_eq!(tr.iterations, 1);
        assert_eq!(s.gamma.max_abs(), 0.0);
        assert!(s.y.max_abs() < 1e-14);
        assert!(tr.residual_ok);
    }

    #[test]
    fn decoupled_state_is_parabola() {
        let p = problem(10, |_, _| 0.0);
        let (s, tr) = solve_state(&p, &ControlProfile::constant(10, 1.0)).unwrap();
        for (i, v) in s.gamma.values().iter().enumerate() {
            let x = i as f64 / 10.0;
            assert_abs_diff_eq!(*v, x * (1.0 - x) / 2.0, epsilon = 1e-13);
        }
        assert_eq!(s.y.max_abs(), 0.0);
        assert!(tr.converged && tr.residual_ok);
    }

    #[test]
    fn mirror_symmetry() {
        use std::f64::consts::PI;
        let p = problem(12, |x1, x2| 0.05 * x2 * (PI * x1).sin());
        let u = ControlProfile::from_fn(IntervalMesh::new(12).unwrap(), |x: f64| 0.2 * (x - 0.5).powi(2));
        let (s, tr) = solve_state(&p, &u).unwrap();
        assert!(tr.residual_ok);
        assert!(s.gamma.is_even(1e-10));
        assert!(s.y.is_even_in_x1(1e-10));
        assert!(s.y.max_abs() > 0.0);
    }
}
