use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::stationarity_residual;
use super::problem::ControlProblem;
use super::reduced::{project_uad, ReducedPoint};
use crate::constants::{compute_thresholds, ConstantsLedger};
use crate::error::Result;
use crate::femcore::{l2_inner_1d, ControlProfile};
use crate::scalar::Real;

/// Relative tolerance for deciding that a control sits on the ball boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Gaussian,
    /// Gaussian with the outward radial part removed and a small inward push.
    Projected,
    /// The direction `-u`.
    InwardRadial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocSample {
    pub kind: ProbeKind,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocReport {
    pub on_boundary: bool,
    pub min_ratio: f64,
    pub threshold: f64,
    pub ratio_ok: bool,
    pub v_norm: f64,
    pub v_soc_bound: f64,
    pub v_premise_ok: bool,
    pub samples: Vec<SocSample>,
}

impl SocReport {
    pub fn pass(&self) -> bool {
        self.ratio_ok
    }
}

fn l2<T: Real>(cp: &ControlProblem<T>, a: &ControlProfile<T>, b: &ControlProfile<T>) -> T {
    l2_inner_1d(cp.state.line_mesh, a.values(), b.values())
}

pub fn on_boundary<T: Real>(cp: &ControlProblem<T>, u: &ControlProfile<T>) -> bool {
    let r = cp.radius.as_f64();
    cp.l2_norm(u).as_f64() >= r * (1.0 - BOUNDARY_TOL)
}

/// Whether `u + t h` stays in the admissible ball for some `t > 0`.
pub fn in_cone<T: Real>(cp: &ControlProblem<T>, u: &ControlProfile<T>, h: &ControlProfile<T>) -> bool {
    if !on_boundary(cp, u) || h.is_zero() {
        return true;
    }
    l2(cp, h, u).as_f64() < 0.0
}

fn gaussian<T: Real>(n_nodes: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..n_nodes)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(z)
        })
        .collect()
}

/// Deterministic cone directions at `u`.
pub fn sample_cone<T: Real>(
    cp: &ControlProblem<T>,
    u: &ControlProfile<T>,
    n_samples: usize,
    seed: u64,
) -> Vec<(ProbeKind, ControlProfile<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = cp.state.line_mesh.n_nodes();
    let boundary = on_boundary(cp, u);
    let uu = l2(cp, u, u);
    let mut out = Vec::with_capacity(n_samples + 1);
    for _ in 0..n_samples {
        let g = ControlProfile::from_values(gaussian::<T>(n_nodes, &mut rng));
        if !boundary {
            out.push((ProbeKind::Gaussian, g));
            continue;
        }
        let radial = l2(cp, &g, u) / uu;
        let mut h = if radial > T::zero() { g.axpy(-radial, u) } else { g };
        let hn = l2(cp, &h, &h).sqrt();
        h = h.axpy(-T::of(1e-3) * hn / uu.sqrt(), u);
        out.push((ProbeKind::Projected, h));
    }
    if boundary {
        out.push((ProbeKind::InwardRadial, u.scaled(-T::one())));
    }
    out
}

/// Samples the cone at `u_bar` and compares the Rayleigh quotients of
/// `J''(u_bar)` with `lambda / 2`.
pub fn verify_soc<T: Real>(
    cp: &ControlProblem<T>,
    u_bar: &ControlProfile<T>,
    ledger: &ConstantsLedger,
    n_samples: usize,
    seed: u64,
) -> Result<SocReport> {
    let pt = ReducedPoint::new(cp, u_bar)?;
    let probes = sample_cone(cp, u_bar, n_samples, seed);
    let samples: Vec<SocSample> = probes
        .par_iter()
        .map(|(kind, h)| {
            let q = pt.second_derivative(h, h)?;
            let hh = l2(cp, h, h);
            Ok(SocSample {
                kind: *kind,
                ratio: (q / hh).as_f64(),
            })
        })
        .collect::<Result<_>>()?;
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let threshold = 0.5 * cp.lambda.as_f64();
    let full = compute_thresholds(ledger, cp.data_norms())?;
    let v_soc_bound = full.derived.as_ref().map_or(0.0, |d| d.v_soc);
    let v_norm = cp.v_w1p();
    Ok(SocReport {
        on_boundary: on_boundary(cp, u_bar),
        min_ratio,
        threshold,
        ratio_ok: min_ratio >= threshold,
        v_norm,
        v_soc_bound,
        v_premise_ok: v_norm <= v_soc_bound,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    pub norm: f64,
    /// `J(u + h) - J(u)`.
    pub cost_gap: f64,
    /// `lambda / 8 ||h||^2`.
    pub cost_bound: f64,
    /// `<J'(u + h) - J'(u), h>`.
    pub grad_gap: f64,
    /// `lambda / 4 ||h||^2`.
    pub grad_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub stationarity: f64,
    /// False when `u_bar` is not stationary to the requested tolerance.
    pub stationary: bool,
    pub samples: Vec<GrowthSample>,
    pub all_hold: bool,
    /// Largest sampled `||h||` below which every sample satisfies both bounds.
    pub observed_radius: f64,
}

/// Checks both growth inequalities at admissible perturbations
/// `h = P(u_bar + d) - u_bar` with `||d||` drawn from `(0, max_norm]`.
pub fn check_quadratic_growth<T: Real>(
    cp: &ControlProblem<T>,
    u_bar: &ControlProfile<T>,
    n_samples: usize,
    max_norm: f64,
    stationarity_tol: f64,
    seed: u64,
) -> Result<GrowthReport> {
    let stationarity = stationarity_residual(cp, u_bar)?.as_f64();
    let base = ReducedPoint::new(cp, u_bar)?;
    let j0 = base.cost();
    let g0 = base.gradient()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = cp.state.line_mesh.n_nodes();
    let dirs: Vec<ControlProfile<T>> = (0..n_samples)
        .map(|k| {
            let d = ControlProfile::from_values(gaussian::<T>(n_nodes, &mut rng));
            let scale = max_norm * (k + 1) as f64 / n_samples as f64;
            let dn = l2(cp, &d, &d).sqrt();
            let d = d.scaled(T::of(scale) / dn);
            project_uad(&u_bar.axpy(T::one(), &d), cp.radius).axpy(-T::one(), u_bar)
        })
        .collect();
    let lambda = cp.lambda.as_f64();
    let samples: Vec<GrowthSample> = dirs
        .par_iter()
        .map(|h| {
            let up = u_bar.axpy(T::one(), h);
            let pt = ReducedPoint::new(cp, &up)?;
            let g = pt.gradient()?;
            let hh = l2(cp, h, h).as_f64();
            let cost_gap = (pt.cost() - j0).as_f64();
            let grad_gap = l2(cp, &g.axpy(-T::one(), &g0), h).as_f64();
            let cost_bound = lambda / 8.0 * hh;
            let grad_bound = lambda / 4.0 * hh;
            Ok(GrowthSample {
                norm: hh.sqrt(),
                cost_gap,
                cost_bound,
                grad_gap,
                grad_bound,
                holds: cost_gap >= cost_bound && grad_gap >= grad_bound,
            })
        })
        .collect::<Result<_>>()?;
    let mut sorted: Vec<&GrowthSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.norm.total_cmp(&b.norm));
    let observed_radius = sorted
        .iter()
        .take_while(|s| s.holds)
        .last()
        .map_or(0.0, |s| s.norm);
    Ok(GrowthReport {
        stationarity,
        stationary: stationarity <= stationarity_tol,
        all_hold: samples.iter().all(|s| s.holds),
        samples,
        observed_radius,
    })
}
