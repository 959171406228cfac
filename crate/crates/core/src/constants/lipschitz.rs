use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ledger::{compute_thresholds, ConstantsLedger};
use crate::control::{project_uad, ControlProblem};
use crate::error::Result;
use crate::femcore::ControlProfile;
use crate::state::{solve_state, StatePair};
use crate::tangent::{apply_gprime, apply_gsecond, Linearization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzKind {
    G,
    Gprime,
    Gsecond,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub kind: LipschitzKind,
    /// Largest observed difference quotient.
    pub observed: f64,
    /// Formula value (for `G`) or the recorded empirical value.
    pub reference: Option<f64>,
    /// True when the formula bound degenerates to zero.
    pub vacuous: bool,
    /// `observed <= reference` when a nonvacuous reference exists.
    pub within_bound: Option<bool>,
    /// Curve weight of the product norm used for the quotients.
    pub weight: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Smooth random control with `L^2` norm drawn from `(0, radius]`.
fn random_control(cp: &ControlProblem<f64>, rng: &mut ChaCha8Rng) -> ControlProfile<f64> {
    let mesh = cp.state.line_mesh;
    let coef: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let u = ControlProfile::from_fn(mesh, |x: f64| {
        coef.iter()
            .enumerate()
            .map(|(k, c)| c * ((k as f64) * std::f64::consts::PI * x).cos() / (1 + k) as f64)
            .sum()
    });
    let target = cp.radius * rng.random_range(0.05..=1.0);
    let nrm = cp.l2_norm(&u);
    project_uad(&u.scaled(target / nrm), cp.radius)
}

/// Smooth random control in the admissible ball, reproducible from `seed`.
pub fn sample_control(cp: &ControlProblem<f64>, seed: u64) -> ControlProfile<f64> {
    random_control(cp, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn pair_distance(cp: &ControlProblem<f64>, a: &StatePair<f64>, b: &StatePair<f64>) -> f64 {
    cp.state.w1_distance(a, b)
}

/// One difference quotient; `None` when the two controls coincide.
pub fn lipschitz_quotient(
    kind: LipschitzKind,
    cp: &ControlProblem<f64>,
    u1: &ControlProfile<f64>,
    u2: &ControlProfile<f64>,
    h: &ControlProfile<f64>,
) -> Result<Option<f64>> {
    let du = cp.l2_norm(&u1.axpy(-1.0, u2));
    if du == 0.0 {
        return Ok(None);
    }
    let (s1, _) = solve_state(&cp.state, u1)?;
    let (s2, _) = solve_state(&cp.state, u2)?;
    let hn = cp.l2_norm(h);
    Ok(Some(match kind {
        LipschitzKind::G => pair_distance(cp, &s1, &s2) / du,
        LipschitzKind::Gprime => {
            let t1 = apply_gprime(&Linearization::new(&cp.state, s1)?, h)?;
            let t2 = apply_gprime(&Linearization::new(&cp.state, s2)?, h)?;
            pair_distance(cp, &t1, &t2) / (du * hn)
        }
        LipschitzKind::Gsecond => {
            let t1 = apply_gsecond(&Linearization::new(&cp.state, s1)?, h, h)?;
            let t2 = apply_gsecond(&Linearization::new(&cp.state, s2)?, h, h)?;
            pair_distance(cp, &t1, &t2) / (du * hn * hn)
        }
    }))
}

/// Difference quotients of the control-to-state map or its derivatives over
/// random control pairs in the admissible ball.
pub fn measure_lipschitz(
    kind: LipschitzKind,
    cp: &ControlProblem<f64>,
    ledger: &ConstantsLedger,
    n_pairs: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<_> = (0..n_pairs)
        .map(|_| {
            let u1 = random_control(cp, &mut rng);
            let u2 = random_control(cp, &mut rng);
            let h = random_control(cp, &mut rng);
            (u1, u2, h)
        })
        .collect();
    let quotients = samples
        .par_iter()
        .map(|(u1, u2, h)| lipschitz_quotient(kind, cp, u1, u2, h))
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<f64> = quotients.iter().flatten().copied().collect();
    let observed = used.iter().copied().fold(0.0, f64::max);
    let reference = match kind {
        LipschitzKind::G => compute_thresholds(ledger, cp.data_norms())?.derived.map(|d| d.l_g),
        LipschitzKind::Gprime => ledger.derived.as_ref().and_then(|d| d.l_gprime),
        LipschitzKind::Gsecond => ledger.derived.as_ref().and_then(|d| d.l_gsecond),
    };
    let vacuous = matches!(reference, Some(r) if r == 0.0);
    Ok(LipschitzReport {
        kind,
        observed,
        reference,
        vacuous,
        within_bound: reference.filter(|_| !vacuous).map(|r| observed <= r),
        weight: cp.state.weight(),
        pairs_used: used.len(),
        pairs_skipped: quotients.len() - used.len(),
    })
}
