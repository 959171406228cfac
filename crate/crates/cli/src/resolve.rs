//! Turns a [`RunConfig`] into a discretized problem and a completed ledger.

use fbp_core::constants::{
    analytic_ca, compute_ce, compute_thresholds, default_alpha, estimate_beta_admissible, CaReport, CeReport,
    ConstantsLedger,
};
use fbp_core::ControlProblem;
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

/// Where one base constant came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSource {
    pub name: String,
    pub value: f64,
    pub source: String,
}

/// Audit trail of the ledger resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsDetail {
    pub sources: Vec<ConstantSource>,
    pub c_a: Option<CaReport>,
    pub c_e: Option<CeReport>,
    /// Mesh size `beta` was estimated on.
    pub beta_n: Option<usize>,
    pub radius: f64,
    pub radius_source: String,
}

/// A config with its problem and constants resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cfg: RunConfig,
    pub ledger: ConstantsLedger,
    pub detail: ConstantsDetail,
    pub cp: ControlProblem,
}

fn pick(name: &str, given: Option<f64>, fallback: impl FnOnce() -> Result<(f64, String), CliError>) -> Result<ConstantSource, CliError> {
    let (value, source) = match given {
        Some(v) => (v, "config override".to_string()),
        None => fallback()?,
    };
    Ok(ConstantSource {
        name: name.into(),
        value,
        source,
    })
}

/// Fills every base constant missing from the overrides, completes the
/// derived thresholds and builds the control problem on the final radius.
pub fn resolve(cfg: &RunConfig) -> Result<Resolved, CliError> {
    let data = cfg.problem_data();
    let n = cfg.n_interval;
    let probe = ControlProblem::new(&data, n, 1.0, cfg.solver_config()).map_err(CliError::config)?;
    let norms = probe.data_norms();
    let o = cfg.ledger;
    let cs = cfg.constants;
    let q = cfg.p / (cfg.p - 1.0);

    let mut ca_report = None;
    let mut ce_report = None;
    let mut beta_n = None;
    let alpha = pick("alpha", o.alpha, || Ok((default_alpha(cfg.kappa), "surrogate: 2 / kappa".into())))?;
    let c_a = pick("c_a", o.c_a, || {
        let r = analytic_ca(cs.ca_grid, cs.ca_norm)?;
        ca_report = Some(r);
        Ok((r.value, format!("surrogate: sup of |A| + |DA h| + |D2A| on a {}-point grid ({:?})", cs.ca_grid, cs.ca_norm)))
    })?;
    let beta = pick("beta", o.beta, || {
        info!("estimating beta on n = {}", cs.beta_n);
        let b = estimate_beta_admissible(cs.beta_n, cfg.p, &cs.beta)?;
        beta_n = Some(cs.beta_n);
        Ok((b, format!("surrogate: discrete flux-to-gradient norm, max over probe curves, n = {}", cs.beta_n)))
    })?;
    let c_e = pick("c_e", o.c_e, || {
        info!("estimating C_E on n = {n}");
        let r = compute_ce(n, q, cs.extension)?;
        ce_report = Some(r);
        Ok((r.value, format!("surrogate: discrete W11 -> W1q extension norm ({:?}), n = {n}", cs.extension)))
    })?;
    let theta1 = pick("theta1", o.theta1, || {
        Ok((
            ConstantsLedger::default_theta1(beta.value, c_a.value),
            "default: midpoint of the admissible interval".into(),
        ))
    })?;
    let theta2 = pick("theta2", o.theta2, || Ok((0.5, "default".into())))?;

    let mut base = ConstantsLedger::new(
        cfg.kappa,
        cfg.lambda,
        cfg.p,
        alpha.value,
        beta.value,
        c_a.value,
        c_e.value,
        theta1.value,
        theta2.value,
    );
    if o.l_gprime.is_some() || o.l_gsecond.is_some() {
        let mut seeded = compute_thresholds(&base, norms).map_err(CliError::config)?;
        if let Some(d) = seeded.derived.as_mut() {
            d.l_gprime = o.l_gprime;
            d.l_gsecond = o.l_gsecond;
        }
        base = seeded;
    }
    let ledger = compute_thresholds(&base, norms).map_err(CliError::config)?;
    let derived = ledger.derived.as_ref().expect("thresholds computed");
    let (radius, radius_source) = match cfg.radius {
        Some(r) => (r, "config override".to_string()),
        None => (derived.uad_radius, "ledger: theta1 / (2 alpha)".to_string()),
    };
    let mut scfg = cfg.solver_config();
    scfg.weight_factor = ledger.weight_factor();
    let cp = ControlProblem::new(&data, n, radius, scfg).map_err(CliError::config)?;
    Ok(Resolved {
        cfg: cfg.clone(),
        ledger,
        detail: ConstantsDetail {
            sources: vec![alpha, beta, c_a, c_e, theta1, theta2],
            c_a: ca_report,
            c_e: ce_report,
            beta_n,
            radius,
            radius_source,
        },
        cp,
    })
}
