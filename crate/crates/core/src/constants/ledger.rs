use serde::{Deserialize, Serialize};

use crate::error::{FbpError, Result};

/// Base constants of the well-posedness theory plus every threshold derived
/// from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsLedger {
    pub kappa: f64,
    pub lambda: f64,
    pub p: f64,
    /// Conjugate exponent `p / (p - 1)`.
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c_a: f64,
    pub c_e: f64,
    pub theta1: f64,
    pub theta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedConstants>,
}

/// Norms of the data entering the second-order threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DataNorms {
    pub gamma_d_l2: f64,
    pub y_d_l2: f64,
    pub v_w1p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub lambda1: f64,
    pub lambda2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub theta3: f64,
    pub v_invariance: f64,
    pub v_contraction: f64,
    pub v_soc: f64,
    pub u_radius: f64,
    pub uad_radius: f64,
    pub l_g: f64,
    #[serde(default)]
    pub l_gprime: Option<f64>,
    #[serde(default)]
    pub l_gsecond: Option<f64>,
    pub data: DataNorms,
}

/// Thresholds that only need the base constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub lambda1: f64,
    pub lambda2: f64,
    pub v_invariance: f64,
    pub v_contraction: f64,
    pub u_radius: f64,
    pub uad_radius: f64,
}

impl ConstantsLedger {
    /// Base constants with `q` filled from `p`; nothing derived yet.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kappa: f64,
        lambda: f64,
        p: f64,
        alpha: f64,
        beta: f64,
        c_a: f64,
        c_e: f64,
        theta1: f64,
        theta2: f64,
    ) -> Self {
        Self {
            kappa,
            lambda,
            p,
            q: p / (p - 1.0),
            alpha,
            beta,
            c_a,
            c_e,
            theta1,
            theta2,
            derived: None,
        }
    }

    /// Lower end of the open interval `theta1` must lie in.
    pub fn theta1_lower(&self) -> f64 {
        let bc = self.beta * self.c_a;
        bc / (1.0 + bc)
    }

    /// Midpoint of the admissible `theta1` interval.
    pub fn default_theta1(beta: f64, c_a: f64) -> f64 {
        let bc = beta * c_a;
        0.5 * (bc / (1.0 + bc) + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let lower = self.theta1_lower();
        if !(self.theta1 > lower && self.theta1 < 1.0) {
            return Err(FbpError::ThetaRange {
                theta1: self.theta1,
                lower,
            });
        }
        if !(self.theta2 > 0.0 && self.theta2 < 1.0) {
            return Err(FbpError::InvalidInput(format!(
                "theta2 = {} outside (0, 1)",
                self.theta2
            )));
        }
        for (name, x) in [
            ("kappa", self.kappa),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("c_a", self.c_a),
            ("c_e", self.c_e),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(FbpError::InvalidInput(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.p > 1.0) || (self.q - self.p / (self.p - 1.0)).abs() > 1e-12 * self.q.abs().max(1.0) {
            return Err(FbpError::InvalidInput(format!(
                "q = {} is not conjugate to p = {}",
                self.q, self.p
            )));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Thresholds {
        let bc = self.beta * self.c_a;
        let lambda1 = 1.0 + bc;
        let lambda2 = 1.0 + 2.0 * bc;
        let k = self.alpha * self.c_e * self.c_a;
        Thresholds {
            lambda1,
            lambda2,
            v_invariance: (1.0 - self.theta1) / (k * lambda1),
            v_contraction: (1.0 - self.theta2) / (k * lambda1 * lambda1),
            u_radius: self.theta1 / self.alpha,
            uad_radius: self.theta1 / (2.0 * self.alpha),
        }
    }

    /// `1 + beta C_A`, the weight factor of the product norm.
    pub fn weight_factor(&self) -> f64 {
        1.0 + self.beta * self.c_a
    }
}

/// Fills every derived field. Empirical Lipschitz values already present are
/// carried over.
pub fn compute_thresholds(ledger: &ConstantsLedger, data: DataNorms) -> Result<ConstantsLedger> {
    ledger.validate()?;
    let t = ledger.thresholds();
    let (a, b, ca, ce) = (ledger.alpha, ledger.beta, ledger.c_a, ledger.c_e);
    let (th1, th2) = (ledger.theta1, ledger.theta2);
    let omega1 = 1.0 + data.gamma_d_l2;
    let omega2 = (1.0 - th1) / (a * ce * ca) + data.y_d_l2;
    let inner = (ca * t.lambda2 / th2) * (a * ce * t.lambda1 * (omega1 + 0.5 * omega2 * omega2) + 2.0 * b * omega2)
        + 2.0 * t.lambda1 * t.lambda1 * omega2;
    let theta3 = th2 * th2 / (a * a * t.lambda1) / inner;
    let (l_gprime, l_gsecond) = ledger
        .derived
        .as_ref()
        .map(|d| (d.l_gprime, d.l_gsecond))
        .unwrap_or((None, None));
    let mut out = ledger.clone();
    out.derived = Some(DerivedConstants {
        lambda1: t.lambda1,
        lambda2: t.lambda2,
        omega1,
        omega2,
        theta3,
        v_invariance: t.v_invariance,
        v_contraction: t.v_contraction,
        v_soc: theta3 * ledger.lambda / 2.0,
        u_radius: t.u_radius,
        uad_radius: t.uad_radius,
        l_g: (a / th2) * t.lambda1 * t.lambda1 * data.v_w1p,
        l_gprime,
        l_gsecond,
        data,
    });
    Ok(out)
}
