//! Constants of the well-posedness theory: analytic bounds, discrete
//! estimates of the inf-sup and extension constants, derived thresholds and
//! regularity diagnostics.

mod estimates;
mod ledger;
mod lipschitz;
mod regularity;

pub use estimates::{
    analytic_ca, beta_probe_curves, ca_parts_at, compute_ce, default_alpha, estimate_beta,
    estimate_beta_admissible, extension_norm, harmonic_solver, plateau, BetaConfig, BetaEstimate,
    CaReport, CeReport, ExtensionKind, MatrixNorm,
};
pub use ledger::{compute_thresholds, ConstantsLedger, DataNorms, DerivedConstants, Thresholds};
pub use lipschitz::{lipschitz_quotient, measure_lipschitz, sample_control, LipschitzKind, LipschitzReport};
pub use regularity::{
    gagliardo_p1, gagliardo_piecewise_constant, gagliardo_seminorm, gagliardo_slopes,
    recover_nodal, SlopeField,
};
