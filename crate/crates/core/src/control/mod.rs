//! Reduced cost and its derivatives, projection onto the control ball,
//! projected-gradient optimization and second-order checks.

mod data;
mod optimize;
mod problem;
mod reduced;
mod soc;

pub use data::{DataFunction, NodalTable, ProblemData, SpatialFunction};
pub use optimize::{optimize, optimize_checked, stationarity_residual, OptConfig, OptIterate, OptResult};
pub use problem::{ControlProblem, Misfit};
pub use reduced::{
    eval_cost, eval_gradient, eval_gradient_direction, eval_jsecond, project_uad, ReducedPoint,
};
pub use soc::{
    check_quadratic_growth, in_cone, on_boundary, sample_cone, verify_soc, GrowthReport,
    GrowthSample, ProbeKind, SocReport, SocSample, BOUNDARY_TOL,
};
