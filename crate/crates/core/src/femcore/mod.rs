//! Structured P1/Q1 finite elements on the interval `I = (0,1)` and the
//! square `(0,1)^2`: meshes, nodal fields, quadrature, assembly, sparse
//! solves and discrete norms.

mod assembly;
mod fields;
mod mesh;
mod norms;
mod quadrature;
mod sparse;

pub use assembly::{
    assemble_b_gamma, assemble_b_omega, assemble_bulk_with, bulk_action, bulk_load,
    extend, extension_transpose, line_load, mass_action, mass_matrix_1d,
};
pub use fields::{BoundaryCurve, BoundaryTag, BulkField, ControlProfile};
pub use mesh::{IntervalMesh, SquareMesh};
pub use norms::{compute_norm, l2_inner_1d, NormKind, NormedField};
pub use quadrature::{
    BulkQuadPoint, BulkQuadrature, IntervalQuadPoint, IntervalQuadrature, GAUSS2_POINTS,
    GAUSS2_WEIGHTS,
};
pub use sparse::{BandedCholesky, ConstrainedSolver, CsrMatrix, SparseSystem};
pub use assembly::{a_on_points, bulk_coeff_points, bulk_flux_load, eval_on_points};
pub use norms::bulk_norm;
