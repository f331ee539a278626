//! Centralized numerical tolerances. Every tolerance that appears in a
//! public contract lives here with a short justification; module-local
//! iteration knobs stay with their algorithms.

/// Orthonormality defect allowed for computed Q factors and nullspace
/// bases: `max |Q^T Q - I|`. Jacobi rotations and reorthogonalized MGS
/// keep this near machine epsilon; 1e-12 leaves two digits of slack.
pub const ORTHONORMALITY: f64 = 1e-12;

/// Allowed `max |A B|` for a nullspace basis B, relative to the operator
/// norm of A.
pub const NULLSPACE_RESIDUAL_REL: f64 = 1e-10;

/// Relative rank cutoff: a singular value below
/// `max(rows, cols) * sigma_1 * RANK_REL` counts as zero.
pub const RANK_REL: f64 = 1e-12;

/// Absolute tolerance (in u-space, scaled by max(1, |u|)) for inverting
/// h_p. Newton converges quadratically, so the achieved residual is
/// usually at machine level; the contract promises this much.
pub const HP_INV_ATOL: f64 = 1e-13;

/// Absolute quadrature tolerance for q_p (p > 2). A relative floor of a
/// few ULP protects integrals with huge endpoints.
pub const QUAD_ATOL: f64 = 1e-12;

/// Projected-gradient norm demanded of a returned minimizer of Q_p over
/// an affine set. Newton runs to stagnation, which typically lands far
/// below this.
pub const QSTAR_GRAD: f64 = 1e-10;

/// Stationarity/complementarity residual demanded of barrier solutions
/// on the optimal face.
pub const KKT_RESIDUAL: f64 = 1e-9;

/// Feasibility slack for vertices of the optimal face: `A v = y`,
/// `s^T v = R`, and `||v||_1 = R` must hold this tightly.
pub const FACE_VERTEX: f64 = 1e-9;

/// Barrier path: inner Newton tolerance and outer duality-gap stop.
pub const BARRIER_INNER: f64 = 1e-12;
pub const BARRIER_GAP: f64 = 1e-10;

/// Any |theta| component beyond this aborts a gradient-descent run with
/// a diverged status.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Default relative/absolute tolerances for flow integration.
pub const FLOW_RTOL: f64 = 1e-10;
pub const FLOW_ATOL: f64 = 1e-12;

/// Default accuracy target for the gradient-descent-matches-flow check.
pub const GD_MATCH_EPS: f64 = 1e-3;
