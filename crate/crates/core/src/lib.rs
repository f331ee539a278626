//! Gradient flow and gradient descent of diagonal linear networks on
//! over-parameterized least squares, together with the basis-pursuit
//! minimizers the dynamics select and every explicit constant that
//! quantifies the selection.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] — small dense kernels: Jacobi SVD, pivoted thin QR,
//!   nullspace bases, LU solves. Everything else consumes these.
//! * [`potentials`] — the mirror-potential family `h_p`, `q_p`, `g_p`
//!   and the vectorized potentials `Q_p`, `G_p` with derivatives.
//! * [`instances`] — regression instances, the built-in example systems,
//!   the shift family, and seeded random instance generation.
//! * [`minimizers`] — basis pursuit, the optimal face, the selected
//!   minimizer `w_p`, the regularized points `q*`, `m*`, `g*`, KKT
//!   verification, and rank-deficient reduction.
//! * [`dynamics`] — the DLN loss, gradient descent, high-accuracy
//!   implicit Runge-Kutta flow integration, invariant monitors, and the
//!   explicit convergence/step-size bounds.
//! * [`conditioning`] — the diagonal-scaling condition constants chi,
//!   script-K, and C_A.
//! * [`sweep`] — deterministic alpha sweeps with slope fits and CSV/JSON
//!   emission, shared by the CLI.
//!
//! All operations are pure with respect to their inputs and safe to call
//! concurrently on distinct data; nothing in the crate holds global state.

pub mod conditioning;
pub mod dynamics;
pub mod error;
pub mod instances;
pub mod linalg;
pub mod minimizers;
pub mod potentials;
pub mod rng;
pub mod sweep;
pub mod tol;

pub use error::{Error, Result};
