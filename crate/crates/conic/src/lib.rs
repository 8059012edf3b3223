//! Self-contained dense conic solvers.
//!
//! * [`lp`]: a two-phase primal simplex method with Bland's anti-cycling rule
//!   for small dense linear programs in inequality form.
//! * [`sdp`]: a primal-dual interior-point method for semidefinite programs
//!   over the Hermitian PSD cone, solved through the real symmetric
//!   embedding provided by [`embed`].
//!
//! Both solvers are single-threaded and fully deterministic: identical inputs
//! produce bit-identical outputs.

pub mod embed;
mod ipm;
pub mod lp;
pub mod sdp;

pub use embed::hermitian_to_real_embedding;
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus};
pub use sdp::{
    solve_sdp, solve_sdp_with_log, ConstraintMatrix, IterationLog, LinearConstraint, SdpOptions, SdpProblem,
    SdpSolution, SdpStatus,
};

use nalgebra::{Complex, DMatrix};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex<f64>>;

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("non-finite entry in problem data")]
    NonFinite,
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
}

/// Largest entrywise deviation `|M - M^H|`, used for Hermitian checks.
pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Returns an error unless `m` is square and Hermitian within a relative
/// tolerance of `1e-9` of its largest entry.
pub fn check_hermitian(m: &CMatrix) -> Result<(), ConicError> {
    if m.nrows() != m.ncols() {
        return Err(ConicError::Shape(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(ConicError::NonFinite);
    }
    let asym = hermitian_asymmetry(m);
    if asym > 1e-9 * max_abs(m).max(f64::MIN_POSITIVE) {
        return Err(ConicError::NotHermitian { asymmetry: asym });
    }
    Ok(())
}
