//! Secure-estimation RIS design.
//!
//! Alice transmits a complex parameter vector through a reconfigurable
//! intelligent surface to Bob while an eavesdropper, Eve, listens. The
//! crate maximizes the trace of Bob's Fisher information over the RIS
//! reflection vector and Alice's per-parameter powers while capping Eve's
//! trace at `Δ`:
//!
//! - [`model`]: scenario types and seeded channel generation,
//! - [`fisher`]: Fisher information and its quadratic/diagonal forms,
//! - [`design`]: semidefinite relaxation of the RIS subproblem and
//!   rank-one recovery,
//! - [`power`]: the power-allocation linear program,
//! - [`altopt`]: alternating optimization and the two single-block
//!   benchmarks,
//! - [`estimation`]: maximum-likelihood estimation and Monte Carlo MSE.

pub mod altopt;
pub mod design;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod model;
pub mod power;
pub mod rng;

pub use error::{CoreError, Result};
pub use model::{
    generate_channels, validate_model, CMatrix, CVector, Dimensions, ModelIssue, PowerAllocation, Receiver, Regime,
    RisProfile, SystemModel,
};
pub use rng::Rng;
