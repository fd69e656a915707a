//! Key rates, security thresholds and Monte Carlo validation for
//! continuous-variable measurement-device-independent QKD under two-mode
//! coherent Gaussian attacks.
//!
//! All covariance matrices use vacuum-noise units (vacuum variance 1) and
//! the quadrature ordering `(q1, p1, q2, p2, ...)`.

// `!(x >= lo)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod gaussian;
pub mod montecarlo;
pub mod rate;
pub mod threshold;

pub use attack::{AttackClass, AttackParams, AttackRegion};
pub use gaussian::{CovarianceMatrix, GaussianState, SymplecticSpectrum};
pub use rate::{Modulation, NoiseBudget, ProtocolParams, RateError, RateResult};
