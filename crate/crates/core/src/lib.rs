//! Adaptive observers for systems affine in the unmeasured state and in an
//! unknown constant parameter, built on dynamic regressor extension and
//! mixing.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the plant description, built-in benchmark scenarios and the
//!   quadratic certificate `P`.
//! - [`mixing`]: determinant, adjugate, excitation scalar and the gain shapes
//!   of the parameter update.
//! - [`observer`]: observer right-hand sides, plain and with extension
//!   feedback.
//! - [`sim`]: fixed-step RK4 co-simulation with an estimation-error oracle.
//! - [`diagnostics`]: excitation, gain-bound and Lyapunov checks.
//! - [`trace_csv`]: the on-disk trace format.

pub mod diagnostics;
pub mod error;
pub mod mixing;
pub mod model;
pub mod observer;
pub mod sim;
pub mod trace_csv;

pub use error::{Error, Result};
pub use mixing::MixingMode;
pub use model::{builtin_scenario, CertificateP, Dimensions, Scenario, SystemModel};
pub use observer::{ObserverGains, ObserverState, ObserverVariant};
pub use sim::{run, InitialOverrides, SimConfig, Termination, Trace, TraceRow};
