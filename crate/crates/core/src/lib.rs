//! Online conformal prediction under arbitrary distribution shift.
//!
//! Every learner in this crate predicts a scalar radius `ŝ_t` that
//! parameterizes a nested family of prediction sets, then absorbs the true
//! radius `S_t` (the smallest radius whose set would have covered the label).
//! The crate provides:
//!
//! - [`loss`]: pinball loss, its gradient, empirical and weighted quantiles.
//! - [`learners`]: SCP, NExCP, ACI, SF-OGD, FACI, FACI-S and a trivial
//!   coverage-only baseline behind the [`Learner`] trait.
//! - [`saocp`]: the strongly adaptive meta-learner that runs SF-OGD experts
//!   on dyadic lifetimes and weights them by coin betting.
//! - [`conformal`]: interval and RAPS-style classification set constructors.
//! - [`metrics`]: coverage error, local coverage, strongly adaptive regret.
//! - [`run`]: the predict/observe loop that turns a radius stream into a trace.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod conformal;
mod error;
pub mod learners;
pub mod loss;
mod math;
pub mod metrics;
pub mod run;
pub mod saocp;

pub use error::{Error, Result};
pub use learners::{Learner, MethodConfig, UpdateInfo};
pub use loss::{Alpha, RadiusBound};
pub use metrics::{MetricsReport, StepTrace};
pub use saocp::Saocp;
