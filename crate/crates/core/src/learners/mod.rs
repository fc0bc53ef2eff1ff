//! Single-track online conformal predictors.
//!
//! Each learner is a sequential state machine: [`Learner::predict`] emits the
//! radius for the current step, then [`Learner::update`] absorbs the true
//! radius. Calls must alternate; a second `predict` (or an `update` without a
//! pending prediction) is rejected with [`Error::OutOfTurn`].

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::{Alpha, RadiusBound};
use crate::saocp::Saocp;

mod aci;
mod faci;
mod nexcp;
mod scp;
mod sfogd;
mod trivial;

pub use aci::Aci;
pub use faci::{Faci, FaciConfig, FaciRadius, MetaRate, DEFAULT_FACI_RATES};
pub use nexcp::NexCp;
pub use scp::Scp;
pub use sfogd::SfOgd;
pub use trivial::Trivial;

/// Side information produced while absorbing one observation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateInfo {
    /// Number of experts that were active at this step (meta-learners only).
    pub active_experts: Option<usize>,
    /// `Σ_i p_i 1{ŝ_{t,i} < S_t}` when the prediction was sampled.
    pub expected_err: Option<f64>,
}

pub trait Learner {
    fn name(&self) -> &'static str;

    /// Emit `ŝ_t`.
    fn predict(&mut self) -> Result<f64>;

    /// Absorb `S_t` after a prediction.
    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo>;
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn predict(&mut self) -> Result<f64> {
        (**self).predict()
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        (**self).update(true_radius)
    }
}

/// Tracks whether a prediction is outstanding.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Turn {
    pending: bool,
}

impl Turn {
    pub(crate) fn begin_predict(&mut self) -> Result<()> {
        if self.pending {
            return Err(Error::OutOfTurn("predict called twice"));
        }
        self.pending = true;
        Ok(())
    }

    pub(crate) fn begin_update(&mut self, true_radius: f64) -> Result<()> {
        if !self.pending {
            return Err(Error::OutOfTurn("update without a prediction"));
        }
        if !true_radius.is_finite() {
            return Err(Error::NonFinite("true radius"));
        }
        self.pending = false;
        Ok(())
    }
}

/// Past radii kept in ascending order for repeated quantile queries.
#[derive(Debug, Clone, Default)]
pub(crate) struct SortedHistory {
    values: Vec<f64>,
}

impl SortedHistory {
    pub(crate) fn len(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn insert(&mut self, v: f64) {
        let at = self.values.partition_point(|&x| x <= v);
        self.values.insert(at, v);
    }

    pub(crate) fn quantile(&self, beta: f64) -> f64 {
        crate::loss::sorted_quantile(&self.values, beta)
    }

    /// Number of stored values strictly below `v`.
    pub(crate) fn count_below(&self, v: f64) -> usize {
        self.values.partition_point(|&x| x < v)
    }
}

/// Declarative description of a learner, used to build boxed instances.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodConfig {
    Scp,
    NexCp { decay: Option<f64> },
    Aci { eta: Option<f64>, initial: f64 },
    SfOgd { eta: Option<f64>, initial: f64 },
    Faci(FaciConfig),
    FaciS { config: FaciConfig, initial: f64 },
    Saocp { g: u64, randomized: bool },
    Trivial { horizon: usize },
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Scp => "scp",
            MethodConfig::NexCp { .. } => "nexcp",
            MethodConfig::Aci { .. } => "aci",
            MethodConfig::SfOgd { .. } => "sf-ogd",
            MethodConfig::Faci(_) => "faci",
            MethodConfig::FaciS { .. } => "faci-s",
            MethodConfig::Saocp { .. } => "saocp",
            MethodConfig::Trivial { .. } => "trivial",
        }
    }

    /// Build the learner. `sampler` supplies randomness for randomized SAOCP
    /// and is ignored by every other method.
    pub fn build(
        &self,
        alpha: Alpha,
        bound: RadiusBound,
        sampler: Option<Box<dyn rand_core::RngCore + Send>>,
    ) -> Result<Box<dyn Learner + Send>> {
        Ok(match self {
            MethodConfig::Scp => Box::new(Scp::new(alpha, bound)),
            MethodConfig::NexCp { decay } => Box::new(match decay {
                Some(d) => NexCp::with_decay(alpha, bound, *d)?,
                None => NexCp::new(alpha, bound),
            }),
            MethodConfig::Aci { eta, initial } => {
                let eta = eta.unwrap_or(bound.get() / 10.0);
                Box::new(Aci::new(alpha, eta, *initial)?)
            }
            MethodConfig::SfOgd { eta, initial } => {
                let eta = eta.unwrap_or(SfOgd::default_eta(bound));
                Box::new(SfOgd::new(alpha, eta, *initial)?)
            }
            MethodConfig::Faci(config) => Box::new(Faci::new(alpha, bound, config.clone())?),
            MethodConfig::FaciS { config, initial } => {
                Box::new(FaciRadius::new(alpha, bound, config.clone(), *initial)?)
            }
            MethodConfig::Saocp { g, randomized } => {
                if *randomized {
                    let rng = sampler.ok_or(Error::InvalidArgument(
                        "randomized SAOCP needs a sampler",
                    ))?;
                    Box::new(Saocp::randomized(alpha, bound, *g, rng)?)
                } else {
                    Box::new(Saocp::new(alpha, bound, *g)?)
                }
            }
            MethodConfig::Trivial { horizon } => Box::new(Trivial::new(alpha, bound, *horizon)?),
        })
    }
}
