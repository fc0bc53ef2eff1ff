//! The predict/observe loop.

use alloc::vec::Vec;
use core::borrow::Borrow;

use crate::conformal::{interval_set, raps_set, ClassificationPoint, RegressionPoint};
use crate::error::Result;
use crate::learners::Learner;
use crate::loss::{pinball, Alpha, RadiusBound};
use crate::metrics::StepTrace;

/// Raw model output an observation was derived from.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    None,
    Regression(RegressionPoint),
    Classification(ClassificationPoint),
}

/// One step's true radius and, optionally, where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusObservation {
    pub t: u64,
    pub true_radius: f64,
    pub payload: Payload,
}

impl RadiusObservation {
    pub fn radius(t: u64, true_radius: f64) -> Self {
        Self { t, true_radius, payload: Payload::None }
    }

    /// Width of the set predicted at radius `s`: the interval length for
    /// regression, the set size for classification, `max(s, 0)` otherwise.
    pub fn width(&self, s: f64) -> f64 {
        match &self.payload {
            Payload::None => s.max(0.0),
            Payload::Regression(p) => interval_set(p.yhat, s).width(),
            Payload::Classification(p) => raps_set(p, s).size() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<StepTrace>,
    /// Number of true radii that fell outside `[0, D]` and were clamped.
    pub clip_count: usize,
}

/// Drive `learner` over `observations`, clamping each true radius into
/// `[0, D]` before it reaches the learner.
pub fn run<L, I>(learner: &mut L, observations: I, alpha: Alpha, bound: RadiusBound) -> Result<RunOutput>
where
    L: Learner + ?Sized,
    I: IntoIterator,
    I::Item: Borrow<RadiusObservation>,
{
    let mut trace = Vec::new();
    let mut clip_count = 0;
    for obs in observations {
        let obs = obs.borrow();
        let predicted = learner.predict()?;
        let (true_radius, clipped) = bound.clip(obs.true_radius);
        clip_count += usize::from(clipped);
        let info = learner.update(true_radius)?;
        trace.push(StepTrace {
            t: obs.t,
            predicted,
            true_radius,
            err: predicted < true_radius,
            loss: pinball(alpha.get(), true_radius, predicted),
            width: obs.width(predicted),
            active_experts: info.active_experts,
            expected_err: info.expected_err,
        });
    }
    Ok(RunOutput { trace, clip_count })
}

/// Convenience wrapper for bare radius sequences, numbered from 1.
pub fn run_radii<L: Learner + ?Sized>(
    learner: &mut L,
    radii: &[f64],
    alpha: Alpha,
    bound: RadiusBound,
) -> Result<RunOutput> {
    let obs = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| RadiusObservation::radius(i as u64 + 1, r));
    run(learner, obs, alpha, bound)
}
