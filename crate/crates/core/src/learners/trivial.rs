use super::{Learner, Turn, UpdateInfo};
use crate::error::{Error, Result};
use crate::loss::{Alpha, RadiusBound};
use crate::math;

/// Coverage-only baseline that ignores the data: predicts `D` for the first
/// `⌊(1 − α)T⌋` steps and `0` for the rest.
#[derive(Debug, Clone)]
pub struct Trivial {
    bound: RadiusBound,
    horizon: usize,
    full_steps: usize,
    step: usize,
    turn: Turn,
}

/// `⌊x⌋`, snapping values within rounding error of an integer onto it.
fn robust_floor(x: f64) -> f64 {
    let r = libm::round(x);
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        math::floor(x)
    }
}

impl Trivial {
    pub fn new(alpha: Alpha, bound: RadiusBound, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1"));
        }
        let full_steps = robust_floor(alpha.coverage() * horizon as f64) as usize;
        Ok(Self { bound, horizon, full_steps, step: 0, turn: Turn::default() })
    }

    /// `⌊(1 − α)T⌋`.
    pub fn full_steps(&self) -> usize {
        self.full_steps
    }
}

impl Learner for Trivial {
    fn name(&self) -> &'static str {
        "trivial"
    }

    fn predict(&mut self) -> Result<f64> {
        let step = self.step + 1;
        if step > self.horizon {
            return Err(Error::BeyondHorizon { step, horizon: self.horizon });
        }
        self.turn.begin_predict()?;
        self.step = step;
        Ok(if step <= self.full_steps { self.bound.get() } else { 0.0 })
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        Ok(UpdateInfo::default())
    }
}
