use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::{Learner, Turn, UpdateInfo};
use crate::error::{Error, Result};
use crate::loss::{weighted_quantile_in_place, Alpha, RadiusBound};
use crate::math;

/// Relative weight below which an old radius is dropped from the buffer. Such
/// a weight is far below the resolution of the cumulative mass.
const NEGLIGIBLE_WEIGHT: f64 = 1e-18;

/// Non-exchangeable split conformal: a weighted `(1 − α)` quantile of past
/// radii with geometrically decaying weights `decay^{age}`, newest first.
#[derive(Debug, Clone)]
pub struct NexCp {
    alpha: Alpha,
    bound: RadiusBound,
    decay: f64,
    /// Newest radius at the front.
    history: VecDeque<f64>,
    capacity: usize,
    scratch: Vec<(f64, f64)>,
    turn: Turn,
}

impl NexCp {
    /// Decay `1 − 3α/4`.
    pub fn new(alpha: Alpha, bound: RadiusBound) -> Self {
        Self::with_decay(alpha, bound, 1.0 - 0.75 * alpha.get()).expect("default decay is valid")
    }

    pub fn with_decay(alpha: Alpha, bound: RadiusBound, decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::InvalidArgument("decay must lie in (0, 1]"));
        }
        let capacity = if decay < 1.0 {
            (math::ln(NEGLIGIBLE_WEIGHT) / math::ln(decay)) as usize + 1
        } else {
            usize::MAX
        };
        Ok(Self {
            alpha,
            bound,
            decay,
            history: VecDeque::new(),
            capacity,
            scratch: Vec::new(),
            turn: Turn::default(),
        })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }
}

impl Learner for NexCp {
    fn name(&self) -> &'static str {
        "nexcp"
    }

    fn predict(&mut self) -> Result<f64> {
        self.turn.begin_predict()?;
        if self.history.is_empty() {
            return Ok(self.bound.get());
        }
        self.scratch.clear();
        let mut w = 1.0;
        for &r in &self.history {
            w *= self.decay;
            self.scratch.push((r, w));
        }
        weighted_quantile_in_place(&mut self.scratch, self.alpha.coverage())
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        self.history.push_front(true_radius);
        if self.history.len() > self.capacity {
            self.history.pop_back();
        }
        Ok(UpdateInfo::default())
    }
}
