use super::{Learner, SortedHistory, Turn, UpdateInfo};
use crate::error::Result;
use crate::loss::{Alpha, RadiusBound};

/// Split conformal prediction run online: predicts the `(1 − α)` empirical
/// quantile of every radius seen so far, and `D` before the first one.
#[derive(Debug, Clone)]
pub struct Scp {
    alpha: Alpha,
    bound: RadiusBound,
    history: SortedHistory,
    turn: Turn,
}

impl Scp {
    pub fn new(alpha: Alpha, bound: RadiusBound) -> Self {
        Self { alpha, bound, history: SortedHistory::default(), turn: Turn::default() }
    }

    fn current(&self) -> f64 {
        if self.history.is_empty() {
            self.bound.get()
        } else {
            self.history.quantile(self.alpha.coverage())
        }
    }
}

impl Learner for Scp {
    fn name(&self) -> &'static str {
        "scp"
    }

    fn predict(&mut self) -> Result<f64> {
        self.turn.begin_predict()?;
        Ok(self.current())
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        self.history.insert(true_radius);
        Ok(UpdateInfo::default())
    }
}
