use super::{Learner, Turn, UpdateInfo};
use crate::error::{Error, Result};
use crate::loss::Alpha;

/// Adaptive conformal inference on the radius: fixed-step online gradient
/// descent `ŝ_{t+1} = ŝ_t + η(err_t − α)`.
#[derive(Debug, Clone)]
pub struct Aci {
    alpha: Alpha,
    eta: f64,
    radius: f64,
    turn: Turn,
}

impl Aci {
    pub fn new(alpha: Alpha, eta: f64, initial: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive"));
        }
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial radius"));
        }
        Ok(Self { alpha, eta, radius: initial, turn: Turn::default() })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Learner for Aci {
    fn name(&self) -> &'static str {
        "aci"
    }

    fn predict(&mut self) -> Result<f64> {
        self.turn.begin_predict()?;
        Ok(self.radius)
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        let err = if self.radius < true_radius { 1.0 } else { 0.0 };
        self.radius += self.eta * (err - self.alpha.get());
        Ok(UpdateInfo::default())
    }
}
