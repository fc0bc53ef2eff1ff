use super::{Learner, Turn, UpdateInfo};
use crate::error::{Error, Result};
use crate::loss::{gradient, Alpha, RadiusBound};
use crate::math;

/// Scale-free online gradient descent on the pinball loss:
///
/// ```text
/// ŝ_{t+1} = ŝ_t − η ∇ℓ_t(ŝ_t) / sqrt(Σ_{i≤t} ∇ℓ_i(ŝ_i)²)
/// ```
///
/// The gradient magnitude is at least `min(α, 1 − α)`, so the denominator is
/// never zero after the first update.
#[derive(Debug, Clone)]
pub struct SfOgd {
    alpha: Alpha,
    eta: f64,
    radius: f64,
    sum_sq_grad: f64,
    turn: Turn,
}

impl SfOgd {
    /// `D / √3`.
    pub fn default_eta(bound: RadiusBound) -> f64 {
        bound.get() / math::sqrt(3.0)
    }

    pub fn new(alpha: Alpha, eta: f64, initial: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive"));
        }
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial radius"));
        }
        Ok(Self { alpha, eta, radius: initial, sum_sq_grad: 0.0, turn: Turn::default() })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The radius the next `predict` will emit.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sum_sq_grad(&self) -> f64 {
        self.sum_sq_grad
    }

    /// Apply one gradient step against `true_radius` without turn checks.
    pub(crate) fn absorb(&mut self, true_radius: f64) {
        let g = gradient(self.alpha.get(), true_radius, self.radius);
        self.sum_sq_grad += g * g;
        self.radius -= self.eta * g / math::sqrt(self.sum_sq_grad);
    }
}

impl Learner for SfOgd {
    fn name(&self) -> &'static str {
        "sf-ogd"
    }

    fn predict(&mut self) -> Result<f64> {
        self.turn.begin_predict()?;
        Ok(self.radius)
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        self.absorb(true_radius);
        Ok(UpdateInfo::default())
    }
}
