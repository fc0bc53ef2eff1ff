//! Scalar primitives: the pinball (quantile) loss, its gradient, and the
//! empirical/weighted quantiles that minimize it.
//!
//! Losses are written for the `(1 − α)` level used throughout the crate:
//!
//! ```text
//! ℓ(S, ŝ) = max{ (1 − α)(S − ŝ), α(ŝ − S) }
//! ∇ℓ(S, ŝ) = α − 1{ŝ < S}
//! ```

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Target miscoverage level, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidAlpha(value))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// The coverage level `1 − α`.
    #[inline]
    pub fn coverage(self) -> f64 {
        1.0 - self.0
    }
}

/// Upper bound `D` on the true radii.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RadiusBound(f64);

impl RadiusBound {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidRadiusBound(value))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Clamp a radius into `[0, D]`, reporting whether it moved.
    pub fn clip(self, radius: f64) -> (f64, bool) {
        if radius < 0.0 {
            (0.0, true)
        } else if radius > self.0 {
            (self.0, true)
        } else {
            (radius, false)
        }
    }
}

/// Loss and gradient of one step, evaluated at the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinballEval {
    pub loss: f64,
    pub gradient: f64,
}

fn check_finite(x: f64, what: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Pinball loss on raw values, without validation.
#[inline]
pub fn pinball(alpha: f64, true_radius: f64, predicted: f64) -> f64 {
    let diff = true_radius - predicted;
    if diff > 0.0 {
        (1.0 - alpha) * diff
    } else {
        -alpha * diff
    }
}

#[inline]
pub(crate) fn gradient(alpha: f64, true_radius: f64, predicted: f64) -> f64 {
    if predicted < true_radius {
        alpha - 1.0
    } else {
        alpha
    }
}

/// `max{(1 − α)(S − ŝ), α(ŝ − S)}`.
pub fn pinball_loss(alpha: Alpha, true_radius: f64, predicted: f64) -> Result<f64> {
    check_finite(true_radius, "true radius")?;
    check_finite(predicted, "predicted radius")?;
    Ok(pinball(alpha.get(), true_radius, predicted))
}

/// `α − 1{ŝ < S}`. A tie counts as covered.
pub fn pinball_gradient(alpha: Alpha, true_radius: f64, predicted: f64) -> Result<f64> {
    check_finite(true_radius, "true radius")?;
    check_finite(predicted, "predicted radius")?;
    Ok(gradient(alpha.get(), true_radius, predicted))
}

pub fn pinball_eval(alpha: Alpha, true_radius: f64, predicted: f64) -> Result<PinballEval> {
    Ok(PinballEval {
        loss: pinball_loss(alpha, true_radius, predicted)?,
        gradient: pinball_gradient(alpha, true_radius, predicted)?,
    })
}

/// Smallest `j ∈ [1, n]` with `j / n ≥ beta`.
pub(crate) fn quantile_rank(n: usize, beta: f64) -> usize {
    let nf = n as f64;
    let mut j = (math::ceil(beta * nf) as usize).clamp(1, n);
    // Correct for rounding in `beta * n` so the rank matches the definition.
    while j > 1 && ((j - 1) as f64) / nf >= beta {
        j -= 1;
    }
    while j < n && (j as f64) / nf < beta {
        j += 1;
    }
    j
}

fn check_level(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument("quantile level must lie in (0, 1)"))
    }
}

/// `β`-quantile of an already sorted slice.
pub(crate) fn sorted_quantile(sorted: &[f64], beta: f64) -> f64 {
    sorted[quantile_rank(sorted.len(), beta) - 1]
}

/// `inf{s : (1/n) Σ 1[v_i ≤ s] ≥ β}`, i.e. the `⌈βn⌉`-th order statistic.
pub fn empirical_quantile(values: &[f64], beta: f64) -> Result<f64> {
    check_level(beta)?;
    if values.is_empty() {
        return Err(Error::Empty("quantile of an empty sequence"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantile input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&sorted, beta))
}

/// `inf{s : Σ w_i 1[v_i ≤ s] / Σ w_i ≥ β}`.
pub fn weighted_quantile(values: &[f64], weights: &[f64], beta: f64) -> Result<f64> {
    check_level(beta)?;
    if values.len() != weights.len() {
        return Err(Error::InvalidArgument("values and weights differ in length"));
    }
    if values.is_empty() {
        return Err(Error::Empty("quantile of an empty sequence"));
    }
    if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("quantile input"));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument("weights must be non-negative"));
    }
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    weighted_quantile_in_place(&mut pairs, beta)
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub(crate) fn weighted_quantile_in_place(pairs: &mut [(f64, f64)], beta: f64) -> Result<f64> {
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights sum to zero"));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cumulative = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        // Tied values enter the cumulative mass together.
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            cumulative += pairs[i].1;
            i += 1;
        }
        if cumulative / total >= beta {
            return Ok(v);
        }
    }
    Ok(pairs[pairs.len() - 1].0)
}

/// Minimizer and minimum of `s ↦ Σ_t ℓ(v_t, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestFixed {
    pub radius: f64,
    pub total_loss: f64,
}

/// Best fixed radius in hindsight: the `(1 − α)` empirical quantile of the
/// values, together with the total pinball loss it attains.
pub fn best_fixed_radius(values: &[f64], alpha: Alpha) -> Result<BestFixed> {
    let radius = empirical_quantile(values, alpha.coverage())?;
    let total_loss = values.iter().map(|&v| pinball(alpha.get(), v, radius)).sum();
    Ok(BestFixed { radius, total_loss })
}
