//! Nested prediction sets and the radius each observation induces.
//!
//! Regression uses symmetric intervals `[ŷ − s, ŷ + s]`; classification uses
//! the regularized adaptive score
//!
//! ```text
//! S(x, y) = λ sqrt([k_y − k_reg]_+) + U f_y(x) + Σ_{i<k_y} f_{π(i)}(x)
//! ```
//!
//! where `π` sorts the class probabilities in decreasing order (ties by
//! ascending class index) and `k_y` is the rank of `y`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Tolerance on the probability simplex before renormalizing.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionPoint {
    pub y: f64,
    pub yhat: f64,
    pub horizon: u32,
}

impl RegressionPoint {
    pub fn new(y: f64, yhat: f64) -> Result<Self> {
        Self::with_horizon(y, yhat, 1)
    }

    pub fn with_horizon(y: f64, yhat: f64, horizon: u32) -> Result<Self> {
        if !(y.is_finite() && yhat.is_finite()) {
            return Err(Error::NonFinite("regression point"));
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1"));
        }
        Ok(Self { y, yhat, horizon })
    }
}

/// Closed interval `[center − radius, center + radius]`; empty when the
/// radius is negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub center: f64,
    pub radius: f64,
}

impl Interval {
    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    pub fn is_empty(&self) -> bool {
        self.radius < 0.0
    }

    /// Membership is decided on the radius so it agrees exactly with
    /// [`interval_radius`].
    pub fn contains(&self, y: f64) -> bool {
        (y - self.center).abs() <= self.radius
    }

    pub fn width(&self) -> f64 {
        2.0 * self.radius.max(0.0)
    }
}

/// Smallest `s` with `y ∈ [ŷ − s, ŷ + s]`.
pub fn interval_radius(point: &RegressionPoint) -> f64 {
    (point.y - point.yhat).abs()
}

pub fn interval_set(yhat: f64, radius: f64) -> Interval {
    Interval { center: yhat, radius }
}

/// Regularization settings for the classification score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RapsParams {
    pub lambda: f64,
    pub k_reg: usize,
}

impl RapsParams {
    /// `λ = 0.01, k_reg = 20`.
    pub const TINY_IMAGENET: RapsParams = RapsParams { lambda: 0.01, k_reg: 20 };
    /// `λ = 0.01, k_reg = 10`.
    pub const IMAGENET: RapsParams = RapsParams { lambda: 0.01, k_reg: 10 };

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidArgument("lambda must be non-negative"));
        }
        if self.k_reg == 0 {
            return Err(Error::InvalidArgument("k_reg must be at least 1"));
        }
        Ok(())
    }

    /// Largest attainable score over `classes` classes: `1 + λ sqrt([m − k_reg]_+)`.
    pub fn radius_bound(&self, classes: usize) -> f64 {
        1.0 + self.lambda * math::sqrt(classes.saturating_sub(self.k_reg) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationPoint {
    probs: Vec<f64>,
    label: usize,
    u: f64,
    params: RapsParams,
}

impl ClassificationPoint {
    /// Validates the simplex (renormalizing within [`PROB_SUM_TOLERANCE`]),
    /// the label range, and `u ∈ [0, 1]`.
    pub fn new(mut probs: Vec<f64>, label: usize, u: f64, params: RapsParams) -> Result<Self> {
        params.validate()?;
        let m = probs.len();
        if m < 2 {
            return Err(Error::InvalidArgument("need at least two classes"));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("class probabilities"));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidArgument("class probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidArgument("class probabilities must sum to 1"));
        }
        for p in &mut probs {
            *p /= total;
        }
        if label >= m {
            return Err(Error::ClassOutOfRange { index: label, classes: m });
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidArgument("u must lie in [0, 1]"));
        }
        Ok(Self { probs, label, u, params })
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn params(&self) -> RapsParams {
        self.params
    }

    /// Scores of every class, indexed by class.
    pub fn scores(&self) -> Vec<f64> {
        let m = self.probs.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        let mut scores = vec![0.0; m];
        let mut prefix = 0.0;
        for (pos, &class) in order.iter().enumerate() {
            let rank = pos + 1;
            let reg = self.params.lambda * math::sqrt(rank.saturating_sub(self.params.k_reg) as f64);
            scores[class] = reg + self.u * self.probs[class] + prefix;
            prefix += self.probs[class];
        }
        scores
    }
}

/// Score of `target` under the point's randomization draw.
pub fn raps_score(point: &ClassificationPoint, target: usize) -> Result<f64> {
    if target >= point.classes() {
        return Err(Error::ClassOutOfRange { index: target, classes: point.classes() });
    }
    Ok(point.scores()[target])
}

/// The true radius of a classification point: the score of its label.
pub fn classification_radius(point: &ClassificationPoint) -> f64 {
    point.scores()[point.label]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub members: Vec<usize>,
}

impl PredictionSet {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, class: usize) -> bool {
        self.members.binary_search(&class).is_ok()
    }
}

/// `{y : S(x, y) ≤ ŝ}`, members in ascending class order.
pub fn raps_set(point: &ClassificationPoint, radius: f64) -> PredictionSet {
    let members = point
        .scores()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= radius)
        .map(|(c, _)| c)
        .collect();
    PredictionSet { members }
}

/// Number of classes scoring no higher than the true label.
pub fn oracle_set_size(point: &ClassificationPoint) -> usize {
    let scores = point.scores();
    let own = scores[point.label];
    scores.iter().filter(|&&s| s <= own).count()
}
