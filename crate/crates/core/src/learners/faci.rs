//! Fully adaptive conformal inference: a bank of ACI experts with different
//! step sizes, mixed by exponential weights with uniform smoothing.
//!
//! [`Faci`] runs the experts on the quantile level `β` and predicts the
//! `β̄`-quantile of past radii; [`FaciRadius`] runs them on the radius itself.
//! The meta learning rate follows
//!
//! ```text
//! η_t = sqrt( (ln(N k) + 2) / Σ_{τ=t−k}^{t−1} ℓ_τ² )
//! ```
//!
//! with `ℓ_τ` the realized meta loss at step `τ`.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{Learner, SortedHistory, Turn, UpdateInfo};
use crate::error::{Error, Result};
use crate::loss::{pinball, Alpha, RadiusBound};
use crate::math;

pub const DEFAULT_FACI_RATES: [f64; 8] = [0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064, 0.128];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetaRate {
    /// Loss-adaptive schedule over a trailing window of length `k`.
    Schedule,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaciConfig {
    pub rates: Vec<f64>,
    pub window: usize,
    pub smoothing: f64,
    pub meta_rate: MetaRate,
}

impl Default for FaciConfig {
    fn default() -> Self {
        let window = 100;
        Self {
            rates: DEFAULT_FACI_RATES.to_vec(),
            window,
            smoothing: 1.0 / (2.0 * window as f64),
            meta_rate: MetaRate::Schedule,
        }
    }
}

impl FaciConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::InvalidArgument("FACI needs at least one expert"));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidArgument("FACI rates must be positive"));
        }
        if self.rates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("FACI rates must be strictly increasing"));
        }
        if self.window == 0 {
            return Err(Error::InvalidArgument("FACI window must be positive"));
        }
        let n = self.rates.len() as f64;
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) || self.smoothing * n > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument("FACI smoothing must lie in (0, 1) with σN ≤ 1"));
        }
        if let MetaRate::Fixed(eta) = self.meta_rate {
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(Error::InvalidArgument("fixed meta rate must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Exponential-weights mixer shared by both parametrizations.
#[derive(Debug, Clone)]
struct Mixer {
    config: FaciConfig,
    probs: Vec<f64>,
    /// Squared meta losses of the last `k` updates.
    recent_sq: VecDeque<f64>,
}

impl Mixer {
    fn new(config: FaciConfig) -> Result<Self> {
        config.validate()?;
        let n = config.rates.len();
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
            recent_sq: VecDeque::with_capacity(config.window),
            config,
        })
    }

    fn rate(&self) -> f64 {
        match self.config.meta_rate {
            MetaRate::Fixed(eta) => eta,
            MetaRate::Schedule => {
                let denom: f64 = self.recent_sq.iter().sum();
                if denom > 0.0 {
                    let n = self.probs.len() as f64;
                    math::sqrt((math::ln(n * self.config.window as f64) + 2.0) / denom)
                } else {
                    // No loss observed yet in the window: skip reweighting.
                    0.0
                }
            }
        }
    }

    fn mix(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    fn reweight(&mut self, expert_losses: &[f64], meta_loss: f64) {
        let eta = self.rate();
        let min_loss = expert_losses.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (p, &l) in self.probs.iter_mut().zip(expert_losses) {
            *p *= math::exp(-eta * (l - min_loss));
            total += *p;
        }
        let n = self.probs.len() as f64;
        let sigma = self.config.smoothing;
        for p in &mut self.probs {
            *p = (1.0 - sigma) * *p / total + sigma / n;
        }
        if self.recent_sq.len() == self.config.window {
            self.recent_sq.pop_front();
        }
        self.recent_sq.push_back(meta_loss * meta_loss);
    }
}

/// FACI in its quantile-level parametrization.
#[derive(Debug, Clone)]
pub struct Faci {
    alpha: Alpha,
    bound: RadiusBound,
    mixer: Mixer,
    levels: Vec<f64>,
    history: SortedHistory,
    losses: Vec<f64>,
    meta_level: f64,
    turn: Turn,
}

impl Faci {
    pub fn new(alpha: Alpha, bound: RadiusBound, config: FaciConfig) -> Result<Self> {
        let mixer = Mixer::new(config)?;
        let n = mixer.probs.len();
        Ok(Self {
            alpha,
            bound,
            mixer,
            levels: vec![alpha.coverage(); n],
            history: SortedHistory::default(),
            losses: vec![0.0; n],
            meta_level: alpha.coverage(),
            turn: Turn::default(),
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn weights(&self) -> &[f64] {
        &self.mixer.probs
    }

    /// Quantile of the history at `β`, clipped to `[1/n, 1 − 1/n]`.
    fn quantile_at(&self, level: f64) -> f64 {
        let n = self.history.len();
        if n == 1 {
            return self.history.quantile(0.5);
        }
        let lo = 1.0 / n as f64;
        self.history.quantile(level.clamp(lo, 1.0 - lo))
    }
}

impl Learner for Faci {
    fn name(&self) -> &'static str {
        "faci"
    }

    fn predict(&mut self) -> Result<f64> {
        self.turn.begin_predict()?;
        self.meta_level = self.mixer.mix(&self.levels);
        if self.history.is_empty() {
            return Ok(self.bound.get());
        }
        Ok(self.quantile_at(self.meta_level))
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        let n = self.history.len();
        if n > 0 {
            // Level at which the true radius would first be covered.
            let target = self.history.count_below(true_radius) as f64 / n as f64;
            let alpha = self.alpha.get();
            for (loss, &level) in self.losses.iter_mut().zip(&self.levels) {
                *loss = pinball(alpha, target, level);
            }
            let meta_loss = pinball(alpha, target, self.meta_level);
            self.mixer.reweight(&self.losses, meta_loss);
            for (level, &gamma) in self.levels.iter_mut().zip(&self.mixer.config.rates) {
                let err = if *level <= target { 1.0 } else { 0.0 };
                *level += gamma * (err - alpha);
            }
        }
        self.history.insert(true_radius);
        Ok(UpdateInfo::default())
    }
}

/// FACI run directly on the radius, with expert step sizes `γ_j · D`.
#[derive(Debug, Clone)]
pub struct FaciRadius {
    alpha: Alpha,
    mixer: Mixer,
    steps: Vec<f64>,
    radii: Vec<f64>,
    losses: Vec<f64>,
    prediction: f64,
    turn: Turn,
}

impl FaciRadius {
    pub fn new(alpha: Alpha, bound: RadiusBound, config: FaciConfig, initial: f64) -> Result<Self> {
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial radius"));
        }
        let mixer = Mixer::new(config)?;
        let steps: Vec<f64> = mixer.config.rates.iter().map(|g| g * bound.get()).collect();
        let n = steps.len();
        Ok(Self {
            alpha,
            mixer,
            steps,
            radii: vec![initial; n],
            losses: vec![0.0; n],
            prediction: initial,
            turn: Turn::default(),
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn weights(&self) -> &[f64] {
        &self.mixer.probs
    }
}

impl Learner for FaciRadius {
    fn name(&self) -> &'static str {
        "faci-s"
    }

    fn predict(&mut self) -> Result<f64> {
        self.turn.begin_predict()?;
        self.prediction = self.mixer.mix(&self.radii);
        Ok(self.prediction)
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        let alpha = self.alpha.get();
        for (loss, &r) in self.losses.iter_mut().zip(&self.radii) {
            *loss = pinball(alpha, true_radius, r);
        }
        let meta_loss = pinball(alpha, true_radius, self.prediction);
        self.mixer.reweight(&self.losses, meta_loss);
        for (r, &step) in self.radii.iter_mut().zip(&self.steps) {
            let err = if *r < true_radius { 1.0 } else { 0.0 };
            *r += step * (err - alpha);
        }
        Ok(UpdateInfo::default())
    }
}
