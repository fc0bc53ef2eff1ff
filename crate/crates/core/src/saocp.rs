//! Strongly adaptive online conformal prediction.
//!
//! At every step `t` a fresh SF-OGD expert is born, initialized at the
//! previous meta prediction, and lives for `L(t) = g · 2^{v₂(t)}` steps where
//! `v₂(t)` is the number of trailing zero bits of `t`. Active experts are
//! mixed with a sleeping-expert prior `π_i ∝ i⁻²(1 + ⌊log₂ i⌋)⁻¹` and
//! coin-betting weights `w_i`:
//!
//! ```text
//! p̂_i = π_i [w_i]_+,   p = p̂ / ‖p̂‖₁  (or π when p̂ = 0),   ŝ_t = Σ p_i ŝ_{i,t}
//! ```
//!
//! After the observation each expert receives the normalized excess loss
//! `g_{i,t}` of the meta prediction over its own, and its weight becomes
//!
//! ```text
//! w_{i,t+1} = (Σ_{j=i}^t g_{i,j}) (1 + Σ_{j=i}^t w_{i,j} g_{i,j}) / (t − i + 1)
//! ```
//!
//! The randomized variant predicts a single expert drawn from `p`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::learners::{Learner, SfOgd, Turn, UpdateInfo};
use crate::loss::{pinball, Alpha, RadiusBound};
use crate::math;

/// Lifetime multiplier for the time-series profile.
pub const DEFAULT_MULTIPLIER: u64 = 8;
/// Lifetime multiplier for the classification profile.
pub const CLASSIFICATION_MULTIPLIER: u64 = 32;

/// `g · max{2ⁿ : i ≡ 0 mod 2ⁿ}`. Saturates instead of overflowing.
pub fn lifetime(i: u64, g: u64) -> u64 {
    debug_assert!(i >= 1 && g >= 1);
    let tz = i.trailing_zeros();
    if tz >= 64 {
        return u64::MAX;
    }
    g.saturating_mul(1u64 << tz)
}

#[inline]
fn is_active(i: u64, t: u64, g: u64) -> bool {
    // t − L(i) < i ≤ t, rearranged to stay in unsigned arithmetic.
    i <= t && t - i < lifetime(i, g)
}

/// Birth indices `{i : t − L(i) < i ≤ t}` in ascending order.
pub fn active_set(t: u64, g: u64) -> Vec<u64> {
    (1..=t).filter(|&i| is_active(i, t, g)).collect()
}

/// Upper bound `g(⌊log₂ t⌋ + 1)` on the number of active experts.
pub fn active_bound(t: u64, g: u64) -> u64 {
    g * (u64::from(math::floor_log2(t)) + 1)
}

/// Unnormalized prior mass `i⁻²(1 + ⌊log₂ i⌋)⁻¹`.
pub fn prior_mass(i: u64) -> f64 {
    let i_f = i as f64;
    1.0 / (i_f * i_f * (1.0 + f64::from(math::floor_log2(i))))
}

/// Prior restricted to `active` and normalized.
pub fn prior(active: &[u64]) -> Result<Vec<f64>> {
    if active.is_empty() {
        return Err(Error::Empty("prior over an empty active set"));
    }
    if active.contains(&0) {
        return Err(Error::InvalidArgument("birth indices start at 1"));
    }
    let mut pi: Vec<f64> = active.iter().map(|&i| prior_mass(i)).collect();
    normalize(&mut pi);
    Ok(pi)
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    for x in v {
        *x /= total;
    }
}

/// Mixing probabilities `p` from the prior and the coin-betting weights.
pub fn mixing_probabilities(priors: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = priors.iter().zip(weights).map(|(pi, w)| pi * w.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        for x in &mut p {
            *x /= total;
        }
        p
    } else {
        priors.to_vec()
    }
}

/// Aggregated prediction `Σ p_i ŝ_{i,t}` for `t ≥ 2`, and `0` at `t = 1`.
pub fn aggregate(priors: &[f64], weights: &[f64], predictions: &[f64], t: u64) -> f64 {
    if t <= 1 {
        return 0.0;
    }
    mixing_probabilities(priors, weights)
        .iter()
        .zip(predictions)
        .map(|(p, s)| p * s)
        .sum()
}

/// Normalized excess loss fed to the coin bettor; clipped at zero while the
/// expert's weight is non-positive.
pub fn expert_signal(meta_loss: f64, expert_loss: f64, weight: f64, bound: RadiusBound) -> f64 {
    let diff = meta_loss - expert_loss;
    if weight > 0.0 {
        diff / bound.get()
    } else {
        diff.max(0.0) / bound.get()
    }
}

/// One expert of the meta-learner.
#[derive(Debug, Clone)]
pub struct ExpertRecord {
    birth: u64,
    lifetime: u64,
    initial: f64,
    learner: SfOgd,
    weight: f64,
    sum_g: f64,
    sum_wg: f64,
}

impl ExpertRecord {
    fn new(birth: u64, g: u64, learner: SfOgd) -> Self {
        Self {
            birth,
            lifetime: lifetime(birth, g),
            initial: learner.radius(),
            learner,
            weight: 0.0,
            sum_g: 0.0,
            sum_wg: 0.0,
        }
    }

    pub fn birth(&self) -> u64 {
        self.birth
    }

    pub fn lifetime(&self) -> u64 {
        self.lifetime
    }

    /// Radius the expert was initialized at.
    pub fn initial_radius(&self) -> f64 {
        self.initial
    }

    /// Radius the expert currently predicts.
    pub fn radius(&self) -> f64 {
        self.learner.radius()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn sum_g(&self) -> f64 {
        self.sum_g
    }

    pub fn sum_wg(&self) -> f64 {
        self.sum_wg
    }

    /// Fold `g_{i,t}` into the running sums and return `w_{i,t+1}`.
    pub fn coin_bet_update(&mut self, g_value: f64, t: u64) -> f64 {
        debug_assert!(t >= self.birth);
        self.sum_g += g_value;
        self.sum_wg += self.weight * g_value;
        let age = (t - self.birth + 1) as f64;
        self.weight = self.sum_g / age * (1.0 + self.sum_wg);
        self.weight
    }
}

/// The strongly adaptive meta-learner with SF-OGD experts.
pub struct Saocp {
    alpha: Alpha,
    bound: RadiusBound,
    g: u64,
    eta: f64,
    experts: Vec<ExpertRecord>,
    /// `ŝ_{t−1}`; zero before the first step.
    last_prediction: f64,
    step: u64,
    probabilities: Vec<f64>,
    predictions: Vec<f64>,
    signals: Vec<f64>,
    prediction: f64,
    sampler: Option<Box<dyn RngCore + Send>>,
    sampled: Option<usize>,
    turn: Turn,
}

impl core::fmt::Debug for Saocp {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Saocp")
            .field("alpha", &self.alpha)
            .field("bound", &self.bound)
            .field("g", &self.g)
            .field("step", &self.step)
            .field("experts", &self.experts.len())
            .field("randomized", &self.sampler.is_some())
            .finish()
    }
}

impl Saocp {
    pub fn new(alpha: Alpha, bound: RadiusBound, g: u64) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidArgument("lifetime multiplier must be at least 1"));
        }
        Ok(Self {
            alpha,
            bound,
            g,
            eta: SfOgd::default_eta(bound),
            experts: Vec::new(),
            last_prediction: 0.0,
            step: 0,
            probabilities: Vec::new(),
            predictions: Vec::new(),
            signals: Vec::new(),
            prediction: 0.0,
            sampler: None,
            sampled: None,
            turn: Turn::default(),
        })
    }

    /// Randomized variant: the prediction is one expert drawn from `p`.
    pub fn randomized(
        alpha: Alpha,
        bound: RadiusBound,
        g: u64,
        sampler: Box<dyn RngCore + Send>,
    ) -> Result<Self> {
        let mut s = Self::new(alpha, bound, g)?;
        s.sampler = Some(sampler);
        Ok(s)
    }

    pub fn multiplier(&self) -> u64 {
        self.g
    }

    /// Index of the current (or last completed) step, starting at 1.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn experts(&self) -> &[ExpertRecord] {
        &self.experts
    }

    /// Mixing probabilities used for the latest prediction, aligned with
    /// [`Saocp::experts`] as of that prediction.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `g_{i,t}` values from the latest update, in expert order.
    pub fn signals(&self) -> &[f64] {
        &self.signals
    }

    /// Index into [`Saocp::experts`] of the expert sampled for the latest
    /// prediction (randomized mode only).
    pub fn sampled_expert(&self) -> Option<usize> {
        self.sampled
    }

    fn draw_unit(rng: &mut dyn RngCore) -> f64 {
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl Learner for Saocp {
    fn name(&self) -> &'static str {
        "saocp"
    }

    fn predict(&mut self) -> Result<f64> {
        self.turn.begin_predict()?;
        self.step += 1;
        let t = self.step;

        let newborn = SfOgd::new(self.alpha, self.eta, self.last_prediction)?;
        self.experts.push(ExpertRecord::new(t, self.g, newborn));
        let g = self.g;
        self.experts.retain(|e| is_active(e.birth, t, g));

        let mut priors: Vec<f64> = self.experts.iter().map(|e| prior_mass(e.birth)).collect();
        normalize(&mut priors);
        let weights: Vec<f64> = self.experts.iter().map(|e| e.weight).collect();
        self.probabilities = mixing_probabilities(&priors, &weights);
        self.predictions.clear();
        self.predictions.extend(self.experts.iter().map(|e| e.radius()));

        self.sampled = None;
        self.prediction = match self.sampler.as_mut() {
            Some(rng) => {
                let u = Self::draw_unit(rng.as_mut());
                let mut acc = 0.0;
                let mut pick = self.probabilities.len() - 1;
                for (i, p) in self.probabilities.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                self.sampled = Some(pick);
                self.predictions[pick]
            }
            None if t == 1 => 0.0,
            None => self
                .probabilities
                .iter()
                .zip(&self.predictions)
                .map(|(p, s)| p * s)
                .sum(),
        };
        Ok(self.prediction)
    }

    fn update(&mut self, true_radius: f64) -> Result<UpdateInfo> {
        self.turn.begin_update(true_radius)?;
        let t = self.step;
        let alpha = self.alpha.get();
        let meta_loss = pinball(alpha, true_radius, self.prediction);

        self.signals.clear();
        for (expert, &own) in self.experts.iter_mut().zip(&self.predictions) {
            let expert_loss = pinball(alpha, true_radius, own);
            expert.learner.absorb(true_radius);
            let g_value = expert_signal(meta_loss, expert_loss, expert.weight, self.bound);
            self.signals.push(g_value);
            expert.coin_bet_update(g_value, t);
        }

        let expected_err = self.sampler.as_ref().map(|_| {
            self.probabilities
                .iter()
                .zip(&self.predictions)
                .filter(|(_, &s)| s < true_radius)
                .map(|(p, _)| p)
                .sum::<f64>()
        });
        self.last_prediction = self.prediction;
        Ok(UpdateInfo { active_experts: Some(self.experts.len()), expected_err })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::vec;

    fn setup() -> (Alpha, RadiusBound) {
        (Alpha::new(0.1).unwrap(), RadiusBound::new(1.0).unwrap())
    }

    #[test]
    fn lifetime_examples() {
        assert_eq!(lifetime(1, 1), 1);
        assert_eq!(lifetime(2, 1), 2);
        assert_eq!(lifetime(4, 1), 4);
        assert_eq!(lifetime(6, 1), 2);
        assert_eq!(lifetime(6, 8), 16);
        assert_eq!(lifetime(8, 32), 256);
        assert_eq!(lifetime(1 << 63, 4), u64::MAX);
    }

    #[test]
    fn active_set_examples() {
        // Direct enumeration of t − L(i) < i ≤ t.
        let brute = |t: i64, g: i64| -> Vec<u64> {
            (1..=t)
                .filter(|&i| t - (g << (i as u64).trailing_zeros()) < i)
                .map(|i| i as u64)
                .collect()
        };
        assert_eq!(brute(3, 1), vec![2, 3]);
        assert_eq!(active_set(3, 1), vec![2, 3]);
        assert_eq!(active_set(4, 1), vec![4]);
        assert_eq!(active_set(1, 7), vec![1]);
        for t in 1..300 {
            for g in [1, 2, 3, 8] {
                assert_eq!(active_set(t, g), brute(t as i64, g as i64));
                assert!(active_set(t, g).len() as u64 <= active_bound(t, g));
            }
        }
    }

    #[test]
    fn prior_examples() {
        assert_eq!(prior(&[1]).unwrap(), vec![1.0]);
        let pi = prior(&[4, 6]).unwrap();
        let (a, b) = (1.0 / 48.0, 1.0 / 108.0);
        assert!((pi[0] - a / (a + b)).abs() < 1e-12);
        assert!((pi[1] - b / (a + b)).abs() < 1e-12);
        assert!((pi[0] - 0.6923).abs() < 1e-4);
        assert!(prior(&[]).is_err());
        let pi = prior(&[3, 17, 64, 100, 1001]).unwrap();
        assert!(pi.iter().all(|&p| p > 0.0));
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[0.5, 0.5], &[1.0, 1.0], &[3.0, 5.0], 1), 0.0);
        let got = aggregate(&[0.25, 0.75], &[-0.1, 0.0], &[4.0, 8.0], 5);
        assert!((got - 7.0).abs() < 1e-12);
        assert_eq!(aggregate(&[1.0], &[0.3], &[2.5], 9), 2.5);
        let got = aggregate(&[0.5, 0.5], &[0.3, 0.1], &[1.0, 2.0], 3);
        assert!((got - (0.75 * 1.0 + 0.25 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn signal_examples() {
        let d = RadiusBound::new(1.0).unwrap();
        assert_eq!(expert_signal(0.4, 0.4, 0.7, d), 0.0);
        assert_eq!(expert_signal(0.3, 0.5, -0.2, d), 0.0);
        assert!((expert_signal(0.5, 0.3, 0.5, d) - 0.2).abs() < 1e-15);
        assert!((expert_signal(0.3, 0.5, 0.5, d) + 0.2).abs() < 1e-15);
        let d2 = RadiusBound::new(4.0).unwrap();
        assert!((expert_signal(2.0, 1.0, 0.0, d2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn coin_bet_examples() {
        let (alpha, _) = setup();
        let mk = || ExpertRecord::new(5, 1, SfOgd::new(alpha, 1.0, 0.0).unwrap());
        let mut e = mk();
        assert_eq!(e.coin_bet_update(0.3, 5), 0.3);
        let mut e = mk();
        for t in 5..10 {
            assert_eq!(e.coin_bet_update(0.0, t), 0.0);
        }
        let mut e = mk();
        assert_eq!(e.coin_bet_update(0.5, 5), 0.5);
        assert!((e.coin_bet_update(0.5, 6) - 0.625).abs() < 1e-15);
    }

    fn run(learner: &mut Saocp, radii: &[f64]) -> Vec<f64> {
        radii
            .iter()
            .map(|&s| {
                let p = learner.predict().unwrap();
                learner.update(s).unwrap();
                p
            })
            .collect()
    }

    #[test]
    fn first_prediction_is_zero() {
        for g in [1, 8, 32] {
            let (alpha, bound) = setup();
            let mut l = Saocp::new(alpha, bound, g).unwrap();
            assert_eq!(l.predict().unwrap(), 0.0);
        }
        assert!(Saocp::new(setup().0, setup().1, 0).is_err());
    }

    #[test]
    fn active_count_bounded_at_1000() {
        let (alpha, bound) = setup();
        let mut l = Saocp::new(alpha, bound, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 1..=1000u64 {
            l.predict().unwrap();
            let info = l.update(rng.random::<f64>()).unwrap();
            assert!(info.active_experts.unwrap() as u64 <= active_bound(t, 8));
        }
        assert!(l.experts().len() <= 80);
    }

    #[test]
    fn randomized_samples_an_active_expert() {
        let (alpha, bound) = setup();
        let mut det = Saocp::new(alpha, bound, 8).unwrap();
        let mut rnd =
            Saocp::randomized(alpha, bound, 8, Box::new(ChaCha8Rng::seed_from_u64(9))).unwrap();
        // A single active expert makes the draw degenerate.
        assert_eq!(det.predict().unwrap(), rnd.predict().unwrap());
        det.update(0.5).unwrap();
        rnd.update(0.5).unwrap();
        for s in [0.3, 0.9, 0.1, 0.5, 0.5, 0.7, 0.2, 0.0, 1.0] {
            let pred = rnd.predict().unwrap();
            let pick = rnd.sampled_expert().unwrap();
            assert_eq!(pred, rnd.experts()[pick].radius());
            let e = rnd.update(s).unwrap().expected_err.unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&e));
        }
        assert!(det.update(0.1).is_err());
    }

    #[test]
    fn randomized_is_reproducible() {
        let (alpha, bound) = setup();
        let radii: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
        let trace = |seed| {
            let mut l =
                Saocp::randomized(alpha, bound, 8, Box::new(ChaCha8Rng::seed_from_u64(seed))).unwrap();
            let mut picks = Vec::new();
            for &s in &radii {
                let p = l.predict().unwrap();
                picks.push((l.sampled_expert().unwrap(), p.to_bits()));
                l.update(s).unwrap();
            }
            picks
        };
        assert_eq!(trace(11), trace(11));
        assert_ne!(trace(11), trace(12));
    }

    #[test]
    fn constant_stream_settles() {
        let (alpha, bound) = setup();
        let mut l = Saocp::new(alpha, bound, 8).unwrap();
        let preds = run(&mut l, &vec![0.4; 3000]);
        let misses = preds[1000..].iter().filter(|&&p| p < 0.4).count();
        let rate = misses as f64 / 2000.0;
        assert!(rate < 0.2, "miss rate {rate}");
        let tail_err: f64 = preds[2000..].iter().map(|p| (p - 0.4).abs()).sum::<f64>() / 1000.0;
        assert!(tail_err < 0.05, "mean abs error {tail_err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn structural_invariants(
            seed in any::<u64>(),
            g in 1u64..10,
            alpha in 0.02f64..0.5,
            d in 0.5f64..50.0,
        ) {
            let alpha = Alpha::new(alpha).unwrap();
            let bound = RadiusBound::new(d).unwrap();
            let mut l = Saocp::new(alpha, bound, g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut prev = 0.0;
            for t in 1..=400u64 {
                let pred = l.predict().unwrap();
                let newest = l.experts().last().unwrap();
                prop_assert_eq!(newest.birth(), t);
                prop_assert_eq!(newest.initial_radius(), prev);
                prop_assert!(l.experts().len() as u64 <= active_bound(t, g));
                let p = l.probabilities();
                prop_assert!(p.iter().all(|&x| x >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let s = rng.random::<f64>() * d;
                let before: Vec<f64> = l.experts().iter().map(|e| e.radius()).collect();
                l.update(s).unwrap();
                // Experts may leave [0, D], so the signal is only bounded
                // through the Lipschitz constant of the pinball loss.
                let lip = alpha.get().max(1.0 - alpha.get());
                for (&gv, &r) in l.signals().iter().zip(&before) {
                    prop_assert!(gv.abs() <= lip * (pred - r).abs() / d + 1e-12, "g = {}", gv);
                }
                prev = pred;
            }
        }
    }
}
