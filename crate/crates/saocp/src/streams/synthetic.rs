use rand::Rng;
use rand_chacha::ChaCha8Rng;
use saocp_core::run::RadiusObservation;
use saocp_core::{Alpha, RadiusBound};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{count_out_of_range, resolve_bound, BoundSpec, Stream};
use crate::error::{Error, Result};
use crate::rng::{substream, SubStream};

/// Additive noise around the current level. Draws are truncated so the raw
/// radius stays inside `[0, D]` (or `[0, ∞)` when `D` is calibrated).
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    None,
    Gaussian { scale: f64 },
    Uniform { scale: f64 },
}

impl Noise {
    pub fn name(&self) -> &'static str {
        match self {
            Noise::None => "none",
            Noise::Gaussian { .. } => "gaussian",
            Noise::Uniform { .. } => "uniform",
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { scale } | Noise::Uniform { scale } => scale,
        }
    }

    fn validate(&self) -> Result<()> {
        let s = self.scale();
        if s.is_finite() && s >= 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!("noise scale must be finite and non-negative, got {s}")))
        }
    }

    /// Inverse CDF of `level + noise` truncated to `[lo, hi]`, at `p`.
    fn inverse(&self, level: f64, lo: f64, hi: f64, p: f64) -> f64 {
        let value = match *self {
            Noise::Gaussian { scale } if scale > 0.0 => {
                level + scale * truncated_normal_quantile((lo - level) / scale, (hi - level) / scale, p)
            }
            Noise::Uniform { scale } if scale > 0.0 => {
                let a = (level - scale).max(lo);
                let b = (level + scale).min(hi);
                a + p * (b - a)
            }
            _ => level,
        };
        value.clamp(lo, hi)
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Quantile at `p` of a standard normal truncated to `[a, b]`.
///
/// Works in the upper tail when the interval lies right of the mean so that
/// mass far from zero is not lost to cancellation.
pub fn truncated_normal_quantile(a: f64, b: f64, p: f64) -> f64 {
    let n = standard_normal();
    let x = if a >= 0.0 {
        let (qa, qb) = (n.cdf(-a), n.cdf(-b));
        if qa <= qb {
            return a;
        }
        -n.inverse_cdf(qa - p * (qa - qb))
    } else {
        let (fa, fb) = (n.cdf(a), n.cdf(b));
        if fb <= fa {
            return if b < 0.0 { b } else { a };
        }
        n.inverse_cdf(fa + p * (fb - fa))
    };
    x.clamp(a, b)
}

fn check_common(horizon: usize, noise: &Noise, bound: &BoundSpec) -> Result<()> {
    if horizon == 0 {
        return Err(Error::config("stream horizon must be at least 1"));
    }
    noise.validate()?;
    match *bound {
        BoundSpec::Fixed(d) => {
            RadiusBound::new(d)?;
        }
        BoundSpec::Auto { prefix } if prefix == 0 || prefix > horizon => {
            return Err(Error::config(format!("calibration prefix {prefix} must lie in [1, {horizon}]")));
        }
        BoundSpec::Auto { .. } => {}
    }
    Ok(())
}

fn check_level(level: f64, bound: &BoundSpec) -> Result<()> {
    let upper = match *bound {
        BoundSpec::Fixed(d) => d,
        BoundSpec::Auto { .. } => f64::INFINITY,
    };
    if level.is_finite() && (0.0..=upper).contains(&level) {
        Ok(())
    } else {
        Err(Error::config(format!("level {level} must lie in [0, {upper}]")))
    }
}

fn check_segment(segment: usize) -> Result<()> {
    if segment == 0 {
        Err(Error::config("segment length must be at least 1"))
    } else {
        Ok(())
    }
}

/// Draw noise around each level and attach exact per-step quantiles.
fn realize(levels: &[f64], noise: &Noise, bound: &BoundSpec, alpha: Alpha, seed: u64) -> Result<Stream> {
    let upper = match *bound {
        BoundSpec::Fixed(d) => d,
        BoundSpec::Auto { .. } => f64::INFINITY,
    };
    let mut rng = substream(seed, SubStream::Noise);
    let raw: Vec<f64> = levels
        .iter()
        .map(|&level| noise.inverse(level, 0.0, upper, rng.random::<f64>()))
        .collect();
    let bound = resolve_bound(bound, &raw)?;
    let d = bound.get();
    let known = levels
        .iter()
        .map(|&level| noise.inverse(level, 0.0, upper, alpha.coverage()).min(d))
        .collect();
    Ok(Stream {
        out_of_range: count_out_of_range(&raw, bound),
        observations: raw
            .iter()
            .enumerate()
            .map(|(i, &r)| RadiusObservation::radius(i as u64 + 1, r))
            .collect(),
        known_quantiles: Some(known),
        bound,
    })
}

pub fn gen_constant(
    level: f64,
    noise: &Noise,
    horizon: usize,
    bound: &BoundSpec,
    alpha: Alpha,
    seed: u64,
) -> Result<Stream> {
    check_common(horizon, noise, bound)?;
    check_level(level, bound)?;
    realize(&vec![level; horizon], noise, bound, alpha, seed)
}

/// Levels cycle every `segment` steps.
pub fn gen_sudden_shift(
    levels: &[f64],
    segment: usize,
    noise: &Noise,
    horizon: usize,
    bound: &BoundSpec,
    alpha: Alpha,
    seed: u64,
) -> Result<Stream> {
    check_common(horizon, noise, bound)?;
    check_segment(segment)?;
    if levels.len() < 2 {
        return Err(Error::config("a sudden shift needs at least two levels"));
    }
    for &l in levels {
        check_level(l, bound)?;
    }
    let path: Vec<f64> = (0..horizon).map(|i| levels[(i / segment) % levels.len()]).collect();
    realize(&path, noise, bound, alpha, seed)
}

/// Levels step linearly from `start` to `end` over `stages` segments, then
/// hold at `end`.
#[allow(clippy::too_many_arguments)]
pub fn gen_gradual_shift(
    start: f64,
    end: f64,
    stages: usize,
    segment: usize,
    noise: &Noise,
    horizon: usize,
    bound: &BoundSpec,
    alpha: Alpha,
    seed: u64,
) -> Result<Stream> {
    check_common(horizon, noise, bound)?;
    check_segment(segment)?;
    if stages < 2 {
        return Err(Error::config("a gradual shift needs at least two stages"));
    }
    check_level(start, bound)?;
    check_level(end, bound)?;
    let last = (stages - 1) as f64;
    let path: Vec<f64> = (0..horizon)
        .map(|i| {
            let stage = (i / segment).min(stages - 1);
            if stage == stages - 1 {
                end
            } else {
                start + (end - start) * stage as f64 / last
            }
        })
        .collect();
    realize(&path, noise, bound, alpha, seed)
}

fn reflect(x: f64, upper: f64) -> f64 {
    if upper.is_finite() {
        let period = 2.0 * upper;
        let y = x.rem_euclid(period);
        if y > upper {
            period - y
        } else {
            y
        }
    } else {
        x.abs()
    }
}

/// Gaussian random walk of the level with standard deviation `step`,
/// reflected at 0 and, for a fixed bound, at `D`.
pub fn gen_random_walk(
    start: f64,
    step: f64,
    noise: &Noise,
    horizon: usize,
    bound: &BoundSpec,
    alpha: Alpha,
    seed: u64,
) -> Result<Stream> {
    check_common(horizon, noise, bound)?;
    check_level(start, bound)?;
    if !(step.is_finite() && step >= 0.0) {
        return Err(Error::config(format!("walk step must be finite and non-negative, got {step}")));
    }
    let upper = match *bound {
        BoundSpec::Fixed(d) => d,
        BoundSpec::Auto { .. } => f64::INFINITY,
    };
    let unit = standard_normal();
    let mut rng: ChaCha8Rng = substream(seed, SubStream::Walk);
    let mut level = start;
    let mut path = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        path.push(level);
        let z = unit.inverse_cdf(rng.random_range(f64::EPSILON..1.0 - f64::EPSILON));
        level = reflect(level + step * z, upper);
    }
    realize(&path, noise, bound, alpha, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use saocp_core::loss::empirical_quantile;
    use saocp_core::metrics::path_length;

    fn alpha() -> Alpha {
        Alpha::new(0.1).unwrap()
    }

    /// Trapezoid-rule inverse of the truncated normal density.
    fn quadrature_quantile(a: f64, b: f64, p: f64) -> f64 {
        let n = 200_000;
        let h = (b - a) / n as f64;
        let pdf = |x: f64| (-0.5 * x * x).exp();
        let mut cum = vec![0.0; n + 1];
        for i in 0..n {
            let x0 = a + h * i as f64;
            cum[i + 1] = cum[i] + 0.5 * h * (pdf(x0) + pdf(x0 + h));
        }
        let target = p * cum[n];
        let i = cum.partition_point(|&c| c < target).clamp(1, n);
        let frac = (target - cum[i - 1]) / (cum[i] - cum[i - 1]);
        a + h * (i as f64 - 1.0 + frac)
    }

    #[test]
    fn truncated_quantile_matches_quadrature() {
        for &(a, b) in &[(-1.0, 2.0), (-5.0, 0.3), (0.5, 4.0), (2.0, 9.0), (-3.0, 3.0)] {
            for &p in &[0.05, 0.5, 0.9, 0.99] {
                let fast = truncated_normal_quantile(a, b, p);
                let slow = quadrature_quantile(a, b, p);
                assert!((fast - slow).abs() < 1e-6, "a={a} b={b} p={p}: {fast} vs {slow}");
            }
        }
        assert!((truncated_normal_quantile(-1e9, 1e9, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn two_level_example_is_exact_without_noise() {
        let t = 2000;
        let s = gen_sudden_shift(&[1.0, 100.0], t / 2, &Noise::None, t, &BoundSpec::Fixed(100.0), alpha(), 3)
            .unwrap();
        let radii = s.radii();
        assert!(radii[..1000].iter().all(|&r| r == 1.0));
        assert!(radii[1000..].iter().all(|&r| r == 100.0));
        assert_eq!(s.known_quantiles.as_deref().unwrap(), radii.as_slice());
        assert_eq!(s.out_of_range, 0);
    }

    #[test]
    fn sudden_shift_cycles_levels() {
        let s = gen_sudden_shift(&[0.0, 5.0, 2.0], 500, &Noise::None, 2000, &BoundSpec::Fixed(5.0), alpha(), 0)
            .unwrap();
        let r = s.radii();
        assert_eq!((r[0], r[499], r[500], r[1000], r[1500], r[1999]), (0.0, 0.0, 5.0, 2.0, 0.0, 0.0));
        assert!(gen_sudden_shift(&[1.0], 5, &Noise::None, 10, &BoundSpec::Fixed(5.0), alpha(), 0).is_err());
    }

    #[test]
    fn gradual_shift_levels_and_path_length() {
        let s = gen_gradual_shift(0.0, 5.0, 6, 500, &Noise::None, 3500, &BoundSpec::Fixed(5.0), alpha(), 0)
            .unwrap();
        let r = s.radii();
        for stage in 0..6 {
            assert_eq!(r[stage * 500], stage as f64);
        }
        assert_eq!(r[3499], 5.0);
        assert_eq!(path_length(&r).unwrap(), 5.0);

        let flat = gen_gradual_shift(2.0, 2.0, 4, 10, &Noise::None, 50, &BoundSpec::Fixed(5.0), alpha(), 0)
            .unwrap();
        assert!(flat.radii().iter().all(|&x| x == 2.0));
        assert!(gen_gradual_shift(0.0, 1.0, 1, 10, &Noise::None, 50, &BoundSpec::Fixed(5.0), alpha(), 0).is_err());
    }

    #[test]
    fn noiseless_segments_reproduce_known_quantile() {
        let s = gen_gradual_shift(0.5, 3.0, 4, 25, &Noise::None, 100, &BoundSpec::Fixed(3.0), alpha(), 0)
            .unwrap();
        let known = s.known_quantiles.clone().unwrap();
        for seg in s.radii().chunks(25).zip(known.chunks(25)) {
            assert_eq!(empirical_quantile(seg.0, 0.9).unwrap(), seg.1[0]);
        }
    }

    #[test]
    fn noisy_draws_stay_in_range_and_match_known_quantile() {
        for noise in [Noise::Gaussian { scale: 0.3 }, Noise::Uniform { scale: 0.4 }] {
            let s = gen_constant(0.9, &noise, 40_000, &BoundSpec::Fixed(1.0), alpha(), 11).unwrap();
            assert_eq!(s.out_of_range, 0);
            let radii = s.radii();
            assert!(radii.iter().all(|&r| (0.0..=1.0).contains(&r)));
            let q = s.known_quantiles.as_ref().unwrap()[0];
            let empirical = empirical_quantile(&radii, 0.9).unwrap();
            assert!((q - empirical).abs() < 0.01, "{noise:?}: {q} vs {empirical}");
        }
    }

    #[test]
    fn random_walk_stays_reflected() {
        let s = gen_random_walk(0.5, 0.3, &Noise::None, 5000, &BoundSpec::Fixed(1.0), alpha(), 5).unwrap();
        assert!(s.radii().iter().all(|&r| (0.0..=1.0).contains(&r)));
        assert_eq!(s.out_of_range, 0);
        assert_eq!(reflect(2.5, 1.0), 0.5);
        assert_eq!(reflect(-0.25, 1.0), 0.25);
        assert_eq!(reflect(-3.0, f64::INFINITY), 3.0);
    }

    #[test]
    fn validation_errors() {
        let b = BoundSpec::Fixed(1.0);
        assert!(gen_constant(0.5, &Noise::None, 0, &b, alpha(), 0).is_err());
        assert!(gen_constant(1.5, &Noise::None, 10, &b, alpha(), 0).is_err());
        assert!(gen_constant(0.5, &Noise::Gaussian { scale: -1.0 }, 10, &b, alpha(), 0).is_err());
        assert!(gen_sudden_shift(&[0.0, 1.0], 0, &Noise::None, 10, &b, alpha(), 0).is_err());
        assert!(gen_random_walk(0.5, f64::NAN, &Noise::None, 10, &b, alpha(), 0).is_err());
    }
}
