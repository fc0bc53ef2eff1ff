use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saocp_core::learners::{Aci, Scp, SfOgd};
use saocp_core::run::run_radii;
use saocp_core::{Alpha, Learner, MethodConfig, RadiusBound, Saocp};

fn radii(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| if i < n / 2 { rng.random_range(0.0..0.3) } else { rng.random_range(0.5..1.0) }).collect()
}

#[test]
fn scp_tracks_the_running_empirical_quantile() {
    let alpha = Alpha::new(0.1).unwrap();
    let bound = RadiusBound::new(1.0).unwrap();
    let mut scp = Scp::new(alpha, bound);
    let stream = radii(1, 300);
    let trace = run_radii(&mut scp, &stream, alpha, bound).unwrap().trace;
    for t in 1..stream.len() {
        let mut past = stream[..t].to_vec();
        past.sort_by(f64::total_cmp);
        let rank = ((0.9 * t as f64).ceil() as usize).clamp(1, t);
        assert_eq!(trace[t].predicted, past[rank - 1], "t={}", t + 1);
    }
}

#[test]
fn aci_follows_its_recursion() {
    let alpha = Alpha::new(0.2).unwrap();
    let (eta, mut s) = (0.05, 0.3);
    let mut aci = Aci::new(alpha, eta, s).unwrap();
    for r in radii(2, 500) {
        let p = aci.predict().unwrap();
        assert!((p - s).abs() < 1e-12);
        aci.update(r).unwrap();
        s += eta * (f64::from(u8::from(s < r)) - 0.2);
    }
}

#[test]
fn sf_ogd_follows_its_recursion() {
    let alpha = Alpha::new(0.1).unwrap();
    let eta = 0.4;
    let mut learner = SfOgd::new(alpha, eta, 0.0).unwrap();
    let (mut s, mut sum_sq) = (0.0_f64, 0.0_f64);
    for r in radii(3, 500) {
        let p = learner.predict().unwrap();
        assert!((p - s).abs() < 1e-9, "{p} vs {s}");
        learner.update(r).unwrap();
        let g = 0.1 - f64::from(u8::from(s < r));
        sum_sq += g * g;
        s -= eta * g / sum_sq.sqrt();
    }
}

#[test]
fn every_method_builds_and_runs() {
    let alpha = Alpha::new(0.1).unwrap();
    let bound = RadiusBound::new(1.0).unwrap();
    let stream = radii(4, 400);
    let methods = [
        MethodConfig::Scp,
        MethodConfig::NexCp { decay: None },
        MethodConfig::Aci { eta: None, initial: 0.0 },
        MethodConfig::SfOgd { eta: None, initial: 0.0 },
        MethodConfig::Faci(Default::default()),
        MethodConfig::FaciS { config: Default::default(), initial: 0.0 },
        MethodConfig::Saocp { g: 8, randomized: false },
        MethodConfig::Saocp { g: 8, randomized: true },
        MethodConfig::Trivial { horizon: 400 },
    ];
    for m in methods {
        let sampler: Box<dyn rand_core::RngCore + Send> = Box::new(ChaCha8Rng::seed_from_u64(9));
        let mut learner = m.build(alpha, bound, Some(sampler)).unwrap();
        let trace = run_radii(learner.as_mut(), &stream, alpha, bound).unwrap().trace;
        assert_eq!(trace.len(), 400);
        assert!(trace.iter().all(|s| s.predicted.is_finite()), "{}", m.name());
    }
}

#[test]
fn randomized_saocp_repeats_under_a_seed() {
    let alpha = Alpha::new(0.1).unwrap();
    let bound = RadiusBound::new(1.0).unwrap();
    let stream = radii(5, 600);
    let run = |seed: u64| {
        let mut l = Saocp::randomized(alpha, bound, 8, Box::new(ChaCha8Rng::seed_from_u64(seed))).unwrap();
        run_radii(&mut l, &stream, alpha, bound).unwrap().trace
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}
