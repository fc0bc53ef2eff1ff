//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saocp::config::{OutputPaths, RunConfig};
use saocp::runner::{execute_on, prepare_stream};
use saocp::streams::{gen_sudden_shift, BoundSpec, Noise, StreamKind, StreamSpec};
use saocp::verify::{
    aci_coverage, anytime_regret, bounded_iterates, sfogd_coverage, strongly_adaptive_regret, Check, Suite,
};
use saocp_core::conformal::{interval_set, raps_set, ClassificationPoint, RapsParams};
use saocp_core::learners::{FaciConfig, Learner, MetaRate, Scp, Trivial};
use saocp_core::loss::{best_fixed_radius, pinball};
use saocp_core::metrics::{coverage_error, local_coverage_error, regret, sa_regret};
use saocp_core::run::run_radii;
use saocp_core::saocp::{active_bound, active_set};
use saocp_core::{Alpha, MethodConfig, RadiusBound, Saocp, StepTrace};

struct Outcome {
    pass: bool,
    detail: String,
}

fn checks_outcome(checks: &[Check], elapsed: Duration, limit: Duration) -> Outcome {
    let pass = checks.iter().all(Check::passed) && elapsed < limit;
    let parts: Vec<String> = checks
        .iter()
        .map(|c| format!("{} violations / {} cases, max ratio {:.4}", c.violations, c.cases, c.worst_ratio))
        .collect();
    Outcome {
        pass,
        detail: format!("{}; {:.2} s (limit {} s)", parts.join("; "), elapsed.as_secs_f64(), limit.as_secs()),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn criterion_1() -> Outcome {
    let (checks, elapsed) = timed(|| bounded_iterates(Suite::BoundedIterates.documented_scale(), 0).unwrap());
    checks_outcome(&checks, elapsed, Duration::from_secs(10))
}

fn criterion_2() -> Outcome {
    let (checks, elapsed) = timed(|| anytime_regret(Suite::AnytimeRegret.documented_scale(), 0).unwrap());
    checks_outcome(&checks, elapsed, Duration::from_secs(60))
}

fn criterion_3() -> Outcome {
    let scale = Suite::SaRegret.documented_scale();
    let (checks, elapsed) = timed(|| strongly_adaptive_regret(scale, 0).unwrap());
    // The natural-log reading is the tighter one and gates the criterion.
    let mut out = checks_outcome(&checks[..1], elapsed, Duration::from_secs(600));
    out.detail.push_str(&format!(
        "; base-2 reading: {} violations, max ratio {:.4}",
        checks[1].violations, checks[1].worst_ratio
    ));
    out
}

fn criterion_4() -> Outcome {
    let (check, elapsed) = timed(|| aci_coverage(Suite::Coverage.documented_scale(), 0).unwrap());
    checks_outcome(&[check], elapsed, Duration::from_secs(600))
}

fn criterion_5() -> Outcome {
    let (check, elapsed) = timed(|| sfogd_coverage(100, 0).unwrap());
    checks_outcome(&[check], elapsed, Duration::from_secs(600))
}

fn trivial_trace(alpha: Alpha, d: f64, horizon: usize) -> Vec<StepTrace> {
    let bound = RadiusBound::new(d).unwrap();
    let mut learner = Trivial::new(alpha, bound, horizon).unwrap();
    run_radii(&mut learner, &vec![d / 2.0; horizon], alpha, bound).unwrap().trace
}

fn criterion_6() -> Outcome {
    let alpha = Alpha::new(0.1).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for d in [1.0, 3.7, 250.0] {
        let trace = trivial_trace(alpha, d, 10);
        let err = coverage_error(&trace, alpha).unwrap();
        let reg = regret(&trace, alpha).unwrap();
        let ok = err <= 1e-12 && (reg - 0.9 * d).abs() <= 1e-12 * d.max(1.0);
        pass &= ok;
        notes.push(format!("D={d}: Err={err:.1e}, regret={reg}"));
    }
    let slope = 0.1 * 0.9;
    let mut worst: f64 = 0.0;
    for t in [10, 37, 100, 999, 1000, 4321, 10_000] {
        let reg = regret(&trivial_trace(alpha, 1.0, t), alpha).unwrap();
        let dev = (reg / t as f64 - slope).abs();
        pass &= dev <= 1.0 / t as f64;
        worst = worst.max(dev * t as f64);
    }
    notes.push(format!("max |regret/T - a(1-a)D| * T = {worst:.3} (limit 1)"));
    Outcome { pass, detail: notes.join("; ") }
}

/// Grid of 10,001 radii plus every breakpoint.
fn brute_min(alpha: f64, values: &[f64], d: f64) -> f64 {
    let mut best = f64::INFINITY;
    for s in (0..=10_000).map(|i| d * i as f64 / 10_000.0).chain(values.iter().copied()) {
        best = best.min(values.iter().map(|&v| pinball(alpha, v, s)).sum());
    }
    best
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst_best: f64 = 0.0;
    let mut worst_window: f64 = 0.0;
    for _ in 0..500 {
        let a = rng.random_range(0.01..0.99);
        let alpha = Alpha::new(a).unwrap();
        let d = rng.random_range(0.1..3.0);
        let n = rng.random_range(1..=60);
        let levels = rng.random_range(2..12);
        let trace: Vec<StepTrace> = (0..n)
            .map(|i| {
                let s = if rng.random_bool(0.5) {
                    d * f64::from(rng.random_range(0..=levels)) / f64::from(levels)
                } else {
                    rng.random_range(0.0..=d)
                };
                let p = rng.random_range(-0.3 * d..1.3 * d);
                StepTrace {
                    t: i as u64 + 1,
                    predicted: p,
                    true_radius: s,
                    err: p < s,
                    loss: pinball(a, s, p),
                    width: p.max(0.0),
                    active_experts: None,
                    expected_err: None,
                }
            })
            .collect();
        let radii: Vec<f64> = trace.iter().map(|s| s.true_radius).collect();
        let best = best_fixed_radius(&radii, alpha).unwrap();
        let direct: f64 = radii.iter().map(|&v| pinball(a, v, best.radius)).sum();
        let brute = brute_min(a, &radii, d);
        worst_best = worst_best.max((best.total_loss - brute).abs()).max((direct - brute).abs());

        let k = rng.random_range(1..=n);
        let fast = sa_regret(&trace, alpha, k).unwrap();
        let mut slow = f64::NEG_INFINITY;
        for w in trace.windows(k) {
            let r: Vec<f64> = w.iter().map(|s| s.true_radius).collect();
            slow = slow.max(w.iter().map(|s| s.loss).sum::<f64>() - brute_min(a, &r, d));
        }
        worst_window = worst_window.max((fast - slow).abs());
    }
    Outcome {
        pass: worst_best <= 1e-9 && worst_window <= 1e-9,
        detail: format!(
            "500 instances; max |best_fixed - brute| = {worst_best:.2e}, max |sa_regret - brute| = {worst_window:.2e} (tol 1e-9)"
        ),
    }
}

fn criterion_8() -> Outcome {
    let horizon = 2000;
    let alpha = Alpha::new(0.1).unwrap();
    let stream =
        gen_sudden_shift(&[1.0, 100.0], horizon / 2, &Noise::None, horizon, &BoundSpec::Fixed(100.0), alpha, 0)
            .unwrap();
    let radii = stream.radii();
    let known = stream.known_quantiles.clone().unwrap();
    let mut saocp = Saocp::new(alpha, stream.bound, 8).unwrap();
    let mut scp = Scp::new(alpha, stream.bound);
    let traces = [
        run_radii(&mut saocp, &radii, alpha, stream.bound).unwrap().trace,
        run_radii(&mut scp as &mut dyn Learner, &radii, alpha, stream.bound).unwrap().trace,
    ];
    // Steps T/2 + 200 ..= T/2 + 500, one-based.
    let (lo, hi) = (horizon / 2 + 200, horizon / 2 + 500);
    let mae = |trace: &[StepTrace]| {
        (lo..=hi).map(|t| (trace[t - 1].predicted - known[t - 1]).abs()).sum::<f64>() / (hi - lo + 1) as f64
    };
    let [sa, sc] = [mae(&traces[0]), mae(&traces[1])];
    let [la, lc] = [
        local_coverage_error(&traces[0], alpha, 100).unwrap(),
        local_coverage_error(&traces[1], alpha, 100).unwrap(),
    ];
    Outcome {
        pass: sa < sc && la < lc,
        detail: format!(
            "MAE over [{lo}, {hi}]: saocp {sa:.4} vs scp {sc:.4} ({}); LCE_100: saocp {la:.3} vs scp {lc:.3} ({})",
            if sa < sc { "ok" } else { "not smaller" },
            if la < lc { "ok" } else { "not smaller" },
        ),
    }
}

const PROPERTY_CASES: u32 = 10_000;

fn property_runner() -> TestRunner {
    let config = Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn property(name: &str, result: Result<(), impl std::fmt::Display>) -> (bool, String) {
    match result {
        Ok(()) => (true, format!("{name}: {PROPERTY_CASES} cases ok")),
        Err(e) => (false, format!("{name}: {e}")),
    }
}

fn saocp_property(g: u64, horizon: u64, seed: u64, check_probabilities: bool) -> Result<(), TestCaseError> {
    let alpha = Alpha::new(0.1).unwrap();
    let bound = RadiusBound::new(1.0).unwrap();
    let mut learner = Saocp::new(alpha, bound, g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 1..=horizon {
        learner.predict().unwrap();
        let n = learner.experts().len() as u64;
        if check_probabilities {
            let p = learner.probabilities();
            prop_assert!(p.iter().all(|&x| x >= 0.0 && x.is_finite()));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "sum at t={}", t);
        } else {
            prop_assert!(n <= active_bound(t, g), "{} experts at t={} g={}", n, t, g);
            prop_assert_eq!(n, active_set(t, g).len() as u64);
        }
        learner.update(rng.random_range(0.0..=1.0)).unwrap();
    }
    Ok(())
}

fn arb_method() -> impl Strategy<Value = MethodConfig> {
    prop_oneof![
        Just(MethodConfig::Scp),
        Just(MethodConfig::NexCp { decay: None }),
        Just(MethodConfig::Aci { eta: None, initial: 0.0 }),
        Just(MethodConfig::SfOgd { eta: None, initial: 0.0 }),
        Just(MethodConfig::Faci(FaciConfig { window: 20, smoothing: 0.01, ..FaciConfig::default() })),
        Just(MethodConfig::FaciS {
            config: FaciConfig { meta_rate: MetaRate::Fixed(1.0), ..FaciConfig::default() },
            initial: 0.0
        }),
        (1u64..16, any::<bool>()).prop_map(|(g, randomized)| MethodConfig::Saocp { g, randomized }),
        Just(MethodConfig::Trivial { horizon: 0 }),
    ]
}

fn criterion_9() -> Outcome {
    let mut lines = Vec::new();

    let cardinality = property_runner().run(&(1u64..=32, 1u64..=300, any::<u64>()), |(g, horizon, seed)| {
        saocp_property(g, horizon, seed, false)
    });
    lines.push(property("active-expert cardinality", cardinality));

    let normalization = property_runner().run(&(1u64..=32, 1u64..=300, any::<u64>()), |(g, horizon, seed)| {
        saocp_property(g, horizon, seed, true)
    });
    lines.push(property("probability normalization", normalization));

    let nested_strategy = (2usize..40, any::<u64>(), 0.0f64..0.5, 1usize..10, -0.5f64..3.0, -0.5f64..3.0);
    let nestedness = property_runner().run(&nested_strategy, |(m, seed, lambda, k_reg, r1, r2)| {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let point = ClassificationPoint::new(probs, rng.random_range(0..m), rng.random(), RapsParams { lambda, k_reg })
            .unwrap();
        let small = raps_set(&point, lo);
        let large = raps_set(&point, hi);
        prop_assert!(small.members.iter().all(|c| large.contains(*c)));
        let center = rng.random_range(-5.0..5.0);
        let (a, b) = (interval_set(center, lo), interval_set(center, hi));
        prop_assert!(a.is_empty() || (b.lo() <= a.lo() && a.hi() <= b.hi()));
        Ok(())
    });
    lines.push(property("nested prediction sets", nestedness));

    let determinism = property_runner().run(&(arb_method(), any::<u64>(), 20usize..150), |(method, seed, horizon)| {
        let config = RunConfig {
            alpha: 0.1,
            method,
            stream: StreamSpec {
                kind: StreamKind::SuddenShift { levels: vec![0.2, 0.8], segment: 25 },
                noise: Noise::Gaussian { scale: 0.2 },
                horizon,
                bound: BoundSpec::Fixed(1.0),
            },
            windows: vec![20],
            seed,
            output: OutputPaths::default(),
        };
        let run = || {
            let stream = prepare_stream(&config).unwrap();
            let out = execute_on(&config, &stream, "x").unwrap();
            (stream.hash(), out.output.trace, out.report)
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(&a.0, &b.0);
        let same = a.1.iter().zip(&b.1).all(|(x, y)| {
            x.predicted.to_bits() == y.predicted.to_bits()
                && x.expected_err.map(f64::to_bits) == y.expected_err.map(f64::to_bits)
        });
        prop_assert!(same, "traces differ");
        prop_assert_eq!(a.1.len(), b.1.len());
        prop_assert_eq!(a.2, b.2);
        Ok(())
    });
    lines.push(property("determinism under fixed seeds", determinism));

    Outcome { pass: lines.iter().all(|l| l.0), detail: lines.into_iter().map(|l| l.1).collect::<Vec<_>>().join("; ") }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("bounded iterates", criterion_1),
        ("anytime regret", criterion_2),
        ("strongly adaptive regret", criterion_3),
        ("ACI coverage", criterion_4),
        ("SF-OGD coverage", criterion_5),
        ("trivial baseline", criterion_6),
        ("oracle equivalence", criterion_7),
        ("shift behavior", criterion_8),
        ("structural invariants", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = f();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{status}] criterion {} {name}: {}", i + 1, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
