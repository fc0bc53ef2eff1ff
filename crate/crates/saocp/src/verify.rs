//! Executable bound checks over seeded families of streams.
//!
//! Every suite runs learners against [`TestStream`]s, a mix of stochastic
//! and prediction-aware adversarial radius sequences, and compares each
//! observed quantity with its closed-form bound. A check records the worst
//! observed-to-bound ratio and the first violation, if any, with the seed
//! and step that produced it.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saocp_core::learners::{Aci, Learner, SfOgd};
use saocp_core::loss::{best_fixed_radius, pinball};
use saocp_core::metrics::{prefix_regrets, sa_regret, window_regrets};
use saocp_core::saocp::DEFAULT_MULTIPLIER;
use saocp_core::{Alpha, RadiusBound, Saocp, StepTrace};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    BoundedIterates,
    AnytimeRegret,
    SaRegret,
    Coverage,
    OracleEquivalence,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::BoundedIterates, Suite::AnytimeRegret, Suite::SaRegret, Suite::Coverage, Suite::OracleEquivalence];

    pub fn name(self) -> &'static str {
        match self {
            Suite::BoundedIterates => "bounded-iterates",
            Suite::AnytimeRegret => "anytime-regret",
            Suite::SaRegret => "saregret",
            Suite::Coverage => "coverage",
            Suite::OracleEquivalence => "oracle-equivalence",
        }
    }

    /// Number of seeds (or instances) and horizon the suite runs at.
    pub fn documented_scale(self) -> Scale {
        match self {
            Suite::BoundedIterates => Scale { seeds: 1000, horizon: 5000 },
            Suite::AnytimeRegret | Suite::SaRegret => Scale { seeds: 200, horizon: 2000 },
            Suite::Coverage => Scale { seeds: 200, horizon: 5000 },
            Suite::OracleEquivalence => Scale { seeds: 500, horizon: 60 },
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::config(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub seeds: usize,
    pub horizon: usize,
}

/// Where a bound came closest to (or beyond) its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub seed: u64,
    pub step: usize,
    pub observed: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    pub worst: Option<Witness>,
    pub first_violation: Option<Witness>,
}

impl Check {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            violations: 0,
            worst_ratio: f64::NEG_INFINITY,
            worst: None,
            first_violation: None,
        }
    }

    /// Record one comparison of `observed` against `bound`; `slack` absorbs
    /// floating-point rounding only.
    /// A NaN observation counts as a violation.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn record(&mut self, seed: u64, step: usize, observed: f64, bound: f64, slack: f64) {
        let witness = || Witness { seed, step, observed, bound };
        let ratio = if bound > 0.0 { observed / bound } else { observed - bound };
        if ratio > self.worst_ratio || self.worst.is_none() {
            self.worst_ratio = ratio;
            self.worst = Some(witness());
        }
        if !(observed <= bound + slack) {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(witness());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok" } else { "VIOLATED" };
        write!(f, "{status:8} {} : {} cases, max observed/bound = {:.6}", self.name, self.cases, self.worst_ratio)?;
        if let Some(w) = &self.worst {
            write!(f, " (seed {}, step {}: {:.6e} vs {:.6e})", w.seed, w.step, w.observed, w.bound)?;
        }
        if let Some(v) = &self.first_violation {
            write!(
                f,
                "\n         {} violations; first at seed {}, step {}: {:.12e} > {:.12e}",
                self.violations, v.seed, v.step, v.observed, v.bound
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {} ({:.2} s)", self.suite, self.elapsed.as_secs_f64())?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

/// How a [`TestStream`] picks the next radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pattern {
    Uniform,
    Constant(f64),
    Shift { low: f64, high: f64, segment: usize },
    Walk { step: f64 },
    Alternating,
    /// Just above the current prediction, forcing misses until `D`.
    Push { gap: f64 },
    /// `D` when the prediction is below `D/2`, otherwise `0`.
    Oppose,
    /// The prediction itself, clipped: every step is a tie.
    Tie,
    /// `D` with probability `p`, otherwise `0`.
    Extremes { p: f64 },
}

/// Seeded radius sequence in `[0, D]`, possibly reacting to the learner's
/// prediction.
#[derive(Debug, Clone)]
pub struct TestStream {
    pub pattern: Pattern,
    pub bound: RadiusBound,
    rng: ChaCha8Rng,
    step: usize,
    level: f64,
}

impl TestStream {
    pub const PATTERNS: usize = 9;

    /// Pattern and `D ∈ [0.1, 100]` (log-uniform) derived from `seed`.
    pub fn for_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 10f64.powf(rng.random_range(-1.0..2.0));
        let pattern = match seed % Self::PATTERNS as u64 {
            0 => Pattern::Uniform,
            1 => Pattern::Constant(rng.random_range(0.0..=d)),
            2 => Pattern::Shift {
                low: rng.random_range(0.0..=d),
                high: rng.random_range(0.0..=d),
                segment: rng.random_range(1..=500),
            },
            3 => Pattern::Walk { step: d * rng.random_range(0.001..0.2) },
            4 => Pattern::Alternating,
            5 => Pattern::Push { gap: d * rng.random_range(0.0..0.1) },
            6 => Pattern::Oppose,
            7 => Pattern::Tie,
            _ => Pattern::Extremes { p: rng.random_range(0.0..=1.0) },
        };
        let level = rng.random_range(0.0..=d);
        Self { pattern, bound: RadiusBound::new(d).expect("positive bound"), rng, step: 0, level }
    }

    pub fn d(&self) -> f64 {
        self.bound.get()
    }

    pub fn next(&mut self, prediction: f64) -> f64 {
        let d = self.d();
        let step = self.step;
        self.step += 1;
        let r = match self.pattern {
            Pattern::Uniform => self.rng.random_range(0.0..=d),
            Pattern::Constant(c) => c,
            Pattern::Shift { low, high, segment } => {
                if (step / segment).is_multiple_of(2) {
                    low
                } else {
                    high
                }
            }
            Pattern::Walk { step } => {
                let x = self.level + if self.rng.random::<bool>() { step } else { -step };
                self.level = if x < 0.0 {
                    -x
                } else if x > d {
                    2.0 * d - x
                } else {
                    x
                };
                self.level
            }
            Pattern::Alternating => {
                if step.is_multiple_of(2) {
                    0.0
                } else {
                    d
                }
            }
            Pattern::Push { gap } => prediction + gap,
            Pattern::Oppose => {
                if prediction < d / 2.0 {
                    d
                } else {
                    0.0
                }
            }
            Pattern::Tie => prediction,
            Pattern::Extremes { p } => {
                if self.rng.random_bool(p) {
                    d
                } else {
                    0.0
                }
            }
        };
        r.clamp(0.0, d)
    }
}

/// Play `learner` against `stream` for `horizon` steps.
pub fn play<L: Learner + ?Sized>(
    learner: &mut L,
    stream: &mut TestStream,
    alpha: Alpha,
    horizon: usize,
) -> Result<Vec<StepTrace>> {
    let mut trace = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let predicted = learner.predict()?;
        let true_radius = stream.next(predicted);
        let info = learner.update(true_radius)?;
        trace.push(StepTrace {
            t: t as u64,
            predicted,
            true_radius,
            err: predicted < true_radius,
            loss: pinball(alpha.get(), true_radius, predicted),
            width: predicted.max(0.0),
            active_experts: info.active_experts,
            expected_err: info.expected_err,
        });
    }
    Ok(trace)
}

fn case_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(99);
    rng
}

fn random_alpha(rng: &mut ChaCha8Rng) -> Alpha {
    Alpha::new(rng.random_range(0.01..0.5)).expect("alpha in range")
}

/// ACI and SF-OGD iterates stay within `[−η, D + η]`.
pub fn bounded_iterates(scale: Scale, base_seed: u64) -> Result<Vec<Check>> {
    let mut aci_check = Check::new("aci iterates in [-eta, D+eta]");
    let mut ogd_check = Check::new("sf-ogd iterates in [-eta, D+eta]");
    for seed in base_seed..base_seed + scale.seeds as u64 {
        let mut rng = case_rng(seed);
        let alpha = random_alpha(&mut rng);
        for (check, use_aci) in [(&mut aci_check, true), (&mut ogd_check, false)] {
            let mut stream = TestStream::for_seed(seed);
            let d = stream.d();
            let eta = d * rng.random_range(0.01..=1.0);
            let init = rng.random_range(0.0..=d);
            let mut learner: Box<dyn Learner> = if use_aci {
                Box::new(Aci::new(alpha, eta, init)?)
            } else {
                Box::new(SfOgd::new(alpha, eta, init)?)
            };
            let trace = play(learner.as_mut(), &mut stream, alpha, scale.horizon)?;
            let slack = 1e-12 * (d + eta);
            let worst = trace
                .iter()
                .enumerate()
                .map(|(i, s)| (i + 1, (-s.predicted).max(s.predicted - d)))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            check.cases += 1;
            check.record(seed, worst.0, worst.1, eta, slack);
        }
    }
    Ok(vec![aci_check, ogd_check])
}

/// SF-OGD with `η = D/√3`: regret at every prefix `t` is at most
/// `(√3 + 1)·D·sqrt(Σ_{τ≤t} g_τ²)`.
pub fn anytime_regret(scale: Scale, base_seed: u64) -> Result<Vec<Check>> {
    let mut check = Check::new("sf-ogd prefix regret <= (sqrt3+1) D sqrt(sum g^2)");
    for seed in base_seed..base_seed + scale.seeds as u64 {
        let mut rng = case_rng(seed);
        let alpha = random_alpha(&mut rng);
        let mut stream = TestStream::for_seed(seed);
        let d = stream.d();
        let init = rng.random_range(0.0..=d);
        let mut learner = SfOgd::new(alpha, SfOgd::default_eta(stream.bound), init)?;
        let trace = play(&mut learner, &mut stream, alpha, scale.horizon)?;
        let regrets = prefix_regrets(&trace, alpha)?;
        let coef = (3f64.sqrt() + 1.0) * d;
        let mut sum_sq = 0.0;
        let mut cum_loss = 0.0;
        let mut worst = (0, f64::NEG_INFINITY, 1.0);
        let mut first_bad = None;
        for (i, (s, &reg)) in trace.iter().zip(&regrets).enumerate() {
            let g = alpha.get() - f64::from(u8::from(s.err));
            sum_sq += g * g;
            cum_loss += s.loss;
            let bound = coef * sum_sq.sqrt();
            if reg / bound > worst.1 / worst.2 {
                worst = (i + 1, reg, bound);
            }
            if first_bad.is_none() && reg > bound + 1e-12 * (1.0 + cum_loss) {
                first_bad = Some((i + 1, reg, bound, 1e-12 * (1.0 + cum_loss)));
            }
        }
        check.cases += 1;
        match first_bad {
            Some((step, reg, bound, slack)) => check.record(seed, step, reg, bound, slack),
            None => check.record(seed, worst.0, worst.1, worst.2, f64::INFINITY),
        }
    }
    Ok(vec![check])
}

/// Windows checked for a horizon: every power of two up to `T`, and `T`.
pub fn dyadic_windows(horizon: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (0..).map(|e| 1usize << e).take_while(|&k| k <= horizon).collect();
    if ks.last() != Some(&horizon) {
        ks.push(horizon);
    }
    ks
}

/// SAOCP's regret on every window of every dyadic length is at most
/// `15·D·sqrt(k(ln T + 1))`. The same runs are also scored against the
/// base-2 reading of the logarithm.
pub fn strongly_adaptive_regret(scale: Scale, base_seed: u64) -> Result<Vec<Check>> {
    let mut natural = Check::new("saocp window regret <= 15 D sqrt(k (ln T + 1))");
    let mut binary = Check::new("saocp window regret <= 15 D sqrt(k (log2 T + 1))");
    let t = scale.horizon as f64;
    for seed in base_seed..base_seed + scale.seeds as u64 {
        let mut rng = case_rng(seed);
        let alpha = random_alpha(&mut rng);
        let mut stream = TestStream::for_seed(seed);
        let d = stream.d();
        let mut learner = Saocp::new(alpha, stream.bound, DEFAULT_MULTIPLIER)?;
        let trace = play(&mut learner, &mut stream, alpha, scale.horizon)?;
        let slack = 1e-9 * d * t;
        for k in dyadic_windows(scale.horizon) {
            let regrets = window_regrets(&trace, alpha, k)?;
            let (start, worst) = regrets
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |a, (i, &r)| if r > a.1 { (i, r) } else { a });
            let kf = k as f64;
            natural.cases += regrets.len();
            binary.cases += regrets.len();
            natural.record(seed, start + 1, worst, 15.0 * d * (kf * (t.ln() + 1.0)).sqrt(), slack);
            binary.record(seed, start + 1, worst, 15.0 * d * (kf * (t.log2() + 1.0)).sqrt(), slack);
        }
    }
    Ok(vec![natural, binary])
}

/// ACI: `|Err(t)| ≤ (D + η)/(η t)` at every prefix.
pub fn aci_coverage(scale: Scale, base_seed: u64) -> Result<Check> {
    let mut check = Check::new("aci |Err(t)| <= (D+eta)/(eta t)");
    for seed in base_seed..base_seed + scale.seeds as u64 {
        let mut rng = case_rng(seed);
        let alpha = random_alpha(&mut rng);
        let mut stream = TestStream::for_seed(seed);
        let d = stream.d();
        let eta = d * rng.random_range(0.01..=1.0);
        let init = rng.random_range(0.0..=d);
        let mut learner = Aci::new(alpha, eta, init)?;
        let trace = play(&mut learner, &mut stream, alpha, scale.horizon)?;
        let mut misses = 0usize;
        let mut worst = (0, f64::NEG_INFINITY, 1.0);
        let mut first_bad = None;
        for (i, s) in trace.iter().enumerate() {
            misses += usize::from(s.err);
            let n = (i + 1) as f64;
            let err = (misses as f64 / n - alpha.get()).abs();
            let bound = (d + eta) / (eta * n);
            if err / bound > worst.1 / worst.2 {
                worst = (i + 1, err, bound);
            }
            if first_bad.is_none() && err > bound + 1e-12 {
                first_bad = Some((i + 1, err, bound));
            }
        }
        check.cases += 1;
        match first_bad {
            Some((step, err, bound)) => check.record(seed, step, err, bound, 1e-12),
            None => check.record(seed, worst.0, worst.1, worst.2, f64::INFINITY),
        }
    }
    Ok(check)
}

pub const SFOGD_COVERAGE_HORIZONS: [usize; 3] = [100, 1_000, 10_000];
pub const SFOGD_COVERAGE_ALPHAS: [f64; 2] = [0.05, 0.1];

/// SF-OGD: `|Err(T)| ≤ 2((D + 3η)/η + α⁻² ln T)·T^{−1/4}` for each horizon
/// and level in the documented grid.
pub fn sfogd_coverage(seeds: usize, base_seed: u64) -> Result<Check> {
    let mut check = Check::new("sf-ogd |Err(T)| <= 2((D+3eta)/eta + ln T / alpha^2) T^(-1/4)");
    for &horizon in &SFOGD_COVERAGE_HORIZONS {
        for &a in &SFOGD_COVERAGE_ALPHAS {
            let alpha = Alpha::new(a)?;
            for seed in base_seed..base_seed + seeds as u64 {
                let mut rng = case_rng(seed);
                let mut stream = TestStream::for_seed(seed);
                let d = stream.d();
                let eta = SfOgd::default_eta(stream.bound);
                let init = rng.random_range(0.0..=d);
                let mut learner = SfOgd::new(alpha, eta, init)?;
                let trace = play(&mut learner, &mut stream, alpha, horizon)?;
                let misses = trace.iter().filter(|s| s.err).count();
                let t = horizon as f64;
                let err = (misses as f64 / t - a).abs();
                let bound = 2.0 * ((d + 3.0 * eta) / eta + (t.ln()) / (a * a)) * t.powf(-0.25);
                check.cases += 1;
                check.record(seed, horizon, err, bound, 1e-12);
            }
        }
    }
    Ok(check)
}

/// Smallest total pinball loss over a grid of 10,001 radii in `[0, D]` and
/// every observed value.
pub fn grid_min_loss(alpha: f64, values: &[f64], d: f64) -> f64 {
    (0..=10_000)
        .map(|i| d * i as f64 / 10_000.0)
        .chain(values.iter().copied())
        .map(|s| values.iter().map(|&v| pinball(alpha, v, s)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Random instance for oracle comparisons: radii (with deliberate ties),
/// predictions around `[0, D]` and a window length.
pub fn oracle_instance(seed: u64, max_len: usize) -> (Alpha, f64, Vec<StepTrace>, usize) {
    let mut rng = case_rng(seed);
    let alpha = Alpha::new(rng.random_range(0.02..0.98)).expect("alpha in range");
    let d = rng.random_range(0.5..2.0);
    let n = rng.random_range(1..=max_len);
    let coarse = rng.random_bool(0.5);
    let trace = (1..=n)
        .map(|t| {
            let s = if coarse { d * f64::from(rng.random_range(0u8..=8)) / 8.0 } else { rng.random_range(0.0..=d) };
            let p = rng.random_range(-0.2 * d..1.2 * d);
            StepTrace {
                t: t as u64,
                predicted: p,
                true_radius: s,
                err: p < s,
                loss: pinball(alpha.get(), s, p),
                width: p.max(0.0),
                active_experts: None,
                expected_err: None,
            }
        })
        .collect();
    let k = rng.random_range(1..=n);
    (alpha, d, trace, k)
}

/// `best_fixed_radius` and windowed regret against grid brute force.
pub fn oracle_equivalence(scale: Scale, base_seed: u64) -> Result<Vec<Check>> {
    let mut best = Check::new("best_fixed_radius loss vs grid minimum");
    let mut windows = Check::new("sa_regret vs brute-force windows");
    for seed in base_seed..base_seed + scale.seeds as u64 {
        let (alpha, d, trace, k) = oracle_instance(seed, scale.horizon);
        let radii: Vec<f64> = trace.iter().map(|s| s.true_radius).collect();
        let fast = best_fixed_radius(&radii, alpha)?.total_loss;
        let slow = grid_min_loss(alpha.get(), &radii, d);
        best.cases += 1;
        best.record(seed, radii.len(), (fast - slow).abs(), 1e-9, 0.0);

        let fast = sa_regret(&trace, alpha, k)?;
        let slow = trace
            .windows(k)
            .map(|w| {
                let loss: f64 = w.iter().map(|s| s.loss).sum();
                let r: Vec<f64> = w.iter().map(|s| s.true_radius).collect();
                loss - grid_min_loss(alpha.get(), &r, d)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        windows.cases += 1;
        windows.record(seed, k, (fast - slow).abs(), 1e-9, 0.0);
    }
    Ok(vec![best, windows])
}

pub fn run_suite(suite: Suite, scale: Scale, base_seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let checks = match suite {
        Suite::BoundedIterates => bounded_iterates(scale, base_seed)?,
        Suite::AnytimeRegret => anytime_regret(scale, base_seed)?,
        Suite::SaRegret => strongly_adaptive_regret(scale, base_seed)?,
        Suite::Coverage => vec![aci_coverage(scale, base_seed)?, sfogd_coverage(scale.seeds / 2, base_seed)?],
        Suite::OracleEquivalence => oracle_equivalence(scale, base_seed)?,
    };
    Ok(SuiteReport { suite, checks, elapsed: start.elapsed() })
}
