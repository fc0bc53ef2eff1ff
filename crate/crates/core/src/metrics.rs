//! Evaluation of a finished run.
//!
//! All quantities are computed from a slice of [`StepTrace`]s:
//!
//! - `Err(T) = |mean(err) − α|`
//! - `LCE_k = max_τ |α − mean(err over [τ, τ+k−1])|`
//! - `SAReg_k = max_τ (Σ loss − min_s Σ ℓ(S_t, s))` over windows of length `k`
//!
//! The windowed hindsight minimum is maintained incrementally with a pair of
//! Fenwick trees over the ranks of the true radii, so a full sweep of one
//! window length costs `O(T log T)`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::{quantile_rank, Alpha, RadiusBound};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTrace {
    pub t: u64,
    pub predicted: f64,
    pub true_radius: f64,
    /// `ŝ_t < S_t`.
    pub err: bool,
    pub loss: f64,
    pub width: f64,
    pub active_experts: Option<usize>,
    pub expected_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub steps: usize,
    pub alpha: f64,
    /// Empirical coverage `1 − mean(err)`.
    pub coverage: f64,
    pub coverage_error: f64,
    /// Coverage error computed from the expected miscoverage of a randomized
    /// run, when every step recorded one.
    pub expected_coverage_error: Option<f64>,
    /// Regret over the whole run against the best fixed radius.
    pub regret: f64,
    pub lce: BTreeMap<usize, f64>,
    pub sa_regret: BTreeMap<usize, f64>,
    pub width_median: f64,
    pub path_length: f64,
    pub clip_count: usize,
    /// Requested windows longer than the trace.
    pub omitted_windows: Vec<usize>,
}

fn require_nonempty(trace: &[StepTrace]) -> Result<()> {
    if trace.is_empty() {
        Err(Error::Empty("trace"))
    } else {
        Ok(())
    }
}

fn check_window(k: usize, len: usize) -> Result<()> {
    if k == 0 || k > len {
        Err(Error::InvalidWindow { k, len })
    } else {
        Ok(())
    }
}

fn miss_count(trace: &[StepTrace]) -> usize {
    trace.iter().filter(|s| s.err).count()
}

pub fn coverage_error(trace: &[StepTrace], alpha: Alpha) -> Result<f64> {
    require_nonempty(trace)?;
    Ok((miss_count(trace) as f64 / trace.len() as f64 - alpha.get()).abs())
}

/// Coverage error from `expected_err`, or `None` if any step lacks it.
pub fn expected_coverage_error(trace: &[StepTrace], alpha: Alpha) -> Result<Option<f64>> {
    require_nonempty(trace)?;
    let mut total = 0.0;
    for step in trace {
        match step.expected_err {
            Some(e) => total += e,
            None => return Ok(None),
        }
    }
    Ok(Some((total / trace.len() as f64 - alpha.get()).abs()))
}

pub fn local_coverage_error(trace: &[StepTrace], alpha: Alpha, k: usize) -> Result<f64> {
    check_window(k, trace.len())?;
    let mut misses = miss_count(&trace[..k]);
    let kf = k as f64;
    let mut worst = (alpha.get() - misses as f64 / kf).abs();
    for i in k..trace.len() {
        misses += usize::from(trace[i].err);
        misses -= usize::from(trace[i - k].err);
        worst = worst.max((alpha.get() - misses as f64 / kf).abs());
    }
    Ok(worst)
}

/// Fenwick tree over `f64` sums.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0.0; n + 1] }
    }

    fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `[0, index]`.
    fn prefix(&self, index: usize) -> f64 {
        let mut i = index + 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    /// Smallest index whose prefix sum reaches `target`; entries must be
    /// non-negative integers stored exactly.
    fn lower_bound(&self, target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut remaining = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] < remaining {
                pos = next;
                remaining -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Multiset of radii drawn from a fixed universe, answering
/// `min_s Σ_v ℓ(v, s)` for the current contents.
#[derive(Debug, Clone)]
pub struct HindsightOracle {
    alpha: f64,
    coords: Vec<f64>,
    counts: Fenwick,
    sums: Fenwick,
    len: usize,
    total: f64,
}

impl HindsightOracle {
    /// `universe` lists every value that may later be inserted.
    pub fn new(universe: &[f64], alpha: Alpha) -> Result<Self> {
        if universe.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radius"));
        }
        let mut coords = universe.to_vec();
        coords.sort_by(f64::total_cmp);
        coords.dedup();
        let n = coords.len();
        Ok(Self {
            alpha: alpha.get(),
            coords,
            counts: Fenwick::new(n),
            sums: Fenwick::new(n),
            len: 0,
            total: 0.0,
        })
    }

    fn index_of(&self, v: f64) -> usize {
        self.coords
            .binary_search_by(|c| c.total_cmp(&v))
            .expect("value outside the declared universe")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, v: f64) {
        let i = self.index_of(v);
        self.counts.add(i, 1.0);
        self.sums.add(i, v);
        self.len += 1;
        self.total += v;
    }

    pub fn remove(&mut self, v: f64) {
        let i = self.index_of(v);
        self.counts.add(i, -1.0);
        self.sums.add(i, -v);
        self.len -= 1;
        self.total -= v;
    }

    /// Best fixed radius for the current contents and its total loss.
    pub fn best(&self) -> Option<(f64, f64)> {
        if self.len == 0 {
            return None;
        }
        let rank = quantile_rank(self.len, 1.0 - self.alpha);
        let idx = self.counts.lower_bound(rank as f64);
        let s = self.coords[idx];
        let below = self.counts.prefix(idx);
        let sum_below = self.sums.prefix(idx);
        let above = self.len as f64 - below;
        let sum_above = self.total - sum_below;
        let loss = self.alpha * (below * s - sum_below) + (1.0 - self.alpha) * (sum_above - above * s);
        Some((s, loss.max(0.0)))
    }
}

/// Regret of every window of length `k`; entry `j` covers steps
/// `[j, j + k − 1]` of the trace.
pub fn window_regrets(trace: &[StepTrace], alpha: Alpha, k: usize) -> Result<Vec<f64>> {
    check_window(k, trace.len())?;
    let radii: Vec<f64> = trace.iter().map(|s| s.true_radius).collect();
    let mut oracle = HindsightOracle::new(&radii, alpha)?;
    let mut window_loss = 0.0;
    for step in &trace[..k] {
        oracle.insert(step.true_radius);
        window_loss += step.loss;
    }
    let mut out = Vec::with_capacity(trace.len() - k + 1);
    out.push(window_loss - oracle.best().map_or(0.0, |b| b.1));
    for i in k..trace.len() {
        oracle.insert(trace[i].true_radius);
        oracle.remove(trace[i - k].true_radius);
        window_loss += trace[i].loss - trace[i - k].loss;
        out.push(window_loss - oracle.best().map_or(0.0, |b| b.1));
    }
    Ok(out)
}

/// Worst regret over all windows of length `k`.
pub fn sa_regret(trace: &[StepTrace], alpha: Alpha, k: usize) -> Result<f64> {
    Ok(window_regrets(trace, alpha, k)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Regret over the whole trace.
pub fn regret(trace: &[StepTrace], alpha: Alpha) -> Result<f64> {
    require_nonempty(trace)?;
    sa_regret(trace, alpha, trace.len())
}

/// Regret of every prefix `[1, t]`.
pub fn prefix_regrets(trace: &[StepTrace], alpha: Alpha) -> Result<Vec<f64>> {
    let radii: Vec<f64> = trace.iter().map(|s| s.true_radius).collect();
    let mut oracle = HindsightOracle::new(&radii, alpha)?;
    let mut cumulative = 0.0;
    Ok(trace
        .iter()
        .map(|step| {
            oracle.insert(step.true_radius);
            cumulative += step.loss;
            cumulative - oracle.best().map_or(0.0, |b| b.1)
        })
        .collect())
}

/// `Σ_{t>τ} |S_t − S_{t−1}|`.
pub fn path_length(radii: &[f64]) -> Result<f64> {
    if radii.is_empty() {
        return Err(Error::Empty("path length of an empty interval"));
    }
    Ok(radii.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// `Σ_t (s*_t/D − mean(s*)/D)²` for per-step quantiles known in advance.
pub fn quantile_variation(known_quantiles: &[f64], bound: RadiusBound) -> Result<f64> {
    if known_quantiles.is_empty() {
        return Err(Error::Empty("quantile variation of an empty interval"));
    }
    let d = bound.get();
    let mean = known_quantiles.iter().sum::<f64>() / known_quantiles.len() as f64;
    Ok(known_quantiles.iter().map(|q| {
        let z = (q - mean) / d;
        z * z
    }).sum())
}

/// Sliding means over windows of length `k`; entry `j` covers steps
/// `[j, j + k − 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSeries {
    pub coverage: Vec<f64>,
    pub width: Vec<f64>,
}

pub fn local_series(trace: &[StepTrace], k: usize) -> Result<LocalSeries> {
    check_window(k, trace.len())?;
    let kf = k as f64;
    let mut covered = trace[..k].iter().filter(|s| !s.err).count();
    let mut width: f64 = trace[..k].iter().map(|s| s.width).sum();
    let mut out = LocalSeries { coverage: vec![covered as f64 / kf], width: vec![width / kf] };
    for i in k..trace.len() {
        covered += usize::from(!trace[i].err);
        covered -= usize::from(!trace[i - k].err);
        width += trace[i].width - trace[i - k].width;
        out.coverage.push(covered as f64 / kf);
        out.width.push(width / kf);
    }
    Ok(out)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Every report field for the given windows. Windows longer than the trace
/// are listed in `omitted_windows` instead of failing.
pub fn summarize(
    trace: &[StepTrace],
    alpha: Alpha,
    windows: &[usize],
    clip_count: usize,
) -> Result<MetricsReport> {
    require_nonempty(trace)?;
    let mut lce = BTreeMap::new();
    let mut sareg = BTreeMap::new();
    let mut omitted = Vec::new();
    for &k in windows {
        if k == 0 {
            return Err(Error::InvalidWindow { k, len: trace.len() });
        }
        if k > trace.len() {
            if !omitted.contains(&k) {
                omitted.push(k);
            }
            continue;
        }
        lce.insert(k, local_coverage_error(trace, alpha, k)?);
        sareg.insert(k, sa_regret(trace, alpha, k)?);
    }
    let mut widths: Vec<f64> = trace.iter().map(|s| s.width).collect();
    let radii: Vec<f64> = trace.iter().map(|s| s.true_radius).collect();
    Ok(MetricsReport {
        steps: trace.len(),
        alpha: alpha.get(),
        coverage: 1.0 - miss_count(trace) as f64 / trace.len() as f64,
        coverage_error: coverage_error(trace, alpha)?,
        expected_coverage_error: expected_coverage_error(trace, alpha)?,
        regret: regret(trace, alpha)?,
        lce,
        sa_regret: sareg,
        width_median: median(&mut widths),
        path_length: path_length(&radii)?,
        clip_count,
        omitted_windows: omitted,
    })
}
