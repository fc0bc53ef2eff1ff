//! Radius streams: synthetic generators with known quantiles and CSV
//! ingestion of real model outputs.

mod ingest;
mod synthetic;

use std::fmt::Write as _;
use std::path::PathBuf;

use saocp_core::conformal::RapsParams;
use saocp_core::metrics::quantile_variation;
use saocp_core::run::RadiusObservation;
use saocp_core::{Alpha, RadiusBound};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use ingest::{ingest_csv, ingest_reader, write_quantiles_csv, write_radius_csv, Ingested, Schema};
pub use synthetic::{
    gen_constant, gen_gradual_shift, gen_random_walk, gen_sudden_shift, truncated_normal_quantile, Noise,
};

/// How the radius bound `D` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundSpec {
    Fixed(f64),
    /// Maximum radius over the first `prefix` observations.
    Auto { prefix: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamKind {
    Constant { level: f64 },
    SuddenShift { levels: Vec<f64>, segment: usize },
    GradualShift { start: f64, end: f64, stages: usize, segment: usize },
    RandomWalk { start: f64, step: f64 },
    FromFile { path: PathBuf, raps: RapsParams },
}

impl StreamKind {
    pub fn name(&self) -> &'static str {
        match self {
            StreamKind::Constant { .. } => "constant",
            StreamKind::SuddenShift { .. } => "sudden_shift",
            StreamKind::GradualShift { .. } => "gradual_shift",
            StreamKind::RandomWalk { .. } => "random_walk",
            StreamKind::FromFile { .. } => "from_file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub noise: Noise,
    /// Number of steps; ignored for file streams.
    pub horizon: usize,
    pub bound: BoundSpec,
}

/// A materialized stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub observations: Vec<RadiusObservation>,
    /// Per-step `(1 − α)`-quantile of the generating distribution after
    /// clipping, when the generator knows it.
    pub known_quantiles: Option<Vec<f64>>,
    pub bound: RadiusBound,
    /// Raw radii that fell outside `[0, D]`.
    pub out_of_range: usize,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.true_radius).collect()
    }

    /// Hex SHA-256 over every `(t, radius)` pair and the bound.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.bound.get().to_bits().to_le_bytes());
        for o in &self.observations {
            h.update(o.t.to_le_bytes());
            h.update(o.true_radius.to_bits().to_le_bytes());
        }
        let mut out = String::with_capacity(64);
        for b in h.finalize() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    pub fn quantile_variation(&self) -> Result<f64> {
        let known = self.known_quantiles.as_deref().ok_or(saocp_core::Error::InvalidArgument(
            "quantile variation needs a stream with known quantiles",
        ))?;
        Ok(quantile_variation(known, self.bound)?)
    }
}

pub(crate) fn resolve_bound(spec: &BoundSpec, raw: &[f64]) -> Result<RadiusBound> {
    match *spec {
        BoundSpec::Fixed(d) => Ok(RadiusBound::new(d)?),
        BoundSpec::Auto { prefix } => {
            if prefix == 0 || prefix > raw.len() {
                return Err(Error::config(format!(
                    "calibration prefix {prefix} must lie in [1, {}]",
                    raw.len()
                )));
            }
            let max = raw[..prefix].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            RadiusBound::new(max).map_err(|_| {
                Error::config(format!("calibration prefix of {prefix} steps has maximum radius {max}"))
            })
        }
    }
}

pub(crate) fn count_out_of_range(raw: &[f64], bound: RadiusBound) -> usize {
    raw.iter().filter(|&&r| !(0.0..=bound.get()).contains(&r)).count()
}

/// Materialize `spec`. Synthetic streams draw their noise from sub-streams
/// of `seed`; file streams use it for the classification randomization.
pub fn generate(spec: &StreamSpec, alpha: Alpha, seed: u64) -> Result<Stream> {
    match &spec.kind {
        StreamKind::Constant { level } => gen_constant(*level, &spec.noise, spec.horizon, &spec.bound, alpha, seed),
        StreamKind::SuddenShift { levels, segment } => {
            gen_sudden_shift(levels, *segment, &spec.noise, spec.horizon, &spec.bound, alpha, seed)
        }
        StreamKind::GradualShift { start, end, stages, segment } => gen_gradual_shift(
            *start,
            *end,
            *stages,
            *segment,
            &spec.noise,
            spec.horizon,
            &spec.bound,
            alpha,
            seed,
        ),
        StreamKind::RandomWalk { start, step } => {
            gen_random_walk(*start, *step, &spec.noise, spec.horizon, &spec.bound, alpha, seed)
        }
        StreamKind::FromFile { path, raps } => {
            let ingested = ingest_csv(path, *raps, seed)?;
            ingested.into_stream(&spec.bound)
        }
    }
}
