//! Run configuration as a flat `key = value` document.
//!
//! ```text
//! alpha = 0.1
//! seed = 7
//! windows = 20, 100
//! method.name = saocp
//! method.g = 8
//! stream.kind = sudden_shift
//! stream.levels = 1, 100
//! stream.segment = 1000
//! stream.horizon = 2000
//! stream.noise = none
//! stream.bound = 100
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Keys that do not
//! apply to the chosen method or stream kind are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use saocp_core::conformal::RapsParams;
use saocp_core::learners::{FaciConfig, MetaRate};
use saocp_core::{Alpha, MethodConfig};

use crate::error::{Error, Result};
use crate::streams::{BoundSpec, Noise, StreamKind, StreamSpec};

pub const DEFAULT_WINDOWS: [usize; 1] = [20];
pub const DEFAULT_TRACE: &str = "trace.csv";
pub const DEFAULT_REPORT: &str = "report.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub trace: PathBuf,
    pub report: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self { trace: PathBuf::from(DEFAULT_TRACE), report: PathBuf::from(DEFAULT_REPORT) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    /// For the trivial baseline a horizon of 0 means "the stream length".
    pub method: MethodConfig,
    pub stream: StreamSpec,
    pub windows: Vec<usize>,
    pub seed: u64,
    pub output: OutputPaths,
}

impl RunConfig {
    pub fn alpha(&self) -> Result<Alpha> {
        Ok(Alpha::new(self.alpha)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Domain(d) => Error::config(d.to_string()),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        self.alpha()?;
        if self.windows.contains(&0) {
            return Err(Error::config("metric windows must be positive"));
        }
        match &self.method {
            MethodConfig::Faci(c) | MethodConfig::FaciS { config: c, .. } => c.validate()?,
            MethodConfig::Saocp { g, .. } if *g == 0 => {
                return Err(Error::config("method.g must be at least 1"));
            }
            _ => {}
        }
        if !matches!(self.stream.kind, StreamKind::FromFile { .. }) && self.stream.horizon == 0 {
            return Err(Error::config("stream.horizon must be at least 1"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = text.parse()?;
        // Relative input files resolve against the config's directory.
        if let StreamKind::FromFile { path: input, .. } = &mut config.stream.kind {
            if input.is_relative() {
                if let Some(dir) = path.parent() {
                    *input = dir.join(&*input);
                }
            }
        }
        Ok(config)
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("alpha", fmt_f64(self.alpha));
        put("seed", self.seed.to_string());
        put("windows", join(&self.windows));
        put("method.name", self.method.name().to_string());
        match &self.method {
            MethodConfig::Scp => {}
            MethodConfig::NexCp { decay } => {
                if let Some(d) = decay {
                    put("method.decay", fmt_f64(*d));
                }
            }
            MethodConfig::Aci { eta, initial } | MethodConfig::SfOgd { eta, initial } => {
                if let Some(e) = eta {
                    put("method.eta", fmt_f64(*e));
                }
                put("method.initial", fmt_f64(*initial));
            }
            MethodConfig::Faci(c) => put_faci(&mut put, c),
            MethodConfig::FaciS { config, initial } => {
                put_faci(&mut put, config);
                put("method.initial", fmt_f64(*initial));
            }
            MethodConfig::Saocp { g, randomized } => {
                put("method.g", g.to_string());
                put("method.randomized", randomized.to_string());
            }
            MethodConfig::Trivial { horizon } => {
                if *horizon > 0 {
                    put("method.horizon", horizon.to_string());
                }
            }
        }
        put("stream.kind", self.stream.kind.name().to_string());
        match &self.stream.kind {
            StreamKind::Constant { level } => put("stream.level", fmt_f64(*level)),
            StreamKind::SuddenShift { levels, segment } => {
                put("stream.levels", join_f64(levels));
                put("stream.segment", segment.to_string());
            }
            StreamKind::GradualShift { start, end, stages, segment } => {
                put("stream.start", fmt_f64(*start));
                put("stream.end", fmt_f64(*end));
                put("stream.stages", stages.to_string());
                put("stream.segment", segment.to_string());
            }
            StreamKind::RandomWalk { start, step } => {
                put("stream.start", fmt_f64(*start));
                put("stream.step", fmt_f64(*step));
            }
            StreamKind::FromFile { path, raps } => {
                put("stream.path", path.display().to_string());
                put("stream.raps_lambda", fmt_f64(raps.lambda));
                put("stream.raps_k_reg", raps.k_reg.to_string());
            }
        }
        if !matches!(self.stream.kind, StreamKind::FromFile { .. }) {
            put("stream.horizon", self.stream.horizon.to_string());
            put("stream.noise", self.stream.noise.name().to_string());
            if !matches!(self.stream.noise, Noise::None) {
                put("stream.noise_scale", fmt_f64(self.stream.noise.scale()));
            }
        }
        match self.stream.bound {
            BoundSpec::Fixed(d) => put("stream.bound", fmt_f64(d)),
            BoundSpec::Auto { prefix } => {
                put("stream.bound", "auto".to_string());
                put("stream.bound_prefix", prefix.to_string());
            }
        }
        put("output.trace", self.output.trace.display().to_string());
        put("output.report", self.output.report.display().to_string());
        out
    }
}

fn put_faci(put: &mut impl FnMut(&str, String), c: &FaciConfig) {
    put("method.rates", join_f64(&c.rates));
    put("method.window", c.window.to_string());
    put("method.smoothing", fmt_f64(c.smoothing));
    put(
        "method.meta_rate",
        match c.meta_rate {
            MetaRate::Schedule => "schedule".to_string(),
            MetaRate::Fixed(eta) => fmt_f64(eta),
        },
    );
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn join(values: &[usize]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(", ")
}

/// Parsed key-value pairs, consumed as they are read so leftovers can be
/// reported as unknown.
struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config(format!("line {}: empty key", i + 1)));
            }
            if map.insert(key.to_string(), (i + 1, value.trim().to_string())).is_some() {
                return Err(Error::config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(format!("line {line}: invalid value {v:?} for `{key}`"))),
        }
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?.ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|item| item.trim().parse())
                .collect::<std::result::Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| Error::config(format!("line {line}: invalid list {v:?} for `{key}`"))),
        }
    }

    fn require_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        self.take_list(key)?.ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn finish(self) -> Result<()> {
        match self.map.iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::config(format!("line {line}: unknown key `{key}`"))),
        }
    }
}

fn parse_faci(e: &mut Entries) -> Result<FaciConfig> {
    let defaults = FaciConfig::default();
    let window = e.take("method.window")?.unwrap_or(defaults.window);
    let meta_rate = match e.take_raw("method.meta_rate") {
        None => MetaRate::Schedule,
        Some((_, v)) if v == "schedule" => MetaRate::Schedule,
        Some((line, v)) => MetaRate::Fixed(
            v.parse()
                .map_err(|_| Error::config(format!("line {line}: method.meta_rate must be `schedule` or a number")))?,
        ),
    };
    Ok(FaciConfig {
        rates: e.take_list("method.rates")?.unwrap_or(defaults.rates),
        window,
        smoothing: e.take("method.smoothing")?.unwrap_or(1.0 / (2.0 * window as f64)),
        meta_rate,
    })
}

fn parse_method(e: &mut Entries) -> Result<MethodConfig> {
    let name: String = e.require("method.name")?;
    Ok(match name.as_str() {
        "scp" => MethodConfig::Scp,
        "nexcp" => MethodConfig::NexCp { decay: e.take("method.decay")? },
        "aci" => MethodConfig::Aci {
            eta: e.take("method.eta")?,
            initial: e.take("method.initial")?.unwrap_or(0.0),
        },
        "sf-ogd" => MethodConfig::SfOgd {
            eta: e.take("method.eta")?,
            initial: e.take("method.initial")?.unwrap_or(0.0),
        },
        "faci" => MethodConfig::Faci(parse_faci(e)?),
        "faci-s" => MethodConfig::FaciS {
            config: parse_faci(e)?,
            initial: e.take("method.initial")?.unwrap_or(0.0),
        },
        "saocp" => MethodConfig::Saocp {
            g: e.take("method.g")?.unwrap_or(saocp_core::saocp::DEFAULT_MULTIPLIER),
            randomized: e.take("method.randomized")?.unwrap_or(false),
        },
        "trivial" => MethodConfig::Trivial { horizon: e.take("method.horizon")?.unwrap_or(0) },
        other => return Err(Error::config(format!("unknown method `{other}`"))),
    })
}

fn parse_stream(e: &mut Entries) -> Result<StreamSpec> {
    let kind_name: String = e.require("stream.kind")?;
    let kind = match kind_name.as_str() {
        "constant" => StreamKind::Constant { level: e.require("stream.level")? },
        "sudden_shift" => StreamKind::SuddenShift {
            levels: e.require_list("stream.levels")?,
            segment: e.require("stream.segment")?,
        },
        "gradual_shift" => StreamKind::GradualShift {
            start: e.require("stream.start")?,
            end: e.require("stream.end")?,
            stages: e.require("stream.stages")?,
            segment: e.require("stream.segment")?,
        },
        "random_walk" => StreamKind::RandomWalk { start: e.require("stream.start")?, step: e.require("stream.step")? },
        "from_file" => {
            let defaults = RapsParams::TINY_IMAGENET;
            StreamKind::FromFile {
                path: PathBuf::from(e.require::<String>("stream.path")?),
                raps: RapsParams {
                    lambda: e.take("stream.raps_lambda")?.unwrap_or(defaults.lambda),
                    k_reg: e.take("stream.raps_k_reg")?.unwrap_or(defaults.k_reg),
                },
            }
        }
        other => return Err(Error::config(format!("unknown stream kind `{other}`"))),
    };
    let (horizon, noise) = if let StreamKind::FromFile { .. } = kind {
        (0, Noise::None)
    } else {
        let horizon = e.require("stream.horizon")?;
        let noise_name: String = e.take("stream.noise")?.unwrap_or_else(|| "gaussian".to_string());
        let noise = match noise_name.as_str() {
            "none" => Noise::None,
            "gaussian" => Noise::Gaussian { scale: e.take("stream.noise_scale")?.unwrap_or(0.0) },
            "uniform" => Noise::Uniform { scale: e.take("stream.noise_scale")?.unwrap_or(0.0) },
            other => return Err(Error::config(format!("unknown noise `{other}`"))),
        };
        (horizon, noise)
    };
    let bound = match e.take_raw("stream.bound") {
        None => return Err(Error::config("missing required key `stream.bound`")),
        Some((_, v)) if v == "auto" => BoundSpec::Auto { prefix: e.require("stream.bound_prefix")? },
        Some((line, v)) => BoundSpec::Fixed(
            v.parse()
                .map_err(|_| Error::config(format!("line {line}: stream.bound must be a number or `auto`")))?,
        ),
    };
    Ok(StreamSpec { kind, noise, horizon, bound })
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let config = RunConfig {
            alpha: e.require("alpha")?,
            seed: e.take("seed")?.unwrap_or(0),
            windows: e.take_list("windows")?.unwrap_or_else(|| DEFAULT_WINDOWS.to_vec()),
            method: parse_method(&mut e)?,
            stream: parse_stream(&mut e)?,
            output: OutputPaths {
                trace: e.take::<String>("output.trace")?.map_or_else(|| PathBuf::from(DEFAULT_TRACE), PathBuf::from),
                report: e
                    .take::<String>("output.report")?
                    .map_or_else(|| PathBuf::from(DEFAULT_REPORT), PathBuf::from),
            },
        };
        e.finish()?;
        config.validate()?;
        Ok(config)
    }
}
