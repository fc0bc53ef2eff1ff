//! CSV ingestion. Three header layouts are recognized:
//!
//! | schema         | header                          |
//! |----------------|---------------------------------|
//! | radius         | `t,radius`                      |
//! | regression     | `t,y,yhat` or `t,y,yhat,h`      |
//! | classification | `t,label,p0,p1,...,p{m-1}`      |

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use saocp_core::conformal::{classification_radius, interval_radius, ClassificationPoint, RapsParams, RegressionPoint};
use saocp_core::run::{Payload, RadiusObservation};

use super::{count_out_of_range, resolve_bound, BoundSpec, Stream};
use crate::error::{Error, Result};
use crate::rng::{substream, SubStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Radius,
    Regression { with_horizon: bool },
    Classification { classes: usize },
}

impl Schema {
    fn detect(header: &csv::StringRecord) -> Option<Schema> {
        let cols: Vec<&str> = header.iter().collect();
        match cols.as_slice() {
            ["t", "radius"] => Some(Schema::Radius),
            ["t", "y", "yhat"] => Some(Schema::Regression { with_horizon: false }),
            ["t", "y", "yhat", "h"] => Some(Schema::Regression { with_horizon: true }),
            ["t", "label", probs @ ..] if !probs.is_empty() => probs
                .iter()
                .enumerate()
                .all(|(i, c)| *c == format!("p{i}"))
                .then_some(Schema::Classification { classes: probs.len() }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub schema: Schema,
    pub observations: Vec<RadiusObservation>,
}

impl Ingested {
    pub fn into_stream(self, bound: &BoundSpec) -> Result<Stream> {
        let raw: Vec<f64> = self.observations.iter().map(|o| o.true_radius).collect();
        if raw.is_empty() {
            return Err(Error::config("input file has no data rows"));
        }
        let bound = resolve_bound(bound, &raw)?;
        Ok(Stream {
            out_of_range: count_out_of_range(&raw, bound),
            observations: self.observations,
            known_quantiles: None,
            bound,
        })
    }
}

struct RowReader<'a> {
    source: &'a str,
    line: u64,
    record: &'a csv::StringRecord,
}

impl RowReader<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { path: self.source.to_string(), line: self.line, message: message.into() }
    }

    fn real(&self, index: usize, name: &str) -> Result<f64> {
        let text = &self.record[index];
        let v: f64 = text.parse().map_err(|_| self.error(format!("{name}: cannot parse {text:?} as a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(format!("{name}: non-finite value {text:?}")))
        }
    }

    fn integer<T: std::str::FromStr>(&self, index: usize, name: &str) -> Result<T> {
        let text = &self.record[index];
        text.parse().map_err(|_| self.error(format!("{name}: cannot parse {text:?} as a non-negative integer")))
    }
}

/// Parse CSV from `reader`; `source` names it in error messages. The
/// classification randomization `U_t` is drawn from a sub-stream of `seed`.
pub fn ingest_reader<R: Read>(reader: R, source: &str, raps: RapsParams, seed: u64) -> Result<Ingested> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header_error = |message: String| Error::Parse { path: source.to_string(), line: 1, message };
    let header = csv.headers().map_err(|e| header_error(e.to_string()))?.clone();
    let schema = Schema::detect(&header).ok_or_else(|| {
        header_error(format!(
            "unknown schema {:?}; expected t,radius or t,y,yhat[,h] or t,label,p0,...",
            header.iter().collect::<Vec<_>>().join(",")
        ))
    })?;
    if let Schema::Classification { .. } = schema {
        raps.validate()?;
    }
    let mut u_rng = substream(seed, SubStream::ClassificationU);
    let mut observations = Vec::new();
    let mut last_t: Option<u64> = None;
    let mut record = csv::StringRecord::new();
    loop {
        match csv.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(Error::Parse { path: source.to_string(), line, message: ragged_message(&e) });
            }
        }
        let row = RowReader { source, line: record.position().map_or(0, |p| p.line()), record: &record };
        let t: u64 = row.integer(0, "t")?;
        if last_t.is_some_and(|prev| t <= prev) {
            return Err(row.error(format!("t = {t} is not strictly increasing")));
        }
        last_t = Some(t);
        let obs = match schema {
            Schema::Radius => RadiusObservation::radius(t, row.real(1, "radius")?),
            Schema::Regression { with_horizon } => {
                let y = row.real(1, "y")?;
                let yhat = row.real(2, "yhat")?;
                let point = if with_horizon {
                    RegressionPoint::with_horizon(y, yhat, row.integer(3, "h")?)
                } else {
                    RegressionPoint::new(y, yhat)
                }
                .map_err(|e| row.error(e.to_string()))?;
                RadiusObservation { t, true_radius: interval_radius(&point), payload: Payload::Regression(point) }
            }
            Schema::Classification { classes } => {
                let label: usize = row.integer(1, "label")?;
                let probs = (0..classes)
                    .map(|j| row.real(2 + j, &format!("p{j}")))
                    .collect::<Result<Vec<_>>>()?;
                let u = u_rng.random::<f64>();
                let point = ClassificationPoint::new(probs, label, u, raps).map_err(|e| row.error(e.to_string()))?;
                RadiusObservation {
                    t,
                    true_radius: classification_radius(&point),
                    payload: Payload::Classification(point),
                }
            }
        };
        observations.push(obs);
    }
    Ok(Ingested { schema, observations })
}

fn ragged_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("row has {len} fields, header has {expected_len}")
        }
        _ => e.to_string(),
    }
}

pub fn ingest_csv(path: &Path, raps: RapsParams, seed: u64) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(io::BufReader::new(file), &path.display().to_string(), raps, seed)
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = (u64, f64)>) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "{header}").map_err(io_err)?;
    for (t, v) in rows {
        writeln!(out, "{t},{v}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Write raw radii in the `t,radius` layout.
pub fn write_radius_csv(path: &Path, stream: &Stream) -> Result<()> {
    write_rows(path, "t,radius", stream.observations.iter().map(|o| (o.t, o.true_radius)))
}

/// Write known quantiles as `t,known_quantile`; a no-op for streams without
/// them.
pub fn write_quantiles_csv(path: &Path, stream: &Stream) -> Result<()> {
    match &stream.known_quantiles {
        Some(q) => write_rows(
            path,
            "t,known_quantile",
            stream.observations.iter().zip(q).map(|(o, &q)| (o.t, q)),
        ),
        None => Ok(()),
    }
}
