//! `run`, `compare` and `gen`.

use std::fs;
use std::path::Path;

use saocp_core::metrics::{local_series, summarize};
use saocp_core::run::{run, RunOutput};
use saocp_core::MethodConfig;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::report::{reports_to_csv, write_atomic, write_text, write_trace, RunReport};
use crate::rng::{substream, SubStream};
use crate::streams::{generate, write_quantiles_csv, write_radius_csv, Stream};

/// Window of the local coverage and width series written by `compare`.
pub const LOCAL_WINDOW: usize = 100;

#[derive(Debug)]
pub struct RunOutcome {
    pub output: RunOutput,
    pub report: RunReport,
}

pub fn prepare_stream(config: &RunConfig) -> Result<Stream> {
    generate(&config.stream, config.alpha()?, config.seed)
}

/// Run `config`'s learner over an already materialized stream.
pub fn execute_on(config: &RunConfig, stream: &Stream, label: &str) -> Result<RunOutcome> {
    config.validate()?;
    let alpha = config.alpha()?;
    let method = match config.method {
        MethodConfig::Trivial { horizon: 0 } => MethodConfig::Trivial { horizon: stream.len() },
        ref m => m.clone(),
    };
    let sampler = Box::new(substream(config.seed, SubStream::ExpertSampling));
    let mut learner = method.build(alpha, stream.bound, Some(sampler))?;
    let output = run(learner.as_mut(), &stream.observations, alpha, stream.bound)?;
    let metrics = summarize(&output.trace, alpha, &config.windows, output.clip_count)?;
    for k in &metrics.omitted_windows {
        eprintln!("warning: window {k} exceeds the {} steps of the stream; omitted", stream.len());
    }
    let report = RunReport {
        label: label.to_string(),
        stream_hash: stream.hash(),
        bound: stream.bound.get(),
        metrics,
        quantile_variation: stream.quantile_variation().ok(),
    };
    Ok(RunOutcome { output, report })
}

pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let stream = prepare_stream(config)?;
    execute_on(config, &stream, config.method.name())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write the trace, the text report and a one-row CSV report under `dir`.
pub fn write_run(config: &RunConfig, outcome: &RunOutcome, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_trace(&dir.join(&config.output.trace), &outcome.output.trace)?;
    let report = dir.join(&config.output.report);
    write_text(&report, &outcome.report.to_text())?;
    write_text(&report.with_extension("csv"), &reports_to_csv(std::slice::from_ref(&outcome.report)))
}

#[derive(Debug)]
pub struct Comparison {
    pub stream_hash: String,
    pub outcomes: Vec<RunOutcome>,
}

/// Run every config on one shared stream. All configs must agree on the
/// stream spec, seed and miscoverage level.
pub fn compare(configs: &[RunConfig]) -> Result<Comparison> {
    let first = configs.first().ok_or_else(|| Error::config("compare needs at least one config"))?;
    for (i, c) in configs.iter().enumerate().skip(1) {
        if c.stream != first.stream || c.seed != first.seed {
            return Err(Error::config(format!("config {} uses a different stream or seed than config 1", i + 1)));
        }
        if c.alpha != first.alpha {
            return Err(Error::config(format!("config {} uses a different alpha than config 1", i + 1)));
        }
    }
    for c in configs {
        c.validate()?;
    }
    let stream = prepare_stream(first)?;
    let labels = unique_labels(configs);
    let outcomes = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .zip(&labels)
            .map(|(c, label)| {
                let stream = &stream;
                scope.spawn(move || execute_on(c, stream, label))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(Comparison { stream_hash: stream.hash(), outcomes })
}

fn unique_labels(configs: &[RunConfig]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(configs.len());
    for c in configs {
        let base = c.method.name();
        let mut label = base.to_string();
        let mut n = 2;
        while labels.contains(&label) {
            label = format!("{base}-{n}");
            n += 1;
        }
        labels.push(label);
    }
    labels
}

/// `compare.csv` with one row per method, plus `local_<method>.csv` in long
/// format (`method,t,series,value`) for each method.
pub fn write_comparison(cmp: &Comparison, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let reports: Vec<RunReport> = cmp.outcomes.iter().map(|o| o.report.clone()).collect();
    write_text(&dir.join("compare.csv"), &reports_to_csv(&reports))?;
    for o in &cmp.outcomes {
        let trace = &o.output.trace;
        let k = LOCAL_WINDOW.min(trace.len());
        let series = local_series(trace, k)?;
        let label = &o.report.label;
        write_atomic(&dir.join(format!("local_{label}.csv")), |w: &mut dyn std::io::Write| {
            writeln!(w, "method,t,series,value")?;
            for (j, (cov, width)) in series.coverage.iter().zip(&series.width).enumerate() {
                // Each value is stamped with the last step of its window.
                let t = trace[j + k - 1].t;
                writeln!(w, "{label},{t},local_coverage,{cov:?}")?;
                writeln!(w, "{label},{t},local_width,{width:?}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// Materialize the configured stream as `stream.csv` (`t,radius`) and,
/// for synthetic streams, `quantiles.csv`.
pub fn gen(config: &RunConfig, dir: &Path) -> Result<Stream> {
    config.validate()?;
    let stream = prepare_stream(config)?;
    create_dir(dir)?;
    write_radius_csv(&dir.join("stream.csv"), &stream)?;
    write_quantiles_csv(&dir.join("quantiles.csv"), &stream)?;
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(method: &str) -> RunConfig {
        format!(
            "alpha = 0.1\nmethod.name = {method}\nstream.kind = constant\nstream.level = 0.5\n\
             stream.horizon = 10\nstream.noise = none\nstream.bound = 1\nwindows = 5, 50\n"
        )
        .parse()
        .unwrap()
    }

    #[test]
    fn trivial_on_constant_stream() {
        let out = execute(&config("trivial")).unwrap();
        let m = &out.report.metrics;
        assert!(m.coverage_error.abs() < 1e-12);
        assert!((m.regret - 0.9).abs() < 1e-12);
        assert_eq!(m.omitted_windows, vec![50]);
        assert_eq!(out.report.quantile_variation, Some(0.0));
    }

    #[test]
    fn compare_checks_streams() {
        assert!(matches!(compare(&[]), Err(Error::Config(_))));
        let a = config("scp");
        let mut b = config("saocp");
        b.seed = 9;
        assert!(matches!(compare(&[a.clone(), b]), Err(Error::Config(_))));
        let cmp = compare(&[a.clone(), config("saocp"), a]).unwrap();
        let labels: Vec<&str> = cmp.outcomes.iter().map(|o| o.report.label.as_str()).collect();
        assert_eq!(labels, vec!["scp", "saocp", "scp-2"]);
        assert!(cmp.outcomes.iter().all(|o| o.report.stream_hash == cmp.stream_hash));
    }
}
