//! Trace and report serialization.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use saocp_core::{MetricsReport, StepTrace};

use crate::error::{Error, Result};

/// Everything reported for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub label: String,
    pub stream_hash: String,
    pub bound: f64,
    pub metrics: MetricsReport,
    pub quantile_variation: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

impl RunReport {
    /// Flat `key = value` document.
    pub fn to_text(&self) -> String {
        let m = &self.metrics;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("method", self.label.clone());
        put("stream_hash", self.stream_hash.clone());
        put("bound", format!("{:?}", self.bound));
        put("steps", m.steps.to_string());
        put("alpha", format!("{:?}", m.alpha));
        put("coverage", format!("{:?}", m.coverage));
        put("coverage_error", format!("{:?}", m.coverage_error));
        if let Some(e) = m.expected_coverage_error {
            put("expected_coverage_error", format!("{e:?}"));
        }
        put("regret", format!("{:?}", m.regret));
        for (k, v) in &m.lce {
            put(&format!("lce.{k}"), format!("{v:?}"));
        }
        for (k, v) in &m.sa_regret {
            put(&format!("sa_regret.{k}"), format!("{v:?}"));
        }
        put("width_median", format!("{:?}", m.width_median));
        put("path_length", format!("{:?}", m.path_length));
        if let Some(q) = self.quantile_variation {
            put("quantile_variation", format!("{q:?}"));
        }
        put("clip_count", m.clip_count.to_string());
        if !m.omitted_windows.is_empty() {
            let list: Vec<String> = m.omitted_windows.iter().map(ToString::to_string).collect();
            put("omitted_windows", list.join(", "));
        }
        out
    }
}

/// One row per report; window columns cover the union of all windows.
pub fn reports_to_csv(reports: &[RunReport]) -> String {
    let windows: BTreeSet<usize> = reports.iter().flat_map(|r| r.metrics.lce.keys().copied()).collect();
    let mut header = vec![
        "method".to_string(),
        "stream_hash".into(),
        "steps".into(),
        "alpha".into(),
        "coverage".into(),
        "coverage_error".into(),
        "expected_coverage_error".into(),
        "regret".into(),
        "width_median".into(),
        "path_length".into(),
        "quantile_variation".into(),
        "clip_count".into(),
    ];
    for k in &windows {
        header.push(format!("lce_{k}"));
        header.push(format!("sa_regret_{k}"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for r in reports {
        let m = &r.metrics;
        let mut row = vec![
            r.label.clone(),
            r.stream_hash.clone(),
            m.steps.to_string(),
            format!("{:?}", m.alpha),
            format!("{:?}", m.coverage),
            format!("{:?}", m.coverage_error),
            opt(m.expected_coverage_error),
            format!("{:?}", m.regret),
            format!("{:?}", m.width_median),
            format!("{:?}", m.path_length),
            opt(r.quantile_variation),
            m.clip_count.to_string(),
        ];
        for k in &windows {
            row.push(opt(m.lce.get(k).copied()));
            row.push(opt(m.sa_regret.get(k).copied()));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Write through a temporary sibling, then rename into place.
pub(crate) fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

pub const TRACE_HEADER: &str = "t,s_hat,true_radius,err,loss,width,active_experts";

/// Per-step trace. An `expected_err` column is appended when any step
/// carries one.
pub fn write_trace(path: &Path, trace: &[StepTrace]) -> Result<()> {
    let expected = trace.iter().any(|s| s.expected_err.is_some());
    write_atomic(path, |w| {
        write!(w, "{TRACE_HEADER}")?;
        if expected {
            write!(w, ",expected_err")?;
        }
        writeln!(w)?;
        for s in trace {
            let active = s.active_experts.map_or_else(String::new, |n| n.to_string());
            write!(
                w,
                "{},{:?},{:?},{},{:?},{:?},{}",
                s.t,
                s.predicted,
                s.true_radius,
                u8::from(s.err),
                s.loss,
                s.width,
                active
            )?;
            if expected {
                write!(w, ",{}", opt(s.expected_err))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn report(label: &str, windows: &[usize]) -> RunReport {
        RunReport {
            label: label.to_string(),
            stream_hash: "ab".into(),
            bound: 1.0,
            metrics: MetricsReport {
                steps: 10,
                alpha: 0.1,
                coverage: 0.9,
                coverage_error: 0.0,
                expected_coverage_error: None,
                regret: 0.25,
                lce: windows.iter().map(|&k| (k, 0.1)).collect::<BTreeMap<_, _>>(),
                sa_regret: windows.iter().map(|&k| (k, 0.2)).collect::<BTreeMap<_, _>>(),
                width_median: 0.5,
                path_length: 0.0,
                clip_count: 0,
                omitted_windows: vec![],
            },
            quantile_variation: Some(0.0),
        }
    }

    #[test]
    fn text_lists_windowed_fields() {
        let text = report("aci", &[5, 20]).to_text();
        assert!(text.contains("lce.5 = 0.1\n"));
        assert!(text.contains("sa_regret.20 = 0.2\n"));
        assert!(text.starts_with("method = aci\n"));
        assert!(!text.contains("expected_coverage_error"));
    }

    #[test]
    fn csv_columns_cover_union_of_windows() {
        let csv = reports_to_csv(&[report("aci", &[5]), report("scp", &[20])]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].ends_with("lce_5,sa_regret_5,lce_20,sa_regret_20"));
        assert!(lines[1].ends_with(",0.1,0.2,,"));
        assert!(lines[2].ends_with(",,,0.1,0.2"));
        assert_eq!(lines.len(), 3);
    }
}
