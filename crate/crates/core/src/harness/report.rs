//! CSV and JSON output. Floats are written in Rust's shortest round-trip
//! form, so parsing a file back is bit-exact and identical inputs give
//! identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::config::Format;
use super::run::{Checkpoint, CurvePoint, Experiment, TraceRow, TrialTrace};
use super::AuditReport;
use crate::cover_tree::EventKey;
use crate::error::{Error, Result};
use crate::metric::Point;

const ABSTAIN: &str = "abstain";

pub fn trace_file_name(trial: usize) -> String {
    format!("trace_{trial:04}.csv")
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn trace_header(dim: usize) -> Vec<String> {
    let mut h = vec!["n".to_string()];
    h.extend((0..dim).map(|i| format!("x{i}")));
    for s in [
        "nn_index",
        "nn_distance",
        "predicted",
        "truth",
        "mistake",
        "cum_mistakes",
        "rate",
        "sep_event_keys",
        "indicator_flag",
    ] {
        h.push(s.to_string());
    }
    h
}

/// Writes one trial trace. An empty trace yields the header only.
pub fn write_trace_csv<W: Write>(w: W, trace: &TrialTrace, dim: usize) -> Result<()> {
    let mut out = csv::WriterBuilder::new().from_writer(w);
    out.write_record(trace_header(dim))?;
    for r in &trace.rows {
        if r.instance.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.instance.dim() });
        }
        let mut rec = vec![r.n.to_string()];
        rec.extend(r.instance.iter().map(|v| fmt_f64(*v)));
        rec.push(r.nn_index.map(|i| i.to_string()).unwrap_or_default());
        rec.push(r.nn_distance.map(fmt_f64).unwrap_or_default());
        rec.push(r.predicted.map(|p| p.to_string()).unwrap_or_else(|| ABSTAIN.to_string()));
        rec.push(r.truth.to_string());
        rec.push((r.mistake as u8).to_string());
        rec.push(r.cum_mistakes.to_string());
        rec.push(fmt_f64(r.rate));
        rec.push(r.sep_event_keys.iter().map(EventKey::to_string).collect::<Vec<_>>().join(";"));
        rec.push((r.indicator as u8).to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad {what}: {s:?}")))
}

fn parse_opt<T: std::str::FromStr>(s: &str, what: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse(s, what).map(Some)
    }
}

fn parse_flag(s: &str, what: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse(format!("bad {what}: {s:?}"))),
    }
}

/// Reads a trace written by [`write_trace_csv`].
pub fn read_trace_csv<R: Read>(r: R, trial: usize) -> Result<TrialTrace> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let header = rdr.headers()?.clone();
    let dim = header.len().checked_sub(10).ok_or_else(|| Error::Parse("trace header too short".into()))?;
    if header.iter().collect::<Vec<_>>() != trace_header(dim) {
        return Err(Error::Parse("unexpected trace header".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let coords = (0..dim).map(|i| parse::<f64>(f(1 + i), "coordinate")).collect::<Result<Vec<_>>>()?;
        let k = 1 + dim;
        let keys = if f(k + 7).is_empty() {
            Vec::new()
        } else {
            f(k + 7).split(';').map(|s| s.parse::<EventKey>()).collect::<Result<Vec<_>>>()?
        };
        rows.push(TraceRow {
            n: parse(f(0), "round")?,
            instance: Point(coords),
            nn_index: parse_opt(f(k), "nn_index")?,
            nn_distance: parse_opt(f(k + 1), "nn_distance")?,
            predicted: if f(k + 2) == ABSTAIN { None } else { Some(parse(f(k + 2), "prediction")?) },
            truth: parse(f(k + 3), "label")?,
            mistake: parse_flag(f(k + 4), "mistake flag")?,
            cum_mistakes: parse(f(k + 5), "cumulative mistakes")?,
            rate: parse(f(k + 6), "rate")?,
            sep_event_keys: keys,
            indicator: parse_flag(f(k + 8), "indicator flag")?,
        });
    }
    Ok(TrialTrace { trial, rows })
}

/// Reads every `trace_NNNN.csv` in `dir`, ordered by trial.
pub fn read_traces_dir(dir: &Path) -> Result<Vec<TrialTrace>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if let Some(num) = name.strip_prefix("trace_").and_then(|s| s.strip_suffix(".csv")) {
            if let Ok(t) = num.parse::<usize>() {
                found.push((t, path));
            }
        }
    }
    found.sort();
    found.into_iter().map(|(t, p)| read_trace_csv(fs::File::open(p)?, t)).collect()
}

pub fn write_checkpoints_csv<W: Write>(w: W, traces: &[TrialTrace]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["trial", "n", "mistakes", "rate"])?;
    for t in traces {
        for Checkpoint { n, mistakes, rate } in t.checkpoints() {
            out.write_record([t.trial.to_string(), n.to_string(), mistakes.to_string(), fmt_f64(rate)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(w: W, curve: &[CurvePoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "median_rate", "mean_rate", "min_rate", "max_rate"])?;
    for c in curve {
        out.write_record([
            c.n.to_string(),
            fmt_f64(c.median_rate),
            fmt_f64(c.mean_rate),
            fmt_f64(c.min_rate),
            fmt_f64(c.max_rate),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `reports.json` or `reports.csv` into `dir` and returns the path.
pub fn write_reports(dir: &Path, reports: &[AuditReport], format: Format) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    match format {
        Format::Json => {
            let path = dir.join("reports.json");
            let mut text = serde_json::to_string_pretty(reports)?;
            text.push('\n');
            fs::write(&path, text)?;
            Ok(path)
        }
        Format::Csv => {
            let path = dir.join("reports.csv");
            let mut out = csv::Writer::from_path(&path)?;
            out.write_record(["audit", "pass", "observed", "bound", "slack", "witnesses"])?;
            for r in reports {
                out.write_record([
                    r.audit.clone(),
                    r.pass.to_string(),
                    opt(r.observed),
                    opt(r.bound),
                    opt(r.slack),
                    serde_json::to_string(&r.witnesses)?,
                ])?;
            }
            out.flush()?;
            Ok(path)
        }
    }
}

pub fn parse_reports_json(text: &str) -> Result<Vec<AuditReport>> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_reports_csv(text: &str) -> Result<Vec<AuditReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        out.push(AuditReport {
            audit: f(0).to_string(),
            pass: parse(f(1), "pass flag")?,
            observed: parse_opt(f(2), "observed")?,
            bound: parse_opt(f(3), "bound")?,
            slack: parse_opt(f(4), "slack")?,
            witnesses: serde_json::from_str(f(5))?,
        });
    }
    Ok(out)
}

/// Writes traces, checkpoints, the rate curve, reports, and the resolved
/// config into `dir`.
pub fn emit_experiment(exp: &Experiment, dir: &Path, format: Format) -> Result<()> {
    fs::create_dir_all(dir)?;
    let dim = exp.config.lo.len();
    for t in &exp.traces {
        let f = fs::File::create(dir.join(trace_file_name(t.trial)))?;
        write_trace_csv(std::io::BufWriter::new(f), t, dim)?;
    }
    write_checkpoints_csv(fs::File::create(dir.join("checkpoints.csv"))?, &exp.traces)?;
    write_curve_csv(fs::File::create(dir.join("curve.csv"))?, &exp.curve)?;
    write_reports(dir, &exp.reports, format)?;
    fs::write(dir.join("config.toml"), exp.config.to_toml_string())?;
    Ok(())
}
