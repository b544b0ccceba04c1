//! Per-iteration trace and its CSV / JSON-lines encodings.
//!
//! Floats are written with 17 significant digits so that a trace read back
//! reproduces the in-memory values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "k,beta,lambda,norm_y_minus_x,norm_z_minus_x,fixed_point_residual,prox_residual,dist_to_oracle,wall_time_s";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub beta: f64,
    pub lambda: f64,
    pub norm_y_minus_x: f64,
    pub norm_z_minus_x: f64,
    pub fixed_point_residual: f64,
    pub prox_residual: f64,
    pub dist_to_oracle: Option<f64>,
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    #[default]
    Csv,
    JsonLines,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

fn csv_float(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v:.16e}");
    } else {
        let _ = write!(out, "{v}");
    }
}

fn json_float(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v:.16e}");
    } else {
        out.push_str("null");
    }
}

fn opt<F: Fn(&mut String, f64)>(out: &mut String, v: Option<f64>, none: &str, f: F) {
    match v {
        Some(v) => f(out, v),
        None => out.push_str(none),
    }
}

impl Trace {
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.records.len() * 200);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.k);
            for v in [
                r.beta,
                r.lambda,
                r.norm_y_minus_x,
                r.norm_z_minus_x,
                r.fixed_point_residual,
                r.prox_residual,
            ] {
                out.push(',');
                csv_float(&mut out, v);
            }
            out.push(',');
            opt(&mut out, r.dist_to_oracle, "", csv_float);
            out.push(',');
            opt(&mut out, r.wall_time_s, "", csv_float);
            out.push('\n');
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 260);
        for r in &self.records {
            let _ = write!(out, "{{\"k\":{}", r.k);
            for (name, v) in [
                ("beta", r.beta),
                ("lambda", r.lambda),
                ("norm_y_minus_x", r.norm_y_minus_x),
                ("norm_z_minus_x", r.norm_z_minus_x),
                ("fixed_point_residual", r.fixed_point_residual),
                ("prox_residual", r.prox_residual),
            ] {
                let _ = write!(out, ",\"{name}\":");
                json_float(&mut out, v);
            }
            out.push_str(",\"dist_to_oracle\":");
            opt(&mut out, r.dist_to_oracle, "null", json_float);
            out.push_str(",\"wall_time_s\":");
            opt(&mut out, r.wall_time_s, "null", json_float);
            out.push_str("}\n");
        }
        out
    }

    pub fn encode(&self, format: TraceFormat) -> String {
        match format {
            TraceFormat::Csv => self.to_csv(),
            TraceFormat::JsonLines => self.to_jsonl(),
        }
    }

    pub fn write(&self, path: &Path, format: TraceFormat) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.encode(format)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    k: usize,
    beta: Option<f64>,
    lambda: Option<f64>,
    norm_y_minus_x: Option<f64>,
    norm_z_minus_x: Option<f64>,
    fixed_point_residual: Option<f64>,
    prox_residual: Option<f64>,
    dist_to_oracle: Option<f64>,
    wall_time_s: Option<f64>,
}

/// Parses a JSON-lines trace. `null` in a required column reads as NaN.
pub fn parse_jsonl(text: &str) -> Result<Trace> {
    let mut trace = Trace::default();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: JsonRecord = serde_json::from_str(line)
            .map_err(|e| Error::Config(format!("trace line {}: {e}", i + 1)))?;
        let f = |v: Option<f64>| v.unwrap_or(f64::NAN);
        trace.push(TraceRecord {
            k: r.k,
            beta: f(r.beta),
            lambda: f(r.lambda),
            norm_y_minus_x: f(r.norm_y_minus_x),
            norm_z_minus_x: f(r.norm_z_minus_x),
            fixed_point_residual: f(r.fixed_point_residual),
            prox_residual: f(r.prox_residual),
            dist_to_oracle: r.dist_to_oracle,
            wall_time_s: r.wall_time_s,
        });
    }
    Ok(trace)
}

/// Parses a CSV trace written by [`Trace::to_csv`].
pub fn parse_csv(text: &str) -> Result<Trace> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "unexpected trace header {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let bad = |i: usize, what: &str| Error::Config(format!("trace row {}: {what}", i + 2));
    let mut trace = Trace::default();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(bad(i, "expected 9 columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i, &format!("bad number {s:?}")));
        let optional = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        trace.push(TraceRecord {
            k: cols[0].parse().map_err(|_| bad(i, "bad k"))?,
            beta: num(cols[1])?,
            lambda: num(cols[2])?,
            norm_y_minus_x: num(cols[3])?,
            norm_z_minus_x: num(cols[4])?,
            fixed_point_residual: num(cols[5])?,
            prox_residual: num(cols[6])?,
            dist_to_oracle: optional(cols[7])?,
            wall_time_s: optional(cols[8])?,
        });
    }
    Ok(trace)
}

pub fn read_trace(path: &Path, format: TraceFormat) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        TraceFormat::Csv => parse_csv(&text),
        TraceFormat::JsonLines => parse_jsonl(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let mut t = Trace::default();
        t.push(TraceRecord {
            k: 0,
            beta: 1.0,
            lambda: 0.1 + 0.2,
            norm_y_minus_x: 1.0 / 3.0,
            norm_z_minus_x: std::f64::consts::PI,
            fixed_point_residual: 0.0,
            prox_residual: 5e-324,
            dist_to_oracle: Some(1e300),
            wall_time_s: None,
        });
        t.push(TraceRecord {
            k: 7,
            beta: 0.125,
            lambda: 1.0,
            norm_y_minus_x: 2.0f64.sqrt(),
            norm_z_minus_x: 1e-17,
            fixed_point_residual: 3.5,
            prox_residual: 0.1,
            dist_to_oracle: None,
            wall_time_s: Some(0.25),
        });
        t
    }

    #[test]
    fn csv_header_and_empty_fields() {
        let csv = sample().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert!(lines.next().unwrap().ends_with(','));
        assert!(lines.next().unwrap().contains(",,"));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let t = sample();
        assert_eq!(parse_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let t = sample();
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"wall_time_s\":null"));
        assert_eq!(parse_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(parse_csv("k,beta\n0,1\n").is_err());
    }
}
