//! CSV form of a trace.
//!
//! Header `t,x1,x2,x3,x4,u1,u2,w1,w2,rho,dist`, one row per step with
//! shortest round-trip float rendering, and a footer
//! `# outcome=<Outcome> manifest=<hash>`.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Outcome, Trace, TraceRow};

pub const CSV_HEADER: &str = "t,x1,x2,x3,x4,u1,u2,w1,w2,rho,dist";

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace has no rows")]
    Empty,
}

fn err(line: usize, msg: impl Into<String>) -> TraceError {
    TraceError::Parse { line, msg: msg.into() }
}

pub fn to_csv(trace: &Trace, manifest: &str) -> String {
    let mut out = String::with_capacity(trace.rows.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t, r.x[0], r.x[1], r.x[2], r.x[3], r.u[0], r.u[1], r.w[0], r.w[1], r.rho, r.dist
        );
    }
    let _ = writeln!(out, "# outcome={} manifest={}", trace.outcome, manifest);
    out
}

/// Parses a CSV trace, returning it with the manifest hash from the footer.
pub fn from_csv(text: &str) -> Result<(Trace, String), TraceError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        Some(_) => return Err(err(1, format!("expected header {CSV_HEADER:?}"))),
        None => return Err(TraceError::Empty),
    }
    let mut rows = Vec::new();
    let mut footer = None;
    for (k, line) in lines {
        let n = k + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            if footer.is_some() {
                return Err(err(n, "second footer line"));
            }
            let mut outcome = None;
            let mut manifest = String::new();
            for kv in rest.split_whitespace() {
                match kv.split_once('=') {
                    Some(("outcome", v)) => outcome = Some(v.parse::<Outcome>().map_err(|e| err(n, e))?),
                    Some(("manifest", v)) => manifest = v.to_string(),
                    _ => return Err(err(n, format!("unexpected footer field {kv:?}"))),
                }
            }
            footer = Some((outcome.ok_or_else(|| err(n, "footer lacks outcome"))?, manifest));
            continue;
        }
        if footer.is_some() {
            return Err(err(n, "row after footer"));
        }
        let vals: Vec<f64> = t
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(n, format!("bad number: {e}")))?;
        if vals.len() != 11 {
            return Err(err(n, format!("expected 11 fields, found {}", vals.len())));
        }
        if let Some(prev) = rows.last().map(|r: &TraceRow| r.t) {
            if !(vals[0] > prev) {
                return Err(err(n, "time not strictly increasing"));
            }
        }
        rows.push(TraceRow {
            t: vals[0],
            x: [vals[1], vals[2], vals[3], vals[4]],
            u: [vals[5], vals[6]],
            w: [vals[7], vals[8]],
            rho: vals[9],
            dist: vals[10],
        });
    }
    if rows.is_empty() {
        return Err(TraceError::Empty);
    }
    let (outcome, manifest) = footer.ok_or_else(|| err(text.lines().count(), "missing footer"))?;
    Ok((
        Trace {
            rows,
            outcome,
            singular_steps: 0,
        },
        manifest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace() -> Trace {
        Trace {
            rows: vec![
                TraceRow {
                    t: 0.0,
                    x: [0.5, -1.8, 0.5, 1.0],
                    u: [0.015, 1.0 / 3.0],
                    w: [0.0, -0.01],
                    rho: 2.5e-7,
                    dist: 2.8,
                },
                TraceRow {
                    t: 0.1,
                    x: [0.5015, -1.8, 0.5, 0.999],
                    u: [0.0, 0.0],
                    w: [0.0, 0.0],
                    rho: -1.0,
                    dist: 2.799,
                },
            ],
            outcome: Outcome::Timeout,
            singular_steps: 0,
        }
    }

    #[test]
    fn round_trip_is_lossless() {
        let t = trace();
        let text = to_csv(&t, "deadbeef");
        assert!(text.ends_with("# outcome=Timeout manifest=deadbeef\n"));
        let (back, m) = from_csv(&text).unwrap();
        assert_eq!(m, "deadbeef");
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.outcome, t.outcome);
    }

    #[test]
    fn errors_name_lines() {
        assert_eq!(from_csv(""), Err(TraceError::Empty));
        assert_eq!(from_csv(&format!("{CSV_HEADER}\n")), Err(TraceError::Empty));
        let bad = format!("{CSV_HEADER}\n0,1,2\n");
        assert!(matches!(from_csv(&bad), Err(TraceError::Parse { line: 2, .. })));
    }
}
