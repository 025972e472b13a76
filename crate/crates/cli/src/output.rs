use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use gllab_core::CurvatureReport;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub seed: u64,
    pub timestamp: u64,
}

/// The document every command writes.
#[derive(Debug, Serialize)]
pub struct Envelope {
    pub meta: Meta,
    pub params: Value,
    pub reports: Vec<CurvatureReport>,
    pub pass: bool,
}

impl Envelope {
    pub fn new(seed: u64, params: Value, reports: Vec<CurvatureReport>) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let pass = reports.iter().all(|r| r.pass);
        Self {
            meta: Meta {
                version: env!("CARGO_PKG_VERSION"),
                seed,
                timestamp,
            },
            params,
            reports,
            pass,
        }
    }
}

/// Pretty-printed JSON to `path`, or to stdout when no path is given.
pub fn write_report(env: &Envelope, path: Option<&Path>) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(env).map_err(io::Error::other)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One line per report on stderr.
pub fn summarize(reports: &[CurvatureReport]) {
    for r in reports {
        eprintln!(
            "{:<26} {}  min {:.6e}  bound {:.6e}  margin {:.3e}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.min_value,
            r.bound,
            r.margin
        );
        for c in r.conditions.iter().filter(|c| !c.pass) {
            eprintln!("  condition {} fails (margin {:.3e})", c.name, c.margin);
        }
    }
}
