//! CSV and JSON artifacts. Every file records the tool version and the
//! resolved configuration; CSV files also carry a timestamp line.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::TOOL_VERSION;

/// Statistic with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_stat(v: f64) -> String {
    format!("{v:.16e}")
}

/// The two `#` lines that open every CSV file.
pub fn csv_header(config: &Value) -> String {
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# tool_version={TOOL_VERSION} timestamp_unix={ts}\n# config={config}\n")
}

/// Header plus a comma-separated table.
pub fn render_csv(config: &Value, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = csv_header(config);
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// The CSV text without its timestamp line.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# tool_version="))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn write_csv(path: &Path, config: &Value, columns: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    fs::write(path, render_csv(config, columns, rows))
}

/// `{"tool_version", "config", "pass", "report"}`, pretty-printed.
pub fn write_json<T: Serialize>(path: &Path, config: &Value, pass: bool, report: &T) -> io::Result<()> {
    let doc = json!({
        "tool_version": TOOL_VERSION,
        "config": config,
        "pass": pass,
        "report": report,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}
