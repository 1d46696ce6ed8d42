//! Report assembly and serialization.
//!
//! Reports are JSON with doubles printed at 17 significant digits
//! (round-trip exact), so a report is byte-identical across runs given the
//! same configuration and seed. Per-level and per-sample tables can be
//! flattened to CSV instead.

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;
use std::io::{self, Write};

/// One named check with its threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity (residual, eigenvalue, …).
    pub value: f64,
    /// The threshold it was compared against.
    pub tolerance: f64,
}

impl Check {
    pub fn max(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }

    pub fn flag(name: &str, passed: bool, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            passed,
            value,
            tolerance,
        }
    }
}

/// The report envelope every command emits.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    /// Effective inputs, echoed (defaults included).
    pub params: Value,
    pub system: Option<Value>,
    pub warnings: Vec<String>,
    pub results: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, params: Value, system: Option<Value>) -> Self {
        Report {
            command: command.into(),
            params,
            system,
            warnings: Vec::new(),
            results: Value::Null,
            checks: Vec::new(),
            passed: true,
        }
    }

    pub fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }
}

/// A flattened table for `--format csv`.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Fixed-width float for CSV cells and JSON doubles: 17 significant
/// digits, scientific notation.
pub fn fmt_f64(value: f64) -> String {
    if value.is_infinite() {
        if value > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{value:.16e}")
    }
}

struct SigFigFormatter;

impl Formatter for SigFigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }
}

/// Serializes any report value to deterministic JSON bytes.
pub fn to_json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut out, SigFigFormatter);
    value.serialize(&mut serializer)?;
    out.push(b'\n');
    Ok(out)
}

/// Converts a serializable value into a `serde_json::Value` for embedding.
pub fn to_value<T: Serialize>(value: &T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_17_significant_digits() {
        let bytes = to_json_bytes(&serde_json::json!({"x": 1.9375})).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("1.9375000000000000e0"), "{text}");
    }

    #[test]
    fn round_trip_is_exact() {
        let original = 0.1f64 + 0.2f64;
        let bytes = to_json_bytes(&serde_json::json!({ "x": original })).unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(parsed["x"].as_f64().unwrap(), original);
    }
}
