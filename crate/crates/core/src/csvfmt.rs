//! Small helpers for the plot-ready CSV outputs.

use std::fmt::Write as _;

/// Formats an optional float; absent values become an empty field.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Shortest round-trip representation, so output is stable byte-for-byte.
pub(crate) fn num(v: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{v}");
    s
}

/// Quotes a field only when it needs quoting.
pub(crate) fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
