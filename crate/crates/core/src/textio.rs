//! Small helpers for the line-oriented text formats (genomes, controllers,
//! archive checkpoints) and the CSV artifacts.

use std::fmt::Write as _;

/// Format an `f64` with 17 significant digits, enough to round-trip exactly
/// through `str::parse::<f64>()`.
pub fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| !v.is_nan() || s == "NaN")
}

/// One CSV row from display-formatted fields. No quoting: writers must not
/// emit commas inside fields (all our schemas are numeric or bare words).
pub fn csv_row<S: AsRef<str>>(fields: &[S]) -> String {
    let mut out = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        debug_assert!(!f.as_ref().contains(','));
        let _ = write!(out, "{}", f.as_ref());
    }
    out.push('\n');
    out
}

/// Split a CSV line produced by [`csv_row`].
pub fn csv_fields(line: &str) -> Vec<&str> {
    line.trim_end_matches(['\r', '\n']).split(',').collect()
}
