//! Plain-text output helpers shared by every CSV writer.

use std::fmt::Write as _;

/// Formats a float with 17 significant digits so that it parses back exactly.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Builds a CSV document from a header and pre-formatted rows.
pub fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for field in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{field}");
        }
        out.push('\n');
    }
    out
}
