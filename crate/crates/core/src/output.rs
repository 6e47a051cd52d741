//! CSV helpers shared by the path, quote and hedge writers.

use std::io::Write;

/// Formats `v` in plain decimal with 17 significant digits, falling back to
/// scientific notation for very large or very small magnitudes.
pub fn fmt_sig17(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-5..=16).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, v)
    } else {
        sci
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_sig17).unwrap_or_default()
}

/// Writes `# key = value` lines recording the effective configuration.
pub fn write_header_comment<W: Write>(out: &mut W, entries: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in entries {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}
