//! Deterministic CSV and JSON writers. Floats are formatted with the
//! shortest round-trip representation, columns have a fixed order and rows
//! are emitted in input order, so identical results produce byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::MetricsRow;
use crate::error::Result;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const METRICS_HEADER: &str = "step,loss,energy_distance,neg_entropy,neg_entropy_se,\
expected_log_likelihood,expected_log_likelihood_se,reverse_kl,reverse_kl_se,\
entropy_total,entropy_per_sample,entropy_rate,reverse_kl_joint,bound_rate,rejected";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.loss,
            r.energy_distance,
            fmt_opt(r.neg_entropy),
            fmt_opt(r.neg_entropy_se),
            fmt_opt(r.expected_log_likelihood),
            fmt_opt(r.expected_log_likelihood_se),
            fmt_opt(r.reverse_kl),
            fmt_opt(r.reverse_kl_se),
            fmt_opt(r.entropy_total),
            fmt_opt(r.entropy_per_sample),
            fmt_opt(r.entropy_rate),
            fmt_opt(r.reverse_kl_joint),
            fmt_opt(r.bound_rate),
            r.rejected,
        );
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    fs::write(path, metrics_csv(rows))?;
    Ok(())
}

/// Label columns followed by a fixed-length numeric block.
pub fn matrix_csv(value_header: &[String], rows: &[(Vec<String>, Vec<f64>)]) -> String {
    let mut out = String::new();
    out.push_str(&value_header.join(","));
    out.push('\n');
    for (labels, values) in rows {
        let mut fields: Vec<String> = labels.clone();
        fields.extend(values.iter().map(|v| v.to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(
    path: &Path,
    value_header: &[String],
    rows: &[(Vec<String>, Vec<f64>)],
) -> Result<()> {
    fs::write(path, matrix_csv(value_header, rows))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::Error::InvalidInput(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
