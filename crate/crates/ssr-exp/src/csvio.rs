//! Sweep CSV input/output. Floats use the shortest round-trip
//! representation; identical seeds give byte-identical files (metadata
//! comment lines carry the only timestamp and are suppressed by
//! `--no-meta`).

use std::fmt::Write as _;
use std::path::Path;

use ssr_core::contraction::SlopeSurface;
use ssr_core::io::fmt_f64;

use crate::error::{Error, Result};
use crate::sweep::{McCheckRow, SweepRow};

pub const SWEEP_HEADER: &str =
    "eps,gamma,alpha,tau,trace_term,variance_term,bias_term,I,floor_flag,error";

fn escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn fmt_term(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        fmt_f64(v)
    }
}

/// Renders sweep rows as CSV. `meta` lines are emitted first, prefixed `# `.
pub fn sweep_csv_string(rows: &[SweepRow], meta: &[String]) -> String {
    let mut out = String::new();
    for m in meta {
        let _ = writeln!(out, "# {m}");
    }
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.eps),
            fmt_f64(r.gamma),
            fmt_f64(r.alpha),
            fmt_f64(r.tau),
            fmt_term(r.trace_term),
            fmt_term(r.variance_term),
            fmt_term(r.bias_term),
            fmt_term(r.total),
            u8::from(r.floor_flag),
            escape(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow], meta: &[String]) -> Result<()> {
    std::fs::write(path, sweep_csv_string(rows, meta)).map_err(|e| Error::io(path, e))
}

fn parse_term(field: &str, line: usize) -> Result<f64> {
    if field.is_empty() {
        return Ok(f64::NAN);
    }
    field.parse().map_err(|_| Error::SweepCsv {
        line,
        detail: format!("cannot parse float {field:?}"),
    })
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed == SWEEP_HEADER {
            continue;
        }
        let fields: Vec<&str> = raw.splitn(10, ',').collect();
        if fields.len() != 10 {
            return Err(Error::SweepCsv {
                line,
                detail: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let error_field = fields[9].trim();
        let error = if error_field.is_empty() {
            None
        } else {
            Some(
                error_field
                    .trim_matches('"')
                    .replace("\"\"", "\"")
                    .to_string(),
            )
        };
        rows.push(SweepRow {
            eps: parse_term(fields[0], line)?,
            gamma: parse_term(fields[1], line)?,
            alpha: parse_term(fields[2], line)?,
            tau: parse_term(fields[3], line)?,
            trace_term: parse_term(fields[4], line)?,
            variance_term: parse_term(fields[5], line)?,
            bias_term: parse_term(fields[6], line)?,
            total: parse_term(fields[7], line)?,
            floor_flag: fields[8].trim() == "1",
            error,
        });
    }
    Ok(rows)
}

pub fn write_mc_check_csv(path: &Path, rows: &[McCheckRow]) -> Result<()> {
    let mut out = String::from("eps,gamma,alpha,exact,mc_mean,mc_stderr,z\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.eps),
            fmt_f64(r.gamma),
            fmt_f64(r.alpha),
            fmt_f64(r.exact),
            fmt_f64(r.mc_mean),
            fmt_f64(r.mc_stderr),
            fmt_f64(r.z),
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Slope surface as a CSV matrix: first row holds the column axis, first
/// column the row axis.
pub fn write_slope_csv(path: &Path, surface: &SlopeSurface) -> Result<()> {
    let mut out = String::new();
    for c in &surface.col_log10 {
        let _ = write!(out, ",{}", fmt_f64(*c));
    }
    out.push('\n');
    for (i, r) in surface.row_log10.iter().enumerate() {
        let _ = write!(out, "{}", fmt_f64(*r));
        for j in 0..surface.col_log10.len() {
            let _ = write!(out, ",{}", fmt_f64(surface.slopes[(i, j)]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
