//! Report emission: the versioned CSV schema and the run log.
//!
//! CSV layout (one row per center × scale):
//!
//! ```text
//! # translab-report v1
//! z0,z1,r,grad_l_norm,bmo_C,density,density_rhs,slack,case_tag
//! ```
//!
//! Parabolic reports insert a `t` column after the center coordinates
//! and append `sup_t_residual,log_bound_ratio`. Missing quantities are
//! empty fields. All floats use a fixed scientific format so identical
//! runs emit byte-identical files.

use std::fmt::Write as _;

use translab_core::regularity::DyadicReport;

pub const CSV_VERSION_LINE: &str = "# translab-report v1";

fn fmt_f(v: f64) -> String {
    format!("{v:.12e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

/// Render per-center dyadic reports as the versioned CSV.
pub fn reports_to_csv(reports: &[DyadicReport], parabolic: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    if parabolic {
        out.push_str(
            "z0,z1,t,r,grad_l_norm,bmo_C,density,density_rhs,slack,case_tag,sup_t_residual,log_bound_ratio\n",
        );
    } else {
        out.push_str("z0,z1,r,grad_l_norm,bmo_C,density,density_rhs,slack,case_tag\n");
    }
    for rep in reports {
        for row in &rep.rows {
            let mut line = String::new();
            for zc in &rep.center {
                let _ = write!(line, "{},", fmt_f(*zc));
            }
            if parabolic {
                let _ = write!(line, "{},", fmt_opt(rep.center_time));
            }
            let _ = write!(
                line,
                "{},{},{},{},{},{},{}",
                fmt_f(row.r),
                fmt_opt(row.grad_l_norm),
                fmt_opt(row.bmo_c),
                fmt_opt(row.density),
                fmt_opt(row.density_rhs),
                fmt_opt(row.slack),
                rep.case.label(),
            );
            if parabolic {
                let _ = write!(line, ",{},{}", fmt_opt(row.sup_t_residual), fmt_opt(row.log_bound_ratio));
            }
            line.push('\n');
            out.push_str(&line);
        }
    }
    out
}

/// Cell-center gradient export: one row per cell with coordinates and
/// the m×n gradient entries.
pub fn gradients_to_csv(field: &translab_core::fem::DiscreteField) -> String {
    let grid = field.grid();
    let n = grid.dim();
    let m = field.components();
    let mut out = String::new();
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    out.push_str("cell");
    for d in 0..n {
        let _ = write!(out, ",x{d}");
    }
    for c in 0..m {
        for d in 0..n {
            let _ = write!(out, ",g{c}{d}");
        }
    }
    out.push('\n');
    for cell in 0..grid.cell_count() {
        let center = grid.cell_center(cell);
        let g = field.gradient_at(cell);
        let _ = write!(out, "{cell}");
        for v in &center {
            let _ = write!(out, ",{}", fmt_f(*v));
        }
        for v in &g {
            let _ = write!(out, ",{}", fmt_f(*v));
        }
        out.push('\n');
    }
    out
}

/// One structured run record plus the effective configuration echo; the
/// whole file is TOML and the `[config]` table re-parses to the run's
/// configuration.
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub problem_hash: String,
    pub cells_per_side: usize,
    pub iterations: usize,
    pub residual: f64,
    pub wall_seconds: f64,
}

pub fn run_log(record: &RunRecord, effective_config: &crate::config::Config) -> String {
    let mut out = String::new();
    out.push_str("[run]\n");
    let _ = writeln!(out, "command = {:?}", record.command);
    let _ = writeln!(out, "problem_hash = {:?}", record.problem_hash);
    let _ = writeln!(out, "cells_per_side = {}", record.cells_per_side);
    let _ = writeln!(out, "iterations = {}", record.iterations);
    let _ = writeln!(out, "residual = {:e}", record.residual);
    let _ = writeln!(out, "wall_seconds = {:.6}", record.wall_seconds);
    out.push('\n');
    out.push_str("[config]\n");
    // indent the echoed config under the [config] table by reprinting
    // its TOML with section headers prefixed
    let echo = effective_config.to_toml();
    for line in echo.lines() {
        if let Some(rest) = line.strip_prefix("[[") {
            let _ = writeln!(out, "[[config.{rest}");
        } else if let Some(rest) = line.strip_prefix('[') {
            let _ = writeln!(out, "[config.{rest}");
        } else {
            let _ = writeln!(out, "{line}");
        }
    }
    out
}

/// Parse the `[config]` table back out of a run log.
pub fn config_from_run_log(text: &str) -> Result<crate::config::Config, crate::CliError> {
    let value: toml::Value = toml::from_str(text)
        .map_err(|e| crate::CliError::validation(format!("run log parse error: {e}")))?;
    let config = value
        .get("config")
        .ok_or_else(|| crate::CliError::validation("run log has no [config] table"))?;
    config
        .clone()
        .try_into()
        .map_err(|e| crate::CliError::validation(format!("run log config invalid: {e}")))
}
