//! Text and CSV rendering of experiment reports.
//!
//! CSV layout: a header `x,y_exact,y_pred,abs_error`, one row per test point,
//! then a metrics block of `key,value` lines (`l2_train`, `l2_test`, the
//! optional `wall_time_s`, `experiment`, `model`) followed by one
//! `report_point,x,y_exact,y_pred,abs_error` line per reporting point.
//! Numbers are written in the shortest form that parses back exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::real::Real;

use super::{ExperimentReport, Model, ReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmitOptions {
    /// Include wall-clock time. Off by default so that reports of identical
    /// runs are byte-identical.
    pub timing: bool,
}

pub const CSV_HEADER: &str = "x,y_exact,y_pred,abs_error";

/// Scientific notation with three significant digits and a two-digit
/// exponent, e.g. `4.90e-08`.
pub fn format_error<T: Real>(value: T) -> String {
    if !value.is_finite() {
        return format!("{value}");
    }
    let raw = format!("{:.2e}", value);
    let (mantissa, exponent) = raw.split_once('e').expect("LowerExp output has an exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exponent.abs())
}

pub fn emit_report<T: Real>(report: &ExperimentReport<T>, format: ReportFormat, options: EmitOptions) -> String {
    match format {
        ReportFormat::Table => emit_table(report, options),
        ReportFormat::Csv => emit_csv(report, options),
    }
}

fn emit_table<T: Real>(report: &ExperimentReport<T>, options: EmitOptions) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<6} {:>18} {:>18} {:>10}", "x", "exact value", "predicted value", "error");
    if report.rows.is_empty() && report.report_rows.is_empty() {
        return out;
    }
    for row in &report.report_rows {
        let _ = writeln!(
            out,
            "{:<6.1} {:>18.10} {:>18.10} {:>10}",
            row.x,
            row.y_exact,
            row.y_pred,
            format_error(row.abs_error)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "experiment {} ({})", report.experiment, report.model.label());
    let _ = writeln!(out, "L2 train  {}", format_error(report.l2_train));
    let _ = writeln!(out, "L2 test   {}", format_error(report.l2_test));
    if options.timing {
        if let Some(seconds) = report.wall_time_seconds {
            let _ = writeln!(out, "wall time {seconds:.1} s");
        }
    }
    out
}

fn emit_csv<T: Real>(report: &ExperimentReport<T>, options: EmitOptions) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER}");
    if report.rows.is_empty() && report.report_rows.is_empty() {
        return out;
    }
    let row_line = |out: &mut String, prefix: &str, r: &ReportRow<T>| {
        let _ = writeln!(out, "{prefix}{:e},{:e},{:e},{:e}", r.x, r.y_exact, r.y_pred, r.abs_error);
    };
    for row in &report.rows {
        row_line(&mut out, "", row);
    }
    let _ = writeln!(out, "l2_train,{:e}", report.l2_train);
    let _ = writeln!(out, "l2_test,{:e}", report.l2_test);
    if options.timing {
        if let Some(seconds) = report.wall_time_seconds {
            let _ = writeln!(out, "wall_time_s,{seconds:.3}");
        }
    }
    let _ = writeln!(out, "experiment,{}", report.experiment);
    let _ = writeln!(out, "model,{}", report.model.label());
    for row in &report.report_rows {
        row_line(&mut out, "report_point,", row);
    }
    out
}

/// Reads a CSV report written by [`emit_report`]. The configuration snapshot
/// is not part of the CSV and comes back as `None`.
pub fn parse_csv_report<'a, T: Real>(text: &'a str) -> Result<ExperimentReport<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut report = ExperimentReport {
        experiment: 0,
        model: Model::Ldnn,
        rows: Vec::new(),
        report_rows: Vec::new(),
        l2_train: T::nan(),
        l2_test: T::nan(),
        wall_time_seconds: None,
        config: None,
    };
    for (line, text) in lines {
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        let err = |message: String| Error::Parse { line, message };
        let number = |s: &str| s.trim().parse::<T>().map_err(|e| err(format!("`{s}`: {e}")));
        let row = |f: &[&str]| -> Result<ReportRow<T>> {
            if f.len() != 4 {
                return Err(err(format!("expected 4 values, found {}", f.len())));
            }
            Ok(ReportRow {
                x: number(f[0])?,
                y_exact: number(f[1])?,
                y_pred: number(f[2])?,
                abs_error: number(f[3])?,
            })
        };
        let single = |f: &[&'a str]| -> Result<&'a str> {
            match f {
                [_, value] => Ok(value),
                _ => Err(err(format!("`{}` takes one value", f[0]))),
            }
        };
        match fields[0] {
            "l2_train" => report.l2_train = number(single(&fields)?)?,
            "l2_test" => report.l2_test = number(single(&fields)?)?,
            "wall_time_s" => {
                let v = single(&fields)?;
                report.wall_time_seconds = Some(v.parse().map_err(|e| err(format!("`{v}`: {e}")))?);
            }
            "experiment" => {
                let v = single(&fields)?;
                report.experiment = v.parse().map_err(|e| err(format!("`{v}`: {e}")))?;
            }
            "model" => {
                let v = single(&fields)?;
                report.model = Model::from_label(v).ok_or_else(|| err(format!("unknown model `{v}`")))?;
            }
            "report_point" => report.report_rows.push(row(&fields[1..])?),
            _ => report.rows.push(row(&fields)?),
        }
    }
    Ok(report)
}
