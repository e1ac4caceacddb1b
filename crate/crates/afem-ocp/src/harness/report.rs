//! CSV ledger output and the convergence plot.
//!
//! The CSV schema is fixed:
//! `iter,n_elements,n_dofs,eta_y,eta_p,eta_total,osc_total,marked,err_y,err_p,err_yp,err_u`
//! with empty error fields when no exact solution is available. Floats carry
//! 17 significant digits so that parsing them back is lossless.

use std::path::Path;

use thiserror::Error;

use crate::adapt::AdaptRecord;

pub const CSV_HEADER: &str =
    "iter,n_elements,n_dofs,eta_y,eta_p,eta_total,osc_total,marked,err_y,err_p,err_yp,err_u";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn records_to_csv(records: &[AdaptRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iter,
            r.n_elements,
            r.n_dofs,
            fmt(r.eta_y),
            fmt(r.eta_p),
            fmt(r.eta_total),
            fmt(r.osc_total),
            r.marked_count,
            fmt_opt(r.energy_err_y),
            fmt_opt(r.energy_err_p),
            fmt_opt(r.energy_err_total),
            fmt_opt(r.l2_err_u),
        ));
    }
    out
}

pub fn write_records_csv(records: &[AdaptRecord], path: &Path) -> std::io::Result<()> {
    std::fs::write(path, records_to_csv(records))
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: expected 12 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: {what}: {source}")]
    Number {
        line: usize,
        what: &'static str,
        #[source]
        source: std::num::ParseFloatError,
    },
    #[error("missing header line")]
    MissingHeader,
}

/// Parse a ledger written by [`records_to_csv`]. The refined-element count is
/// not part of the schema and comes back as zero.
pub fn parse_records_csv(text: &str) -> Result<Vec<AdaptRecord>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(CsvError::MissingHeader),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(CsvError::FieldCount { line: i + 1, found: fields.len() });
        }
        let num = |s: &str, what: &'static str| -> Result<f64, CsvError> {
            s.parse::<f64>().map_err(|source| CsvError::Number { line: i + 1, what, source })
        };
        let opt = |s: &str, what: &'static str| -> Result<Option<f64>, CsvError> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, what).map(Some)
            }
        };
        out.push(AdaptRecord {
            iter: num(fields[0], "iter")? as usize,
            n_elements: num(fields[1], "n_elements")? as usize,
            n_dofs: num(fields[2], "n_dofs")? as usize,
            eta_y: num(fields[3], "eta_y")?,
            eta_p: num(fields[4], "eta_p")?,
            eta_total: num(fields[5], "eta_total")?,
            osc_total: num(fields[6], "osc_total")?,
            marked_count: num(fields[7], "marked")? as usize,
            refined_count: 0,
            energy_err_y: opt(fields[8], "err_y")?,
            energy_err_p: opt(fields[9], "err_p")?,
            energy_err_total: opt(fields[10], "err_yp")?,
            l2_err_u: opt(fields[11], "err_u")?,
        });
    }
    Ok(out)
}

/// Build the convergence SVG: estimators (and errors when available) against
/// DOF counts on log-log axes, with a slope -1/2 guide line anchored at the
/// last point of the leading series.
pub fn convergence_plot(records: &[AdaptRecord], has_exact: bool) -> String {
    use super::svg::{Guide, LogLogPlot, Series};

    let pts = |f: &dyn Fn(&AdaptRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        records
            .iter()
            .filter_map(|r| {
                let y = f(r)?;
                (r.n_dofs > 0 && y > 0.0).then_some((r.n_dofs as f64, y))
            })
            .collect()
    };

    let mut series = vec![
        Series { name: "eta_total".into(), color: "#1f77b4", points: pts(&|r| Some(r.eta_total)) },
        Series { name: "eta_y".into(), color: "#17becf", points: pts(&|r| Some(r.eta_y)) },
        Series { name: "eta_p".into(), color: "#9467bd", points: pts(&|r| Some(r.eta_p)) },
    ];
    if has_exact {
        series.push(Series {
            name: "err_yp".into(),
            color: "#d62728",
            points: pts(&|r| r.energy_err_total),
        });
        series.push(Series {
            name: "err_u".into(),
            color: "#2ca02c",
            points: pts(&|r| r.l2_err_u),
        });
    }

    let lead = if has_exact { 3 } else { 0 };
    let guide = series
        .get(lead)
        .and_then(|s| s.points.last().copied())
        .map(|through| Guide { slope: -0.5, through, decades: 1.5 });

    let plot = LogLogPlot {
        title: "convergence history".into(),
        x_label: "degrees of freedom".into(),
        y_label: "estimator / error".into(),
        series: series.into_iter().filter(|s| s.points.len() >= 2).collect(),
        guide,
    };
    plot.render()
}
