//! Report CSVs: per-UE errors and uncertainties, per-method CDFs, and the
//! correlation summary.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use posuq_core::eval::{quantile, EvaluationReport};

pub fn report_csv(report: &EvaluationReport, ue_indices: &[usize]) -> String {
    let mut out = String::from("method,ue_index,error_m,uncertainty_m\n");
    for m in &report.per_method {
        for ((ue, err), unc) in ue_indices
            .iter()
            .zip(&m.per_ue_errors)
            .zip(&m.per_ue_uncertainty)
        {
            let _ = writeln!(out, "{},{},{},{}", m.method_tag.as_str(), ue, err, unc);
        }
    }
    out
}

pub fn cdf_csv(cdf: &[(f64, f64)]) -> String {
    let mut out = String::from("error_m,probability\n");
    for (v, p) in cdf {
        let _ = writeln!(out, "{v},{p}");
    }
    out
}

pub fn summary_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("method,correlation,median_error_m,p90_error_m\n");
    for m in &report.per_method {
        let corr = m
            .correlation
            .map(|c| c.to_string())
            .unwrap_or_else(|| "undefined".into());
        let _ = writeln!(
            out,
            "{},{},{},{}",
            m.method_tag.as_str(),
            corr,
            quantile(&m.cdf, 0.5),
            quantile(&m.cdf, 0.9)
        );
    }
    out
}

pub fn write_all(
    report: &EvaluationReport,
    ue_indices: &[usize],
    knn_cdf: &[(f64, f64)],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create report directory {}", dir.display()))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    };
    write("report.csv", report_csv(report, ue_indices))?;
    for m in &report.per_method {
        write(&format!("cdf_{}.csv", m.method_tag.as_str()), cdf_csv(&m.cdf))?;
    }
    // KNN is the CNK baseline, kept alongside the three methods for the
    // positioning-accuracy comparison.
    write("cdf_knn.csv", cdf_csv(knn_cdf))?;
    write("summary.csv", summary_csv(report))?;
    Ok(())
}

/// Human-readable rendering of summary.csv for the `report` subcommand.
pub fn render_summary(summary: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>16} {:>14}",
        "method", "correlation", "median error (m)", "p90 error (m)"
    );
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            continue;
        }
        let fmt = |s: &str| match s.parse::<f64>() {
            Ok(v) => format!("{v:.4}"),
            Err(_) => s.to_string(),
        };
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>16} {:>14}",
            f[0],
            fmt(f[1]),
            fmt(f[2]),
            fmt(f[3])
        );
    }
    out
}
