//! The `compare` subcommand: side-by-side per-window metrics of several run
//! reports, plus the prediction averages.

use anyhow::{bail, Context, Result};
use pwidb_core::streaming::ReportRow;
use std::path::{Path, PathBuf};

pub struct LabeledReport {
    pub label: String,
    pub rows: Vec<ReportRow>,
}

pub fn load_report(dir: &Path) -> Result<LabeledReport> {
    let (rows, _) = pwidb_core::ingest::read_reports(dir)
        .with_context(|| format!("reading report from {}", dir.display()))?;
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(LabeledReport { label, rows })
}

/// Reports are comparable when they share the window plan: same window count
/// and identical accumulated test sets.
fn check_same_plan(reports: &[LabeledReport]) -> Result<()> {
    let first = &reports[0];
    for r in &reports[1..] {
        if r.rows.len() != first.rows.len() {
            bail!(
                "mismatched plans: {} has {} windows, {} has {}",
                first.label,
                first.rows.len(),
                r.label,
                r.rows.len()
            );
        }
        for (a, b) in first.rows.iter().zip(&r.rows) {
            if a.test_minority != b.test_minority || a.test_majority != b.test_majority {
                bail!(
                    "mismatched plans: window {} test sets differ between {} and {}",
                    a.window,
                    first.label,
                    r.label
                );
            }
        }
    }
    Ok(())
}

/// Comparison grid: one row per window, AUC columns for every report then F1
/// columns, with a closing prediction-average row.
pub fn comparison_csv(reports: &[LabeledReport]) -> Result<String> {
    if reports.is_empty() {
        bail!("no reports to compare");
    }
    check_same_plan(reports)?;

    let mut header = vec!["window".to_string()];
    for r in reports {
        header.push(format!("{}_AUC", r.label));
    }
    for r in reports {
        header.push(format!("{}_F1", r.label));
    }
    let mut out = header.join(",");
    out.push('\n');

    let windows = reports[0].rows.len();
    for w in 0..windows {
        let mut record = vec![reports[0].rows[w].window.to_string()];
        for r in reports {
            record.push(format!("{:.4}", r.rows[w].auc));
        }
        for r in reports {
            record.push(format!("{:.4}", r.rows[w].f1));
        }
        out.push_str(&record.join(","));
        out.push('\n');
    }

    let mut avg = vec!["prediction_average".to_string()];
    let n = windows.max(1) as f64;
    for r in reports {
        avg.push(format!(
            "{:.4}",
            r.rows.iter().map(|x| x.auc).sum::<f64>() / n
        ));
    }
    for r in reports {
        avg.push(format!(
            "{:.4}",
            r.rows.iter().map(|x| x.f1).sum::<f64>() / n
        ));
    }
    out.push_str(&avg.join(","));
    out.push('\n');
    Ok(out)
}

/// Tidy (x, series, value) rows across all reports.
pub fn comparison_plot_csv(reports: &[LabeledReport]) -> String {
    let mut out = String::from("x,series,value\n");
    for r in reports {
        for row in &r.rows {
            out.push_str(&format!("{},{}_AUC,{}\n", row.window, r.label, row.auc));
            out.push_str(&format!("{},{}_F1,{}\n", row.window, r.label, row.f1));
        }
    }
    out
}

pub fn cmd_compare(dirs: &[PathBuf], out: Option<&Path>) -> Result<u8> {
    let reports: Vec<LabeledReport> = dirs.iter().map(|d| load_report(d)).collect::<Result<_>>()?;
    let csv = comparison_csv(&reports)?;
    match out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            let plot = path.with_extension("plot.csv");
            std::fs::write(&plot, comparison_plot_csv(&reports))
                .with_context(|| format!("writing {}", plot.display()))?;
            println!("comparison written to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(label: &str, aucs: &[f64]) -> LabeledReport {
        LabeledReport {
            label: label.into(),
            rows: aucs
                .iter()
                .enumerate()
                .map(|(i, &auc)| ReportRow {
                    window: i + 1,
                    size: 100,
                    train_minority: 5,
                    train_majority: 95,
                    technique: "unbal".into(),
                    bal_minority: 5,
                    bal_majority: 95,
                    test_minority: 2,
                    test_majority: 8,
                    auc,
                    f1: auc - 0.1,
                })
                .collect(),
        }
    }

    #[test]
    fn grid_layout_and_averages() {
        let a = report("acc", &[0.9, 0.95]);
        let b = report("pwidb", &[0.92, 0.97]);
        let csv = comparison_csv(&[a, b]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "window,acc_AUC,pwidb_AUC,acc_F1,pwidb_F1");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("prediction_average,0.9250,0.9450"));
    }

    #[test]
    fn self_comparison_zero_delta() {
        let a = report("x", &[0.9, 0.95, 0.8]);
        let b = report("x", &[0.9, 0.95, 0.8]);
        let csv = comparison_csv(&[a, b]).unwrap();
        for line in csv.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            assert_eq!(cells[1], cells[2]);
            assert_eq!(cells[3], cells[4]);
        }
    }

    #[test]
    fn mismatched_plans_error() {
        let a = report("a", &[0.9, 0.95]);
        let b = report("b", &[0.9]);
        assert!(comparison_csv(&[a, b]).unwrap_err().to_string().contains("mismatched"));
    }
}
