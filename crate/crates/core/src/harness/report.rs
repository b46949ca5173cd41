use std::path::Path;

use super::experiment::ExperimentReport;
use crate::error::{Error, Result};

pub const REPORT_JSON: &str = "report.json";
pub const RMSE_RUNS_CSV: &str = "rmse_runs.csv";
pub const BOXPLOT_CSV: &str = "boxplot.csv";

/// Writes `report.json`, `rmse_runs.csv` and `boxplot.csv` into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(REPORT_JSON);
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    let runs_path = dir.join(RMSE_RUNS_CSV);
    let mut w = csv::Writer::from_path(&runs_path).map_err(|e| Error::csv(&runs_path, e))?;
    w.write_record(["method", "seed", "rmse"]).map_err(|e| Error::csv(&runs_path, e))?;
    for s in &report.summary {
        for r in &s.runs {
            w.write_record([s.method.name().to_string(), r.seed.to_string(), r.rmse.to_string()])
                .map_err(|e| Error::csv(&runs_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&runs_path, e))?;

    let box_path = dir.join(BOXPLOT_CSV);
    let mut w = csv::Writer::from_path(&box_path).map_err(|e| Error::csv(&box_path, e))?;
    w.write_record(["method", "min", "q1", "median", "q3", "max"])
        .map_err(|e| Error::csv(&box_path, e))?;
    for s in &report.summary {
        if let Some(b) = s.stats {
            let cells = [b.min, b.q1, b.median, b.q3, b.max].map(|v| v.to_string());
            let mut row = vec![s.method.name().to_string()];
            row.extend(cells);
            w.write_record(&row).map_err(|e| Error::csv(&box_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&box_path, e))
}

pub fn load_report(dir: &Path) -> Result<ExperimentReport> {
    crate::penet::load_json(&dir.join(REPORT_JSON))
}

/// Plain-text table of the medians next to the reference values.
pub fn summary_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    out.push_str(&format!("{:<12} {:>10} {:>8} {:>8} {:>12}\n", "method", "median", "runs", "failed", "reference"));
    for s in &report.summary {
        out.push_str(&format!(
            "{:<12} {:>10} {:>8} {:>8} {:>12}\n",
            s.method.name(),
            fmt(s.stats.map(|b| b.median)),
            s.runs.len(),
            s.n_failed,
            fmt(report.reference.ablation.get(&s.method).copied()),
        ));
    }
    let st = &report.stage1;
    let r = &report.reference;
    out.push_str(&format!(
        "\nstage 1 medians: SP-NET {} (ref {}), ES-NET Do {} mm (ref {}), T {} mm (ref {}), untuned PE-NET {}\n",
        fmt(st.sp_rmse.map(|b| b.median)),
        r.sp_net_springback,
        fmt(st.es_rmse_do.map(|b| b.median)),
        r.es_net_do,
        fmt(st.es_rmse_t.map(|b| b.median)),
        r.es_net_t,
        fmt(st.untuned_rmse.map(|b| b.median)),
    ));
    out.push_str(&format!(
        "theory baseline: {:.4} over {} samples, {} excluded (ref {})\n",
        report.theory_baseline.rmse,
        report.theory_baseline.n_used,
        report.theory_baseline.excluded.len(),
        r.theory_baseline
    ));
    out.push_str(&format!("reference values: {}\n", r.label));
    if !report.failed_runs.is_empty() {
        out.push_str(&format!("failed runs: {:?}\n", report.failed_runs));
    }
    out
}
