use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, MetricEntry, MetricReport, PHASE_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    /// Heatmap of RMSE ratios, rows variable × condition, columns phases.
    Svg,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

const CSV_HEADER: [&str; 8] = [
    "variable",
    "condition",
    "phase",
    "rmse",
    "rmse_ratio",
    "baseline_rmse",
    "pearson_r",
    "n_subjects",
];

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn emit_report(report: &MetricReport, path: &Path, format: ReportFormat) -> Result<(), BenchError> {
    match format {
        ReportFormat::Json => {
            let text = serde_json::to_string_pretty(report).map_err(|e| io_err(path, e))?;
            fs::write(path, text).map_err(|e| io_err(path, e))
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
            w.write_record(CSV_HEADER).map_err(|e| io_err(path, e))?;
            for e in &report.entries {
                w.write_record([
                    e.variable.clone(),
                    e.condition.clone(),
                    e.phase.clone(),
                    opt(e.rmse),
                    opt(e.rmse_ratio),
                    e.baseline_rmse.to_string(),
                    opt(e.pearson_r),
                    e.n_subjects.to_string(),
                ])
                .map_err(|e| io_err(path, e))?;
            }
            w.flush().map_err(|e| io_err(path, e))
        }
        ReportFormat::Svg => fs::write(path, heatmap_svg(report)).map_err(|e| io_err(path, e)),
    }
}

pub fn read_report_json(path: &Path) -> Result<MetricReport, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<MetricEntry>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = r.headers().map_err(|e| io_err(path, e))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(io_err(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let f = |i: usize| -> Result<Option<f64>, BenchError> {
            let s = rec.get(i).unwrap_or("");
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| io_err(path, e))
            }
        };
        out.push(MetricEntry {
            variable: rec[0].to_string(),
            condition: rec[1].to_string(),
            phase: rec[2].to_string(),
            rmse: f(3)?,
            rmse_ratio: f(4)?,
            baseline_rmse: f(5)?.unwrap_or(f64::NAN),
            pearson_r: f(6)?,
            n_subjects: rec[7].parse().map_err(|e| io_err(path, e))?,
        });
    }
    Ok(out)
}

/// White at ratio ≤ 1 to dark red at ratio ≥ 10 (log scale); grey when missing.
fn color(ratio: Option<f64>) -> String {
    match ratio {
        None => "#cccccc".into(),
        Some(r) => {
            let t = (r.max(1.0).log10()).clamp(0.0, 1.0);
            let g = (255.0 * (1.0 - t)) as u8;
            let rr = (255.0 - 100.0 * t) as u8;
            format!("#{rr:02x}{g:02x}{g:02x}")
        }
    }
}

fn heatmap_svg(report: &MetricReport) -> String {
    let mut rows: Vec<(String, String)> = Vec::new();
    for e in &report.entries {
        let key = (e.variable.clone(), e.condition.clone());
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    let (cw, ch, left, top) = (110.0, 18.0, 260.0, 30.0);
    let width = left + cw * PHASE_NAMES.len() as f64 + 10.0;
    let height = top + ch * rows.len() as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for (j, p) in PHASE_NAMES.iter().enumerate() {
        let x = left + cw * (j as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{p}</text>"#, top - 10.0);
    }
    for (i, (var, cond)) in rows.iter().enumerate() {
        let y = top + ch * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{var} / {cond}</text>"#, left - 6.0, y + 13.0);
        for (j, p) in PHASE_NAMES.iter().enumerate() {
            let ratio = report
                .entries
                .iter()
                .find(|e| &e.variable == var && &e.condition == cond && e.phase == *p)
                .and_then(|e| e.rmse_ratio);
            let x = left + cw * j as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{}" stroke="white"/>"#,
                color(ratio)
            );
            let label = ratio.map_or("n/a".to_string(), |r| format!("{r:.2}"));
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, x + cw / 2.0, y + 13.0);
        }
    }
    s.push_str("</svg>\n");
    s
}
