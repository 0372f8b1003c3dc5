//! Reference dataset directory: `manifest.json` plus one CSV per subject and
//! condition with columns `cycle, percent, <variables…>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchError, BenchmarkDataset};
use crate::gaitdata::percent_axis;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub subject: String,
    pub condition: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub n_points: usize,
    pub subjects: Vec<String>,
    pub conditions: Vec<String>,
    pub variables: Vec<String>,
    pub files: Vec<DatasetFile>,
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Dataset(format!("{}: {e}", path.display()))
}

pub fn load_dataset(dir: &Path) -> Result<(BenchmarkDataset, DatasetManifest), BenchError> {
    if !dir.is_dir() {
        return Err(BenchError::Dataset(format!("reference directory {} not found", dir.display())));
    }
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| data_err(&mpath, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| data_err(&mpath, e))?;
    if manifest.n_points < 2 {
        return Err(data_err(&mpath, "n_points must be at least 2"));
    }
    let mut ds = BenchmarkDataset::new(manifest.n_points);
    for f in &manifest.files {
        if !manifest.subjects.contains(&f.subject) || !manifest.conditions.contains(&f.condition) {
            return Err(data_err(&mpath, format!("file {} names an undeclared subject or condition", f.path)));
        }
        let path = dir.join(&f.path);
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| data_err(&path, e))?;
        let headers = rdr.headers().map_err(|e| data_err(&path, e))?.clone();
        if headers.get(0) != Some("cycle") || headers.get(1) != Some("percent") {
            return Err(data_err(&path, "expected leading columns `cycle,percent`"));
        }
        let vars: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        if let Some(v) = vars.iter().find(|v| !manifest.variables.contains(v)) {
            return Err(data_err(&path, format!("undeclared variable `{v}`")));
        }
        let mut cycles: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| data_err(&path, e))?;
            let parse = |i: usize| -> Result<f64, BenchError> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| data_err(&path, format!("line {}: column {}: {e}", line + 2, i + 1)))
            };
            let cycle = parse(0)? as usize;
            let row: Vec<f64> = (2..headers.len()).map(parse).collect::<Result<_, _>>()?;
            cycles.entry(cycle).or_default().push(row);
        }
        for (c, rows) in cycles {
            if rows.len() != manifest.n_points {
                return Err(data_err(&path, format!("cycle {c} has {} rows, expected {}", rows.len(), manifest.n_points)));
            }
            for (j, v) in vars.iter().enumerate() {
                ds.add_cycle(&f.subject, &f.condition, v, rows.iter().map(|r| r[j]).collect())?;
            }
        }
    }
    Ok((ds, manifest))
}

/// Writes a dataset in the directory layout read by [`load_dataset`].
pub fn save_dataset(ds: &BenchmarkDataset, name: &str, dir: &Path) -> Result<DatasetManifest, BenchError> {
    fs::create_dir_all(dir).map_err(|e| data_err(dir, e))?;
    let axis = percent_axis(ds.n_points);
    let mut files = Vec::new();
    for subject in ds.subjects() {
        for condition in ds.conditions() {
            let vars: Vec<(String, &Vec<Vec<f64>>)> = ds
                .cycles
                .iter()
                .filter(|((s, c, _), _)| *s == subject && *c == condition)
                .map(|((_, _, v), cy)| (v.clone(), cy))
                .collect();
            if vars.is_empty() {
                continue;
            }
            let n_cycles = vars[0].1.len();
            if vars.iter().any(|(_, cy)| cy.len() != n_cycles) {
                return Err(BenchError::Dataset(format!(
                    "{subject}/{condition}: variables have different cycle counts"
                )));
            }
            let rel = format!("{subject}_{condition}.csv");
            let path = dir.join(&rel);
            let mut w = csv::Writer::from_path(&path).map_err(|e| data_err(&path, e))?;
            let mut header = vec!["cycle".to_string(), "percent".to_string()];
            header.extend(vars.iter().map(|(v, _)| v.clone()));
            w.write_record(&header).map_err(|e| data_err(&path, e))?;
            for c in 0..n_cycles {
                for (i, p) in axis.iter().enumerate() {
                    let mut row = vec![c.to_string(), p.to_string()];
                    row.extend(vars.iter().map(|(_, cy)| cy[c][i].to_string()));
                    w.write_record(&row).map_err(|e| data_err(&path, e))?;
                }
            }
            w.flush().map_err(|e| data_err(&path, e))?;
            files.push(DatasetFile {
                subject: subject.clone(),
                condition,
                path: rel,
            });
        }
    }
    let manifest = DatasetManifest {
        name: name.to_string(),
        n_points: ds.n_points,
        subjects: ds.subjects(),
        conditions: ds.conditions(),
        variables: ds.variables(),
        files,
    };
    let mpath = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| data_err(&mpath, e))?;
    fs::write(&mpath, text).map_err(|e| data_err(&mpath, e))?;
    Ok(manifest)
}
