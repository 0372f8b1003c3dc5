use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{SynergyBasis, SynergyError};

const FORMAT: &str = "synwalk.synergy_basis";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalization {
    pub scheme: String,
    pub row_scales: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// On-disk layout of a synergy basis. `h` is row-major k×m.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFile {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub muscle_names: Vec<String>,
    pub h: Vec<f64>,
    pub normalization: Normalization,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<StoredMatrix>,
}

impl From<&SynergyBasis> for BasisFile {
    fn from(b: &SynergyBasis) -> Self {
        let scheme = if b.row_scales.iter().all(|&s| s == 1.0) {
            "none"
        } else {
            "row_max"
        };
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            k: b.k(),
            muscle_names: b.muscle_names.clone(),
            h: b.h.iter().copied().collect(),
            normalization: Normalization {
                scheme: scheme.to_string(),
                row_scales: b.row_scales.clone(),
            },
            converged: b.converged,
            iterations: b.iterations,
            final_residual: b.final_residual,
            w: (b.w.nrows() > 0).then(|| StoredMatrix {
                rows: b.w.nrows(),
                cols: b.w.ncols(),
                data: b.w.iter().copied().collect(),
            }),
        }
    }
}

impl BasisFile {
    pub fn into_basis(self) -> Result<SynergyBasis, String> {
        if self.format != FORMAT {
            return Err(format!("unexpected format tag `{}`", self.format));
        }
        if self.version != VERSION {
            return Err(format!("unsupported version {}", self.version));
        }
        let m = self.muscle_names.len();
        if self.k == 0 || self.h.len() != self.k * m {
            return Err(format!(
                "declared k={} with {} muscles needs {} weights, found {}",
                self.k,
                m,
                self.k * m,
                self.h.len()
            ));
        }
        if self.normalization.row_scales.len() != self.k {
            return Err("normalization row_scales length differs from k".into());
        }
        let h = Array2::from_shape_vec((self.k, m), self.h).map_err(|e| e.to_string())?;
        let w = match self.w {
            Some(sm) => {
                if sm.cols != self.k {
                    return Err("stored W column count differs from k".into());
                }
                Array2::from_shape_vec((sm.rows, sm.cols), sm.data).map_err(|e| e.to_string())?
            }
            None => Array2::zeros((0, self.k)),
        };
        Ok(SynergyBasis {
            w,
            h,
            muscle_names: self.muscle_names,
            converged: self.converged,
            iterations: self.iterations,
            final_residual: self.final_residual,
            row_scales: self.normalization.row_scales,
        })
    }
}

pub fn save_basis(basis: &SynergyBasis, path: &Path) -> Result<(), SynergyError> {
    let file = BasisFile::from(basis);
    let text = serde_json::to_string_pretty(&file).map_err(|e| SynergyError::File {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| SynergyError::File {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_basis(path: &Path) -> Result<SynergyBasis, SynergyError> {
    let err = |reason: String| SynergyError::File {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let file: BasisFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    let basis = file.into_basis().map_err(err)?;
    basis.validate()?;
    Ok(basis)
}
