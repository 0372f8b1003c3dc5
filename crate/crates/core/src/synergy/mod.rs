//! Muscle synergies: non-negative factorization `M ≈ W·H` of a T×m activation
//! matrix, and expansion of synergy activations through the spatial weights `H`.

mod io;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub use io::{load_basis, save_basis, BasisFile};

#[derive(Debug, Error)]
pub enum SynergyError {
    #[error("activation matrix has a negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("activation matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("synergy count k={k} must satisfy 1 <= k <= min(T, m) = {limit}")]
    KOutOfRange { k: usize, limit: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("reference matrix is all zeros")]
    ZeroMatrix,
    #[error("synergy {0} has no positive weight")]
    DegenerateComponent(usize),
    #[error("basis file {path}: {reason}")]
    File { path: String, reason: String },
}

/// A T×m non-negative matrix of muscle activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    pub data: Array2<f64>,
    pub muscle_names: Vec<String>,
}

impl ActivationMatrix {
    pub fn new(data: Array2<f64>, muscle_names: Vec<String>) -> Result<Self, SynergyError> {
        if muscle_names.len() != data.ncols() {
            return Err(SynergyError::Shape(format!(
                "{} muscle names for {} columns",
                muscle_names.len(),
                data.ncols()
            )));
        }
        for ((row, col), &value) in data.indexed_iter() {
            if !value.is_finite() {
                return Err(SynergyError::NonFinite { row, col });
            }
            if value < 0.0 {
                return Err(SynergyError::NegativeEntry { row, col, value });
            }
        }
        Ok(Self { data, muscle_names })
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn muscles(&self) -> usize {
        self.data.ncols()
    }

    /// Stacks matrices with identical muscle lists along time.
    pub fn concat(parts: &[ActivationMatrix]) -> Result<Self, SynergyError> {
        let first = parts
            .first()
            .ok_or_else(|| SynergyError::Shape("no activation matrices to concatenate".into()))?;
        if parts.iter().any(|p| p.muscle_names != first.muscle_names) {
            return Err(SynergyError::Shape("muscle lists differ between parts".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| SynergyError::Shape(e.to_string()))?;
        Ok(Self {
            data,
            muscle_names: first.muscle_names.clone(),
        })
    }
}

/// Temporal coefficients `w` (T×k) and spatial weights `h` (k×m).
#[derive(Debug, Clone, PartialEq)]
pub struct SynergyBasis {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub muscle_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    /// ‖M − W·H‖_F at the end of the fit.
    pub final_residual: f64,
    /// Per-synergy factor by which each `h` row was divided to bring its
    /// peak weight to 1 (and `w` column multiplied). All ones when unnormalized.
    pub row_scales: Vec<f64>,
}

impl SynergyBasis {
    pub fn k(&self) -> usize {
        self.h.nrows()
    }

    pub fn muscles(&self) -> usize {
        self.h.ncols()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        self.w.dot(&self.h)
    }

    /// Checks the non-negativity and non-degeneracy invariants.
    pub fn validate(&self) -> Result<(), SynergyError> {
        if self.muscle_names.len() != self.h.ncols() {
            return Err(SynergyError::Shape(format!(
                "{} muscle names for H with {} columns",
                self.muscle_names.len(),
                self.h.ncols()
            )));
        }
        if self.w.nrows() > 0 && self.w.ncols() != self.h.nrows() {
            return Err(SynergyError::Shape("W columns differ from H rows".into()));
        }
        for m in [&self.w, &self.h] {
            for ((row, col), &value) in m.indexed_iter() {
                if !value.is_finite() {
                    return Err(SynergyError::NonFinite { row, col });
                }
                if value < 0.0 {
                    return Err(SynergyError::NegativeEntry { row, col, value });
                }
            }
        }
        for (i, row) in self.h.rows().into_iter().enumerate() {
            if !row.iter().any(|&v| v > 0.0) {
                return Err(SynergyError::DegenerateComponent(i));
            }
        }
        Ok(())
    }

    /// Rescales so every `h` row peaks at exactly 1, compensating in `w`.
    pub fn normalize_rows(&mut self) {
        for i in 0..self.h.nrows() {
            let peak = self.h.row(i).iter().copied().fold(0.0, f64::max);
            if peak > 0.0 {
                self.h.row_mut(i).mapv_inplace(|v| v / peak);
                if self.w.nrows() > 0 {
                    self.w.column_mut(i).mapv_inplace(|v| v * peak);
                }
                self.row_scales[i] *= peak;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Relative decrease of the objective below which the fit stops.
    pub tol: f64,
    pub normalize_rows: bool,
}

impl NmfOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 5000,
            tol: 1e-6,
            normalize_rows: true,
        }
    }
}

/// Fit result with the objective ‖M − W·H‖²_F recorded after every iteration
/// (index 0 is the initial value).
#[derive(Debug, Clone)]
pub struct NmfTrace {
    pub basis: SynergyBasis,
    pub objective: Vec<f64>,
}

const DENOM_FLOOR: f64 = 1e-300;

fn frobenius_sq(m: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let wh = w.dot(h);
    m.iter().zip(wh.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Lee–Seung multiplicative updates for the Frobenius objective.
pub fn nmf(m: &ActivationMatrix, opts: &NmfOptions) -> Result<SynergyBasis, SynergyError> {
    nmf_with_trace(m, opts).map(|t| t.basis)
}

pub fn nmf_with_trace(m: &ActivationMatrix, opts: &NmfOptions) -> Result<NmfTrace, SynergyError> {
    let (t, n_mus) = m.data.dim();
    let k = opts.k;
    let limit = t.min(n_mus);
    if k == 0 || k > limit {
        return Err(SynergyError::KOutOfRange { k, limit });
    }
    for ((row, col), &value) in m.data.indexed_iter() {
        if !value.is_finite() {
            return Err(SynergyError::NonFinite { row, col });
        }
        if value < 0.0 {
            return Err(SynergyError::NegativeEntry { row, col, value });
        }
    }

    let data = &m.data;
    let mean = data.mean().unwrap_or(0.0);
    let scale = (mean / k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut draw = |rows: usize, cols: usize| {
        Array2::from_shape_simple_fn((rows, cols), || {
            let g: f64 = StandardNormal.sample(&mut rng);
            // Strictly positive start so no entry is pinned at zero.
            (g.abs() * scale).max(1e-8 * scale.max(1e-12))
        })
    };
    let mut w = draw(t, k);
    let mut h = draw(k, n_mus);

    let mut objective = vec![frobenius_sq(data, &w, &h)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        // H ← H ⊙ (WᵀM) ⊘ (WᵀW H)
        let wt = w.t();
        let numer_h = wt.dot(data);
        let denom_h = wt.dot(&w).dot(&h);
        ndarray::Zip::from(&mut h)
            .and(&numer_h)
            .and(&denom_h)
            .for_each(|x, &a, &b| *x *= a / b.max(DENOM_FLOOR));
        // W ← W ⊙ (M Hᵀ) ⊘ (W H Hᵀ)
        let ht = h.t();
        let numer_w = data.dot(&ht);
        let denom_w = w.dot(&h.dot(&ht));
        ndarray::Zip::from(&mut w)
            .and(&numer_w)
            .and(&denom_w)
            .for_each(|x, &a, &b| *x *= a / b.max(DENOM_FLOOR));

        iterations += 1;
        let prev = *objective.last().unwrap();
        let cur = frobenius_sq(data, &w, &h);
        objective.push(cur);
        if cur == 0.0 || (prev - cur) / prev < opts.tol {
            converged = true;
            break;
        }
    }

    let final_residual = objective.last().unwrap().sqrt();
    let mut basis = SynergyBasis {
        w,
        h,
        muscle_names: m.muscle_names.clone(),
        converged,
        iterations,
        final_residual,
        row_scales: vec![1.0; k],
    };
    if opts.normalize_rows {
        basis.normalize_rows();
    }
    basis.validate()?;
    Ok(NmfTrace { basis, objective })
}

/// Runs one fit per seed (concurrently) and keeps the lowest residual.
pub fn nmf_best_of(
    m: &ActivationMatrix,
    opts: &NmfOptions,
    seeds: &[u64],
) -> Result<SynergyBasis, SynergyError> {
    if seeds.is_empty() {
        return nmf(m, opts);
    }
    let results: Vec<Result<SynergyBasis, SynergyError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let o = NmfOptions { seed, ..*opts };
                scope.spawn(move || nmf(m, &o))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("nmf worker panicked"))
            .collect()
    });
    let mut best: Option<SynergyBasis> = None;
    for r in results {
        let b = r?;
        if best.as_ref().is_none_or(|cur| b.final_residual < cur.final_residual) {
            best = Some(b);
        }
    }
    Ok(best.expect("at least one seed"))
}

/// Variance accounted for: `1 − ‖M − M̂‖²_F / ‖M‖²_F`.
pub fn vaf(m: &Array2<f64>, m_hat: &Array2<f64>) -> Result<f64, SynergyError> {
    if m.dim() != m_hat.dim() {
        return Err(SynergyError::Shape(format!(
            "{:?} vs {:?}",
            m.dim(),
            m_hat.dim()
        )));
    }
    let total: f64 = m.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(SynergyError::ZeroMatrix);
    }
    let resid: f64 = m
        .iter()
        .zip(m_hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(1.0 - resid / total)
}

/// Muscle excitations `clamp(s·H, 0, 1)` for synergy activations `s`.
/// Activations are clamped into [0, 1] before the product.
pub fn expand_synergy(s: &[f64], h: &Array2<f64>) -> Result<Vec<f64>, SynergyError> {
    if s.len() != h.nrows() {
        return Err(SynergyError::Shape(format!(
            "{} synergy activations for a basis with k={}",
            s.len(),
            h.nrows()
        )));
    }
    let mut out = vec![0.0; h.ncols()];
    for (&si, row) in s.iter().zip(h.rows()) {
        let si = si.clamp(0.0, 1.0);
        if si == 0.0 {
            continue;
        }
        for (o, &hij) in out.iter_mut().zip(row.iter()) {
            *o += si * hij;
        }
    }
    for o in &mut out {
        *o = o.clamp(0.0, 1.0);
    }
    Ok(out)
}
