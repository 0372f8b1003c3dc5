//! Deterministic synthetic data: a 40-muscle activation set built from ten
//! temporal primitives, raw gait trials with a matching column schema, and a
//! multi-subject reference dataset over the evaluation condition grid.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::evalbench::BenchmarkDataset;
use crate::gaitdata::{percent_axis, ChannelRole, ColumnSpec, GaitError, TrialSchema};
use crate::muscle::default_leg_muscles;
use crate::synergy::ActivationMatrix;
use crate::trainer::Condition;

/// Lower-limb muscles of one leg in the bundled activation set.
pub const BASIS_MUSCLES: [&str; 40] = [
    "addbrev", "addlong", "addmagdist", "addmagisch", "addmagmid", "addmagprox", "bflh", "bfsh",
    "edl", "ehl", "fdl", "fhl", "gaslat", "gasmed", "glmax1", "glmax2", "glmax3", "glmed1", "glmed2",
    "glmed3", "glmin1", "glmin2", "glmin3", "grac", "iliacus", "perbrev", "perlong", "piri", "psoas",
    "recfem", "sart", "semimem", "semiten", "soleus", "tfl", "tibant", "tibpost", "vasint", "vaslat",
    "vasmed",
];

pub const N_PRIMITIVES: usize = 10;

/// Subjects in the speed conditions of the reference dataset.
pub const SPEED_SUBJECTS: usize = 22;
/// Subjects (the first of the speed cohort) who also walked the slopes.
pub const SLOPE_SUBJECTS: usize = 8;

const G: f64 = 9.81;
const STANCE: f64 = 0.6;

fn bump(p: f64, center: f64, width: f64) -> f64 {
    let d = (p - center + 0.5).rem_euclid(1.0) - 0.5;
    (-0.5 * (d / width).powi(2)).exp()
}

/// Primitive `j` at gait phase `p` in [0, 1): a periodic Gaussian burst.
pub fn primitive(j: usize, p: f64) -> f64 {
    bump(p, (j as f64 + 0.5) / N_PRIMITIVES as f64, 0.045)
}

/// Sparse 10×40 spatial weights: every muscle loads one primary primitive
/// and, for about a third of muscles, a weaker secondary one.
pub fn spatial_weights(seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = Array2::zeros((N_PRIMITIVES, BASIS_MUSCLES.len()));
    for m in 0..BASIS_MUSCLES.len() {
        let primary = m % N_PRIMITIVES;
        h[[primary, m]] = rng.random_range(0.6..1.0);
        if rng.random_bool(0.35) {
            let secondary = (primary + rng.random_range(2..N_PRIMITIVES - 1)) % N_PRIMITIVES;
            h[[secondary, m]] = rng.random_range(0.1..0.4);
        }
    }
    h
}

fn activation_row(h: &Array2<f64>, p: f64, gain: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..N_PRIMITIVES).map(|j| gain * primitive(j, p)).collect();
    (0..h.ncols())
        .map(|m| (0..N_PRIMITIVES).map(|j| w[j] * h[[j, m]]).sum())
        .collect()
}

/// `n_samples` activations over strides of `samples_per_cycle` samples, with
/// additive Gaussian noise of standard deviation `noise`, clamped to [0, 1].
pub fn activation_matrix(n_samples: usize, samples_per_cycle: usize, noise: f64, seed: u64) -> ActivationMatrix {
    let h = spatial_weights(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
    let spc = samples_per_cycle.max(1) as f64;
    let mut data = Array2::zeros((n_samples, BASIS_MUSCLES.len()));
    for t in 0..n_samples {
        let row = activation_row(&h, (t as f64 / spc).fract(), 0.8);
        for (m, v) in row.into_iter().enumerate() {
            let e = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            data[[t, m]] = (v + e).clamp(0.0, 1.0);
        }
    }
    ActivationMatrix::new(data, BASIS_MUSCLES.iter().map(|s| s.to_string()).collect()).expect("valid by construction")
}

/// Per-subject deviations from the template gait.
#[derive(Debug, Clone, Copy)]
pub struct SubjectStyle {
    pub amplitude: f64,
    pub offset: f64,
    pub phase_shift: f64,
    pub mass: f64,
}

impl SubjectStyle {
    pub fn nominal() -> Self {
        Self {
            amplitude: 1.0,
            offset: 0.0,
            phase_shift: 0.0,
            mass: 70.0,
        }
    }

    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        Self {
            amplitude: rng.random_range(0.9..1.1),
            offset: rng.random_range(-3.0..3.0),
            phase_shift: rng.random_range(-0.02..0.02),
            mass: rng.random_range(55.0..90.0),
        }
    }
}

/// Template right-leg gait at phase `p` (0 at heel strike) for a given speed
/// and slope. Angles in degrees (knee hyperextension and ankle dorsiflexion
/// positive), moments in N·m/kg, GRF in body weights.
pub fn template(p: f64, speed: f64, slope_deg: f64, style: &SubjectStyle) -> BTreeMap<&'static str, f64> {
    let p = (p + style.phase_shift).rem_euclid(1.0);
    let a = style.amplitude * (0.6 + 0.45 * speed);
    let s = p / STANCE;
    let stance = p < STANCE;
    let mut out = BTreeMap::new();
    out.insert("hip_angle", 8.0 + 0.8 * slope_deg + style.offset + a * 20.0 * (2.0 * PI * (p - 0.02)).cos());
    out.insert(
        "knee_angle",
        -(4.0 + 0.6 * slope_deg.abs() + a * (12.0 * bump(p, 0.15, 0.06) + 50.0 * bump(p, 0.72, 0.09))) - 0.5 * style.offset,
    );
    out.insert(
        "ankle_angle",
        0.7 * slope_deg + a * (6.0 * (2.0 * PI * (p - 0.1)).sin() - 14.0 * bump(p, 0.62, 0.05)) + 0.5 * style.offset,
    );
    out.insert("lumbar_angle", -4.0 - 0.3 * slope_deg + 2.0 * a * (4.0 * PI * p).cos());
    out.insert(
        "hip_moment",
        a * (0.7 * bump(p, 0.1, 0.06) - 0.8 * bump(p, 0.5, 0.08) + 0.15 * bump(p, 0.85, 0.05)),
    );
    out.insert("knee_moment", a * (-0.6 * bump(p, 0.15, 0.05) + 0.3 * bump(p, 0.45, 0.06) + 0.2 * bump(p, 0.9, 0.04)));
    out.insert("ankle_moment", if stance { -a * (1.4 * bump(p, 0.48, 0.09) + 0.1 * s) } else { 0.0 });
    out.insert("lumbar_moment", a * 0.3 * (2.0 * PI * p).sin() + 0.01 * slope_deg);
    let (vert, ap) = if stance {
        let v = 1.12 * ((PI * s).sin() + 0.25 * (3.0 * PI * s).sin()) * (0.85 + 0.15 * speed);
        (v.max(0.0), -0.2 * a * (2.0 * PI * s).sin() + 0.02 * slope_deg * (PI * s).sin())
    } else {
        (0.0, 0.0)
    };
    out.insert("grf_vertical", vert);
    out.insert("grf_ap", ap);
    out
}

/// Planar activation channels (`act_<muscle>`) derived from the 40-muscle
/// synergy set by averaging each planar muscle's sources.
pub fn planar_activations(p: f64, speed: f64, style: &SubjectStyle, h: &Array2<f64>) -> BTreeMap<String, f64> {
    let p = (p + style.phase_shift).rem_euclid(1.0);
    let row = activation_row(h, p, style.amplitude * (0.5 + 0.35 * speed));
    let col = |n: &str| BASIS_MUSCLES.iter().position(|m| *m == n);
    default_leg_muscles()
        .into_iter()
        .map(|m| {
            let cols: Vec<usize> = m.synergy_sources.iter().filter_map(|s| col(s)).collect();
            let v = cols.iter().map(|&c| row[c]).sum::<f64>() / cols.len().max(1) as f64;
            (format!("act_{}", m.name), v.clamp(0.0, 1.0))
        })
        .collect()
}

/// Reference dataset over the standard condition grid: [`SPEED_SUBJECTS`]
/// subjects on the speed conditions and [`SLOPE_SUBJECTS`] on the slopes,
/// `cycles` strides each with small stride-to-stride noise.
pub fn reference_dataset(n_points: usize, cycles: usize, seed: u64) -> BenchmarkDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = spatial_weights(seed);
    let styles: Vec<SubjectStyle> = (0..SPEED_SUBJECTS).map(|_| SubjectStyle::sample(&mut rng)).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let axis = percent_axis(n_points);
    let mut ds = BenchmarkDataset::new(n_points);
    for cond in Condition::standard_grid() {
        let n_subj = if cond.label.starts_with("slope") { SLOPE_SUBJECTS } else { SPEED_SUBJECTS };
        for (si, style) in styles.iter().take(n_subj).enumerate() {
            let subject = format!("s{:02}", si + 1);
            for _ in 0..cycles {
                let jitter = SubjectStyle {
                    amplitude: style.amplitude * (1.0 + 0.01 * normal.sample(&mut rng)),
                    ..*style
                };
                let mut channels: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for &pct in &axis {
                    let p = pct / 100.0;
                    for (k, v) in template(p, cond.speed, cond.slope_deg, &jitter) {
                        channels.entry(k.to_string()).or_default().push(v);
                    }
                    for (k, v) in planar_activations(p, cond.speed, &jitter, &h) {
                        channels.entry(k).or_default().push(v);
                    }
                }
                for (var, values) in channels {
                    ds.add_cycle(&subject, &cond.label, &var, values).expect("consistent lengths");
                }
            }
        }
    }
    ds
}

/// Settings for [`write_demo_trials`].
#[derive(Debug, Clone, Copy)]
pub struct TrialOptions {
    pub n_trials: usize,
    pub sample_rate: f64,
    pub duration_s: f64,
    pub speed: f64,
    pub noise_deg: f64,
    pub seed: u64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            n_trials: 3,
            sample_rate: 200.0,
            duration_s: 8.0,
            speed: 1.2,
            noise_deg: 0.5,
            seed: 0,
        }
    }
}

pub const SCHEMA_FILE: &str = "schema.json";

/// Column schema matching the CSVs written by [`write_demo_trials`].
pub fn demo_schema(subject_mass: f64) -> TrialSchema {
    let spec = |role, channel: Option<&str>, units: &str| ColumnSpec {
        role,
        channel: channel.map(str::to_string),
        units: units.to_string(),
    };
    let mut columns = BTreeMap::new();
    for j in ["hip", "knee", "ankle", "lumbar"] {
        columns.insert(format!("{j}_angle"), spec(ChannelRole::Kinematics, None, "deg"));
        columns.insert(format!("{j}_moment"), spec(ChannelRole::Kinetics, None, "N*m/kg"));
    }
    columns.insert("fz".into(), spec(ChannelRole::Grf, Some("vertical"), "N"));
    columns.insert("fx".into(), spec(ChannelRole::Grf, Some("ap"), "N"));
    for m in BASIS_MUSCLES {
        columns.insert(m.to_string(), spec(ChannelRole::Activation, None, "1"));
    }
    TrialSchema {
        time_column: "time".into(),
        subject_mass,
        columns,
    }
}

/// Writes `trial_XX.csv` files with raw (noisy) channels in physical units,
/// plus [`SCHEMA_FILE`]. Vertical GRF is in newtons and rests at zero during
/// swing, so heel strikes cross a 15 N threshold once per stride.
pub fn write_demo_trials(dir: &Path, opts: &TrialOptions) -> Result<Vec<PathBuf>, GaitError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| GaitError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h = spatial_weights(opts.seed);
    let style = SubjectStyle {
        mass: 70.0,
        ..SubjectStyle::nominal()
    };
    let schema = demo_schema(style.mass);
    let schema_path = dir.join(SCHEMA_FILE);
    let text = serde_json::to_string_pretty(&schema).map_err(|e| GaitError::Schema(e.to_string()))?;
    fs::write(&schema_path, text).map_err(io_err(&schema_path))?;

    let noise = Normal::new(0.0, opts.noise_deg.max(1e-12)).expect("finite noise");
    let act_noise = Normal::new(0.0, 0.01).expect("finite noise");
    let stride_s = 1.25 / (0.6 + 0.5 * opts.speed);
    let n = (opts.duration_s * opts.sample_rate).round() as usize + 1;
    let names: Vec<String> = schema.columns.keys().cloned().collect();
    let mut paths = Vec::new();
    for trial in 0..opts.n_trials {
        let start_phase: f64 = rng.random_range(0.65..0.95);
        let path = dir.join(format!("trial_{trial:02}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| GaitError::Schema(e.to_string()))?;
        let mut header = vec!["time".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header).map_err(|e| GaitError::Schema(e.to_string()))?;
        for i in 0..n {
            let t = i as f64 / opts.sample_rate;
            let p = (start_phase + t / stride_s).fract();
            let tpl = template(p, opts.speed, 0.0, &style);
            let acts = activation_row(&h, p, 0.5 + 0.35 * opts.speed);
            let mut row = vec![format!("{t:.6}")];
            for name in &names {
                let v = match name.as_str() {
                    "fz" => {
                        let f = tpl["grf_vertical"] * style.mass * G;
                        if f > 0.0 { f + 2.0 * noise.sample(&mut rng) } else { 0.0 }
                    }
                    "fx" => tpl["grf_ap"] * style.mass * G,
                    n if n.ends_with("_angle") => tpl[n] + noise.sample(&mut rng),
                    n if n.ends_with("_moment") => tpl[n] + 0.01 * noise.sample(&mut rng),
                    n => {
                        let m = BASIS_MUSCLES.iter().position(|b| *b == n).expect("schema muscle");
                        (acts[m] + act_noise.sample(&mut rng)).clamp(0.0, 1.0)
                    }
                };
                row.push(v.to_string());
            }
            w.write_record(&row).map_err(|e| GaitError::Schema(e.to_string()))?;
        }
        w.flush().map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}
