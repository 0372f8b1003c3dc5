mod error;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use ndarray::Array2;
use serde::Serialize;

use synwalk_core::env::controller::ControllerMode;
use synwalk_core::env::model::ModelConfig;
use synwalk_core::evalbench::{
    build_report, emit_report, load_dataset, save_dataset, sim_mean_cycles, Numerator, PhaseBoundaries,
    ReportFormat, SimCycles,
};
use synwalk_core::gaitdata::{
    detect_heel_strikes, load_trial, segment_cycles, time_normalize, write_cycles_csv, GrfAxis, TrialSchema,
};
use synwalk_core::synergy::{load_basis, nmf_best_of, save_basis, vaf, ActivationMatrix, NmfOptions};
use synwalk_core::synth;
use synwalk_core::trainer::{
    evaluate_policy, thread_count, train, train_seeds, Checkpoint, Condition, EnvSetup, EvalOptions, Profile,
    TrainConfig, TrainRun,
};

use error::CliError;
use manifest::{hash_inputs, hash_tree, unix_now, RunManifest};

const ENV_HELP: &str = "\
Environment:
  SYNWALK_THREADS  worker threads for multi-seed training and NMF restarts
                   (default: available cores)
  RUST_LOG         log filter, e.g. info or synwalk_core=debug

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Every subcommand writes run_manifest.json into its --out directory.";

#[derive(Parser)]
#[command(name = "synwalk", version, about = "Synergy-constrained walking: data, synergies, training, evaluation")]
#[command(after_help = ENV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the bundled synthetic trials, activation set and reference dataset.
    DemoData(DemoArgs),
    /// Filter, detect heel strikes, segment and time-normalize raw trials.
    Preprocess(PreprocessArgs),
    /// Extract a synergy basis by NMF from activation matrices.
    Synergy(SynergyArgs),
    /// Train soft actor-critic policies.
    Train(TrainArgs),
    /// Roll out a checkpoint over the condition grid and benchmark it.
    Evaluate(EvaluateArgs),
    /// Recompute the hashes listed in a run manifest.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of raw trials.
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Rows of the 40-muscle activation set.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Strides per subject and condition in the reference dataset.
    #[arg(long, default_value_t = 3)]
    reference_cycles: usize,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory of raw trial CSVs.
    #[arg(long)]
    input: PathBuf,
    /// Column schema (JSON). Defaults to `schema.json` inside --input.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Low-pass cutoff in Hz.
    #[arg(long, default_value_t = 6.0)]
    cutoff: f64,
    /// Butterworth order of the zero-phase filter.
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Heel-strike threshold on the vertical GRF, in the trial's GRF units.
    #[arg(long, default_value_t = 15.0)]
    threshold: f64,
    #[arg(long, default_value_t = 101)]
    points: usize,
}

#[derive(Args)]
struct SynergyArgs {
    /// Activation CSV files or directories of them (header = muscle names).
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent restarts; the lowest residual is kept.
    #[arg(long, default_value_t = 1)]
    restarts: u64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

fn mode_parser() -> impl TypedValueParser<Value = ControllerMode> {
    PossibleValuesParser::new(["synergy", "independent"]).map(|s| s.parse::<ControllerMode>().expect("listed value"))
}

fn profile_parser() -> impl TypedValueParser<Value = Profile> {
    PossibleValuesParser::new(["desk", "paper"]).map(|s| s.parse::<Profile>().expect("listed value"))
}

#[derive(Args)]
struct TrainArgs {
    /// TOML file overriding fields of the selected profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = profile_parser(), default_value = "desk")]
    profile: Profile,
    #[arg(long, value_parser = mode_parser())]
    mode: Option<ControllerMode>,
    /// Seeds to train; defaults to the profile's seed list.
    #[arg(long, num_args = 1..)]
    seed: Vec<u64>,
    /// Synergy basis JSON (required in synergy mode).
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Override the total environment steps.
    #[arg(long)]
    steps: Option<u64>,
    /// Continue from a checkpoint (single seed only).
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Synergy basis JSON (required for synergy-mode checkpoints).
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Reference dataset directory.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    rollouts: usize,
    #[arg(long, default_value_t = 10)]
    strides: usize,
    /// Condition labels to run (default: the full grid).
    #[arg(long, num_args = 1..)]
    conditions: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
    format: Vec<ReportFormat>,
    #[arg(long, value_parser = PossibleValuesParser::new(["per-subject", "grand-mean"]), default_value = "per-subject")]
    numerator: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// run_manifest.json to check against the files beside it.
    #[arg(long)]
    manifest: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let started = unix_now();
    let result = match &cli.command {
        Command::DemoData(a) => demo_data(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Synergy(a) => synergy(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Verify(a) => verify(a).map(|_| None),
    }
    .and_then(|run| match run {
        Some(mut m) => {
            m.args = args;
            m.started_unix = started;
            m.finished_unix = unix_now();
            m.artifacts = hash_tree(Path::new(&m.output_dir))?;
            m.write(Path::new(&m.output_dir)).map(|_| ())
        }
        None => Ok(()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn manifest(command: &str, out: &Path, configs: &[&Path], inputs: &[PathBuf], seeds: Vec<u64>) -> Result<RunManifest, CliError> {
    Ok(RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        args: Vec::new(),
        config_paths: configs.iter().map(|p| p.display().to_string()).collect(),
        inputs: hash_inputs(inputs)?,
        seeds,
        output_dir: out.display().to_string(),
        started_unix: 0,
        finished_unix: 0,
        artifacts: Vec::new(),
    })
}

fn create_dir(p: &Path) -> Result<(), CliError> {
    fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    v.sort();
    Ok(v)
}

fn write_activation_csv(m: &ActivationMatrix, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(&m.muscle_names).map_err(|e| CliError::io(path, e))?;
    for row in m.data.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_activation_csv(path: &Path) -> Result<ActivationMatrix, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let names: Vec<String> = r.headers().map_err(|e| CliError::io(path, e))?.iter().map(str::to_string).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| CliError::io(path, format!("line {}, column `{}`: not a number", i + 2, names[j])))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::io(path, "no activation samples"));
    }
    let data = Array2::from_shape_vec((rows, names.len()), values).map_err(|e| CliError::io(path, e))?;
    Ok(ActivationMatrix::new(data, names)?)
}

fn demo_data(a: &DemoArgs) -> Result<Option<RunManifest>, CliError> {
    create_dir(&a.out)?;
    let opts = synth::TrialOptions {
        n_trials: a.trials,
        seed: a.seed,
        ..Default::default()
    };
    synth::write_demo_trials(&a.out.join("trials"), &opts)?;
    let acts = synth::activation_matrix(a.samples, 100, 0.01, a.seed);
    write_activation_csv(&acts, &a.out.join("activations.csv"))?;
    let ds = synth::reference_dataset(101, a.reference_cycles, a.seed);
    save_dataset(&ds, "synthetic_reference", &a.out.join("reference"))?;
    println!(
        "wrote {} trials, a {}x{} activation set and a reference dataset of {} subjects to {}",
        a.trials,
        acts.samples(),
        acts.muscles(),
        ds.subjects().len(),
        a.out.display()
    );
    manifest("demo-data", &a.out, &[], &[], vec![a.seed]).map(Some)
}

#[derive(Serialize)]
struct TrialSummary {
    trial: String,
    samples: usize,
    sample_rate: f64,
    heel_strikes: Vec<usize>,
    cycles: usize,
}

fn preprocess(a: &PreprocessArgs) -> Result<Option<RunManifest>, CliError> {
    let schema_path = a.schema.clone().unwrap_or_else(|| a.input.join(synth::SCHEMA_FILE));
    if !schema_path.is_file() {
        return Err(CliError::Usage(format!(
            "schema {} not found; pass --schema",
            schema_path.display()
        )));
    }
    if !a.input.is_dir() {
        return Err(CliError::Usage(format!("input directory {} not found", a.input.display())));
    }
    let schema = TrialSchema::from_json_file(&schema_path)?;
    let trials = csv_files(&a.input)?;
    if trials.is_empty() {
        return Err(CliError::Data(format!("no trial CSVs in {}", a.input.display())));
    }
    let (cycles_dir, acts_dir) = (a.out.join("cycles"), a.out.join("activations"));
    create_dir(&cycles_dir)?;
    create_dir(&acts_dir)?;
    let mut summary = Vec::new();
    for path in &trials {
        let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let trial = load_trial(path, &schema)?.filtered(a.cutoff, a.order)?;
        let vgrf = trial
            .grf
            .get(&GrfAxis::Vertical)
            .ok_or_else(|| CliError::Data(format!("{}: no vertical GRF channel", path.display())))?;
        let strikes = detect_heel_strikes(vgrf, a.threshold);
        let cycles = segment_cycles(&trial, &strikes)?
            .iter()
            .map(|c| time_normalize(c, a.points))
            .collect::<Result<Vec<_>, _>>()?;
        write_cycles_csv(&cycles, &cycles_dir.join(format!("{stem}.csv")))?;
        if let Some(m) = &trial.activations {
            write_activation_csv(m, &acts_dir.join(format!("{stem}.csv")))?;
        }
        info!("{stem}: {} heel strikes, {} cycles", strikes.len(), cycles.len());
        summary.push(TrialSummary {
            trial: stem,
            samples: trial.len(),
            sample_rate: trial.sample_rate,
            cycles: cycles.len(),
            heel_strikes: strikes,
        });
    }
    write_json(&a.out.join("preprocess_summary.json"), &summary)?;
    let n: usize = summary.iter().map(|s| s.cycles).sum();
    println!("{} trials, {n} cycles written to {}", summary.len(), cycles_dir.display());
    manifest("preprocess", &a.out, &[&schema_path], &trials, Vec::new()).map(Some)
}

#[derive(Serialize)]
struct SynergySummary {
    k: usize,
    muscles: usize,
    samples: usize,
    final_residual: f64,
    vaf: f64,
    iterations: usize,
    converged: bool,
}

fn synergy(a: &SynergyArgs) -> Result<Option<RunManifest>, CliError> {
    let mut files = Vec::new();
    for p in &a.input {
        if p.is_dir() {
            files.extend(csv_files(p)?);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(CliError::Data(format!("{} not found", p.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::Data("no activation CSVs found".into()));
    }
    let parts = files.iter().map(|f| read_activation_csv(f)).collect::<Result<Vec<_>, _>>()?;
    let m = ActivationMatrix::concat(&parts)?;
    let opts = NmfOptions {
        max_iter: a.max_iter,
        tol: a.tol,
        ..NmfOptions::new(a.k, a.seed)
    };
    let seeds: Vec<u64> = (0..a.restarts.max(1)).map(|i| a.seed + i).collect();
    let basis = nmf_best_of(&m, &opts, &seeds)?;
    let v = vaf(&m.data, &basis.reconstruct())?;
    if !v.is_finite() {
        return Err(CliError::Numerical("VAF is not finite".into()));
    }
    create_dir(&a.out)?;
    save_basis(&basis, &a.out.join("basis.json"))?;
    let summary = SynergySummary {
        k: basis.k(),
        muscles: basis.muscles(),
        samples: m.samples(),
        final_residual: basis.final_residual,
        vaf: v,
        iterations: basis.iterations,
        converged: basis.converged,
    };
    write_json(&a.out.join("synergy_summary.json"), &summary)?;
    println!(
        "k={} over {} muscles and {} samples: residual {:.6}, VAF {:.4}, {} iterations{}",
        summary.k,
        summary.muscles,
        summary.samples,
        summary.final_residual,
        summary.vaf,
        summary.iterations,
        if summary.converged { "" } else { " (not converged)" }
    );
    manifest("synergy", &a.out, &[], &files, seeds).map(Some)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn resolve_config(a: &TrainArgs) -> Result<TrainConfig, CliError> {
    let base = TrainConfig::for_profile(a.profile);
    let mut cfg = match &a.config {
        None => base,
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let over: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let mut table = toml::Table::try_from(&base).map_err(|e| CliError::Usage(e.to_string()))?;
            merge(&mut table, over);
            table
                .try_into()
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
    };
    if let Some(m) = a.mode {
        cfg.controller_mode = m;
    }
    if !a.seed.is_empty() {
        cfg.seeds = a.seed.clone();
    }
    if let Some(s) = a.steps {
        cfg.total_steps = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn env_setup(mode: ControllerMode, basis: Option<&Path>) -> Result<EnvSetup, CliError> {
    let model = ModelConfig::default();
    match mode {
        ControllerMode::Independent => Ok(EnvSetup::independent(model)),
        ControllerMode::Synergy => {
            let p = basis.ok_or_else(|| CliError::Usage("synergy mode requires --basis".into()))?;
            let b = load_basis(p)?;
            Ok(EnvSetup::synergy(model, &b)?)
        }
    }
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    final_step: u64,
    episodes: usize,
    first_decile_return: Option<f64>,
    final_decile_return: Option<f64>,
    best_eval_return: Option<f64>,
    diverged_episodes: usize,
}

fn summarize(run: &TrainRun, start: u64, total: u64) -> SeedSummary {
    let (first, last) = run.decile_means(start, total);
    SeedSummary {
        seed: run.seed,
        final_step: run.last.step,
        episodes: run.episodes.len(),
        first_decile_return: first,
        final_decile_return: last,
        best_eval_return: run.best.eval_return,
        diverged_episodes: run.diverged_episodes,
    }
}

fn train_cmd(a: &TrainArgs) -> Result<Option<RunManifest>, CliError> {
    let cfg = resolve_config(a)?;
    let setup = env_setup(cfg.controller_mode, a.basis.as_deref())?;
    create_dir(&a.out)?;
    let cfg_path = a.out.join("config.toml");
    let text = toml::to_string(&cfg).map_err(|e| CliError::io(&cfg_path, e))?;
    fs::write(&cfg_path, text).map_err(|e| CliError::io(&cfg_path, e))?;

    let mut inputs: Vec<PathBuf> = a.basis.iter().cloned().collect();
    let summaries = match &a.resume {
        Some(ck_path) => {
            if cfg.seeds.len() != 1 {
                return Err(CliError::Usage("--resume trains exactly one seed; pass --seed".into()));
            }
            let ck = Checkpoint::load(ck_path)?;
            if ck.mode != cfg.controller_mode {
                return Err(CliError::Usage(format!(
                    "checkpoint was trained in {} mode, not {}",
                    ck.mode, cfg.controller_mode
                )));
            }
            let start = ck.step;
            inputs.push(ck_path.clone());
            let seed = cfg.seeds[0];
            let run = train(&cfg, &setup, seed, Some(&a.out.join(format!("seed_{seed}"))), Some(ck))?;
            vec![summarize(&run, start, cfg.total_steps)]
        }
        None => {
            let threads = thread_count();
            info!("training {} seed(s) on {threads} thread(s)", cfg.seeds.len());
            let mut out = Vec::new();
            for r in train_seeds(&cfg, &setup, Some(&a.out), threads) {
                out.push(summarize(&r?, 0, cfg.total_steps));
            }
            out
        }
    };
    for s in &summaries {
        println!(
            "seed {}: step {}, {} episodes, first-decile return {}, final-decile return {}",
            s.seed,
            s.final_step,
            s.episodes,
            fmt_opt(s.first_decile_return),
            fmt_opt(s.final_decile_return)
        );
    }
    write_json(&a.out.join("training_summary.json"), &summaries)?;
    let configs: Vec<&Path> = a.config.iter().map(PathBuf::as_path).collect();
    manifest("train", &a.out, &configs, &inputs, cfg.seeds.clone()).map(Some)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.2}"))
}

#[derive(Serialize)]
struct ConditionSummary {
    condition: String,
    rollouts: usize,
    fallen: usize,
    strides: usize,
    shortfall: usize,
    failed: bool,
}

fn evaluate(a: &EvaluateArgs) -> Result<Option<RunManifest>, CliError> {
    let (mut ds, _) = load_dataset(&a.reference)?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let setup = env_setup(ck.mode, a.basis.as_deref())?;
    let grid = Condition::standard_grid();
    let conditions: Vec<Condition> = if a.conditions.is_empty() {
        grid
    } else {
        a.conditions
            .iter()
            .map(|l| {
                grid.iter()
                    .find(|c| &c.label == l)
                    .cloned()
                    .ok_or_else(|| CliError::Usage(format!("unknown condition `{l}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let opts = EvalOptions {
        n_rollouts: a.rollouts,
        strides_per_rollout: a.strides,
        n_points: ds.n_points,
        seed: a.seed,
        ..EvalOptions::default()
    };
    let rollouts = evaluate_policy(&ck, &setup, &conditions, &opts)?;

    create_dir(&a.out)?;
    let strides_dir = a.out.join("strides");
    create_dir(&strides_dir)?;
    let variables = ds.variables();
    let mut sim: SimCycles = BTreeMap::new();
    let mut summary = Vec::new();
    for r in &rollouts.results {
        let label = &r.condition.label;
        if !r.strides.is_empty() {
            write_cycles_csv(&r.strides, &strides_dir.join(format!("{label}.csv")))?;
        }
        let means = if r.failed { BTreeMap::new() } else { sim_mean_cycles(&r.strides) };
        for v in &variables {
            sim.insert((label.clone(), v.clone()), means.get(v).cloned());
        }
        summary.push(ConditionSummary {
            condition: label.clone(),
            rollouts: r.rollouts.len(),
            fallen: r.fallen,
            strides: r.strides.len(),
            shortfall: r.shortfall,
            failed: r.failed,
        });
    }
    write_json(&a.out.join("rollout_summary.json"), &summary)?;
    let failed = rollouts.failed_conditions();
    if !failed.is_empty() {
        warn!("no usable strides for: {}", failed.join(", "));
    }

    ds.normalize_activations();
    let numerator = if a.numerator == "grand-mean" { Numerator::GrandMean } else { Numerator::PerSubject };
    let report = build_report(&sim, &ds, &PhaseBoundaries::default(), numerator)?;
    for f in &a.format {
        let ext = match f {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Svg => "svg",
        };
        emit_report(&report, &a.out.join(format!("report.{ext}")), *f)?;
    }
    println!(
        "{} entries over {} conditions ({} failed)",
        report.entries.len(),
        conditions.len(),
        failed.len()
    );
    for (t, n) in &report.threshold_counts {
        println!("ratios above {t}: {n}");
    }
    let inputs = vec![a.checkpoint.clone(), a.reference.clone()]
        .into_iter()
        .chain(a.basis.iter().cloned())
        .collect::<Vec<_>>();
    manifest("evaluate", &a.out, &[], &inputs, vec![a.seed]).map(Some)
}

fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let m = RunManifest::read(&a.manifest)?;
    let dir = a.manifest.parent().unwrap_or(Path::new("."));
    let bad = m.mismatches(dir)?;
    if bad.is_empty() {
        println!("{} artifacts match", m.artifacts.len());
        Ok(())
    } else {
        Err(CliError::Data(format!("hash mismatch: {}", bad.join(", "))))
    }
}
