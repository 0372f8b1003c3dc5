//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. `SYNWALK_ACCEPTANCE=1,5,8` runs a subset.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use synwalk_core::env::controller::{Controller, ControllerMode};
use synwalk_core::env::model::ModelConfig;
use synwalk_core::env::{generate_terrain, Env, TerrainSpec};
use synwalk_core::evalbench::{
    cross_human_baseline, pearson_r, phase_partition, rmse_ratio, BenchmarkDataset, MetricReport, Numerator,
    PhaseBoundaries, PHASE_NAMES, THRESHOLDS,
};
use synwalk_core::gaitdata::{
    detect_heel_strikes, percent_axis, segment_cycles, time_normalize, ButterworthLowpass, GaitTrial, TimeSeries,
};
use synwalk_core::reward::{r_ap, r_head, r_ml, r_rom, RewardConfig, RewardParams};
use synwalk_core::synergy::{load_basis, nmf, nmf_with_trace, vaf, ActivationMatrix, NmfOptions};
use synwalk_core::synth;
use synwalk_core::trainer::nn::Mlp;
use synwalk_core::trainer::{
    curriculum_velocity, thread_count, train_seeds, Batch, EnvSetup, Sac, SacParams, TrainConfig,
};
use synwalk_core::trainer::sac::{LOG_STD_MAX, LOG_STD_MIN
};

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn main() {
    let criteria: [(u32, &str, Check); 8] = [
        (1, "reward closed forms", c1_reward),
        (2, "NMF recovery, VAF, monotonicity, determinism", c2_nmf),
        (3, "preprocessing", c3_preprocessing),
        (4, "environment contracts", c4_environment),
        (5, "metrics", c5_metrics),
        (6, "desk-scale learning, both controller modes", c6_learning),
        (7, "gradient sanity", c7_gradients),
        (8, "end-to-end pipeline", c8_pipeline),
    ];
    let only: Option<BTreeSet<u32>> = std::env::var("SYNWALK_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            println!("[SKIP] criterion {id}: {name}");
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {id}: {name} ({secs:.1} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] criterion {id}: {name} ({secs:.1} s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

fn c1_reward() -> Result<String, String> {
    let t = Instant::now();
    let p = RewardParams::default();
    let e006 = (-0.06f64).exp();
    let cases = [
        ("r_ap(|dv|=0.12)", r_ap(1.02, 0.9, &p), e006),
        ("r_ap(|dv|=0.12) below target", r_ap(0.78, 0.9, &p), e006),
        ("r_ml(0.10)", r_ml(0.10, &p), e006),
        ("r_head(sigma)", r_head([0.60, 0.65, 1.40], &p), (-0.18f64).exp()),
        ("r_rom(0,0,-25)", r_rom(0.0, 0.0, -25.0, &p), 5.0),
    ];
    for (name, got, want) in cases {
        ensure((got - want).abs() <= 1e-9, format!("{name} = {got}, expected {want}"))?;
    }
    ensure(r_ap(0.93, 0.9, &p) == 1.0, "plateau r_ap(|dv|=0.03) is not exactly 1")?;
    ensure(r_ap(0.9, 0.9, &p) == 1.0, "r_ap at target is not exactly 1")?;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 1.0, format!("took {secs} s"))?;
    Ok(format!("5 closed forms within 1e-9, plateau exact, {:.3} ms", secs * 1e3))
}

fn names(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("m{j}")).collect()
}

fn c2_nmf() -> Result<String, String> {
    let t = Instant::now();
    // Exact rank 1.
    let w = Array1::from_iter((0..60).map(|i| 0.2 + ((i as f64) * 0.37).sin().abs()));
    let h = Array1::from_iter((0..40).map(|j| 0.1 + (j as f64) / 40.0));
    let m1 = w.view().insert_axis(Axis(1)).dot(&h.view().insert_axis(Axis(0)));
    let a1 = ActivationMatrix::new(m1, names(40)).map_err(|e| e.to_string())?;
    let b1 = nmf(&a1, &NmfOptions { tol: 1e-15, ..NmfOptions::new(1, 0) }).map_err(|e| e.to_string())?;
    ensure(b1.final_residual <= 1e-6, format!("rank-1 residual {}", b1.final_residual))?;

    // 200x40 non-negative product of rank 10.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let wt = Array2::from_shape_fn((200, 10), |_| rng.random::<f64>());
    let ht = Array2::from_shape_fn((10, 40), |_| if rng.random_bool(0.5) { rng.random::<f64>() } else { 0.0 });
    let a = ActivationMatrix::new(wt.dot(&ht), names(40)).map_err(|e| e.to_string())?;
    let opts = NmfOptions::new(10, 7);
    let trace = nmf_with_trace(&a, &opts).map_err(|e| e.to_string())?;
    let v = vaf(&a.data, &trace.basis.reconstruct()).map_err(|e| e.to_string())?;
    ensure(v >= 0.99, format!("VAF {v}"))?;
    ensure(trace.basis.iterations <= 5000, format!("{} iterations", trace.basis.iterations))?;
    for (i, w) in trace.objective.windows(2).enumerate() {
        ensure(w[1] <= w[0] + 1e-10, format!("objective rose at iteration {}: {} -> {}", i + 1, w[0], w[1]))?;
    }
    let again = nmf(&a, &opts).map_err(|e| e.to_string())?;
    ensure(again == trace.basis, "same seed gave a different basis")?;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs} s"))?;
    Ok(format!(
        "rank-1 residual {:.2e}, VAF {v:.5} after {} iterations, monotone, deterministic, {secs:.1} s",
        b1.final_residual, trace.basis.iterations
    ))
}

fn c3_preprocessing() -> Result<String, String> {
    // Per-pass gain at the cutoff, measured on a steady-state sinusoid.
    let (fs, fc) = (1000.0, 6.0);
    let mut worst: f64 = 0.0;
    for order in [2, 4] {
        let f = ButterworthLowpass::new(order, fc, fs).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..20_000).map(|i| (2.0 * PI * fc * i as f64 / fs).sin()).collect();
        let y = f.forward(&x);
        let gain = y[15_000..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rel = (gain - 0.5f64.sqrt()).abs() / 0.5f64.sqrt();
        ensure(rel <= 0.02, format!("order {order}: gain {gain} at cutoff"))?;
        worst = worst.max(rel);
    }

    // Heel strikes on a constructed vertical GRF.
    let strikes = vec![37, 150, 262, 381, 497];
    let mut v = vec![0.0; 600];
    for &s in &strikes {
        for (k, item) in v.iter_mut().skip(s).take(60).enumerate() {
            *item = 14.0 + 10.0 * (k as f64 + 1.0);
        }
        v[s - 1] = 15.0;
    }
    let ts = TimeSeries::new("grf_vertical", "N", 100.0, v).map_err(|e| e.to_string())?;
    let got = detect_heel_strikes(&ts, 15.0);
    ensure(got == strikes, format!("heel strikes {got:?}, expected {strikes:?}"))?;

    // N events give N - 1 cycles, normalization keeps endpoints.
    let values: Vec<f64> = (0..600).map(|i| (i as f64 * 0.05).sin() * 30.0 + i as f64 * 0.01).collect();
    let mut trial = GaitTrial {
        sample_rate: 100.0,
        kinematics: Default::default(),
        kinetics: Default::default(),
        grf: Default::default(),
        activations: None,
        subject_mass: 70.0,
    };
    trial.kinematics.insert(
        "knee_angle".into(),
        TimeSeries::new("knee_angle", "deg", 100.0, values.clone()).map_err(|e| e.to_string())?,
    );
    let cycles = segment_cycles(&trial, &strikes).map_err(|e| e.to_string())?;
    ensure(cycles.len() == strikes.len() - 1, format!("{} cycles from {} events", cycles.len(), strikes.len()))?;
    for c in &cycles {
        let n = time_normalize(c, 101).map_err(|e| e.to_string())?;
        let (raw, out) = (&c.channels["knee_angle"], &n.channels["knee_angle"]);
        ensure(out.len() == 101, "normalized length")?;
        ensure(out[0] == raw[0] && out[100] == raw[raw.len() - 1], "endpoints changed by normalization")?;
        ensure(raw[0] == values[c.start_index] && raw[raw.len() - 1] == values[c.end_index], "cycle bounds")?;
    }
    Ok(format!(
        "gain error at cutoff {:.3}%, {} strikes exact, {} cycles, endpoints exact",
        worst * 100.0,
        strikes.len(),
        cycles.len()
    ))
}

fn random_basis(k: usize, names: &[String], seed: u64) -> synwalk_core::synergy::SynergyBasis {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synwalk_core::synergy::SynergyBasis {
        w: Array2::zeros((0, k)),
        h: Array2::from_shape_fn((k, names.len()), |_| rng.random::<f64>()),
        muscle_names: names.to_vec(),
        converged: true,
        iterations: 1,
        final_residual: 0.0,
        row_scales: vec![1.0; k],
    }
}

fn c4_environment() -> Result<String, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    // Horizon, gravity off so nothing can fall.
    let cfg = ModelConfig { gravity: 0.0, ..ModelConfig::default() };
    let mut env = Env::new(cfg.clone(), Controller::independent(&cfg), RewardConfig::default()).map_err(|e| err(&e))?;
    env.reset(TerrainSpec::flat(10), 0.9, 0).map_err(|e| err(&e))?;
    let zero = vec![0.0; env.action_dim()];
    for i in 1..=1000 {
        let r = env.step(&zero).map_err(|e| err(&e))?;
        ensure(!r.terminated, format!("terminated at step {i}"))?;
        ensure(r.truncated == (i == 1000), format!("truncation flag wrong at step {i}"))?;
    }
    ensure(env.state().step == 1000 && env.state().time == 25.0, format!("ended at t = {}", env.state().time))?;

    // Curriculum.
    let expect = [
        0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.6, 1.5, 1.4, 1.3, 1.2, 1.1, 1.0, 0.9, 0.8, 0.7,
    ];
    for (i, v) in expect.iter().enumerate() {
        ensure(curriculum_velocity(i as u64) == *v, format!("curriculum entry {i}"))?;
    }
    ensure(curriculum_velocity(9) == 1.6 && curriculum_velocity(10) == 1.6, "entries 9 and 10 are not both 1.6")?;

    // Terrain.
    let terrain = generate_terrain(17, 10_000, (-6.0, 6.0)).map_err(|e| err(&e))?;
    let pitches: Vec<f64> = terrain.pitches().collect();
    ensure(pitches.len() == 10_000, "tile count")?;
    ensure(pitches.iter().all(|p| (-6.0..=6.0).contains(p)), "pitch outside [-6, 6] deg")?;

    // Mirroring: the two leg blocks trade places, trunk unchanged.
    let cfg = ModelConfig::default();
    let planar: Vec<String> = cfg.leg_muscles.iter().map(|m| m.name.clone()).collect();
    let n = cfg.n_leg_muscles();
    let controllers = [
        Controller::independent(&cfg),
        Controller::synergy(&random_basis(10, &planar, 5), &cfg).map_err(|e| err(&e))?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for c in &controllers {
        let (leg, trunk) = (c.leg_block(), c.trunk_block());
        for _ in 0..1000 {
            let a: Vec<f64> = (0..c.action_dim()).map(|_| rng.random()).collect();
            let mut swapped = a[leg..2 * leg].to_vec();
            swapped.extend_from_slice(&a[..leg]);
            swapped.extend_from_slice(&a[2 * leg..2 * leg + trunk]);
            let e_mirror = c.apply_action(&a, true).map_err(|e| err(&e))?;
            let e_swap = c.apply_action(&swapped, false).map_err(|e| err(&e))?;
            let e_plain = c.apply_action(&a, false).map_err(|e| err(&e))?;
            ensure(e_mirror == e_swap, "mirrored action differs from swapped legs")?;
            ensure(e_plain[..n] == e_mirror[n..2 * n] && e_plain[n..2 * n] == e_mirror[..n], "legs not exchanged")?;
            ensure(e_plain[2 * n..] == e_mirror[2 * n..], "trunk changed under mirroring")?;
        }
    }

    // Base translation hidden for a whole episode.
    let mut env = Env::new(cfg.clone(), Controller::independent(&cfg), RewardConfig::default()).map_err(|e| err(&e))?;
    let o = env.reset(TerrainSpec::flat(20), 1.0, 3).map_err(|e| err(&e))?;
    let idx = o.layout.base_translation();
    ensure(!idx.is_empty() && idx.iter().all(|&i| o.values[i] == 0.0), "reset observation exposes translation")?;
    let mut steps = 0;
    loop {
        let a: Vec<f64> = (0..env.action_dim()).map(|_| rng.random::<f64>()).collect();
        let r = env.step(&a).map_err(|e| err(&e))?;
        steps += 1;
        ensure(idx.iter().all(|&i| r.observation.values[i] == 0.0), "observation exposes translation")?;
        if r.terminated || r.truncated {
            break;
        }
    }

    // Bitwise replay.
    let replay = |seed: u64| -> Result<Vec<u64>, String> {
        let mut e = Env::new(cfg.clone(), Controller::independent(&cfg), RewardConfig::default()).map_err(|e| err(&e))?;
        let terrain = generate_terrain(seed, 30, (-6.0, 6.0)).map_err(|e| err(&e))?;
        e.reset(terrain, 1.1, seed).map_err(|e| err(&e))?;
        let mut arng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = Vec::new();
        for _ in 0..200 {
            let a: Vec<f64> = (0..e.action_dim()).map(|_| arng.random::<f64>()).collect();
            let r = e.step(&a).map_err(|e| err(&e))?;
            bits.extend(r.observation.values.iter().map(|v| v.to_bits()));
            bits.push(r.reward.total.to_bits());
            if r.terminated || r.truncated {
                break;
            }
        }
        Ok(bits)
    };
    for seed in [1, 2, 3] {
        ensure(replay(seed)? == replay(seed)?, format!("replay differs for seed {seed}"))?;
    }
    Ok(format!(
        "truncated at 1000 steps / 25.0 s, curriculum exact, 10000 pitches in range, 2000 mirrored actions, {steps}-step episode hides translation, replay bitwise"
    ))
}

fn dataset(subjects: &[Vec<f64>]) -> BenchmarkDataset {
    let mut ds = BenchmarkDataset::new(subjects[0].len());
    for (i, s) in subjects.iter().enumerate() {
        ds.add_cycle(&format!("s{i:02}"), "speed_1.2", "knee_angle", s.clone()).unwrap();
    }
    ds
}

fn c5_metrics() -> Result<String, String> {
    let axis = percent_axis(101);
    let wave = |amp: f64, shift: f64| -> Vec<f64> {
        axis.iter().map(|p| amp * (2.0 * PI * p / 100.0).sin() + shift).collect()
    };
    let subjects: Vec<Vec<f64>> = (0..22).map(|i| wave(20.0 + i as f64 * 0.3, i as f64 * 0.1)).collect();
    let base = cross_human_baseline(&dataset(&subjects), "knee_angle", "speed_1.2").map_err(|e| e.to_string())?;
    ensure(base.pairs == 231, format!("{} pairs", base.pairs))?;

    let (s0, s1) = (wave(20.0, 0.0), wave(20.0, 4.0));
    let ds = dataset(&[s0.clone(), s1]);
    let r = rmse_ratio(&s0, &ds, "knee_angle", "speed_1.2", Numerator::PerSubject).map_err(|e| e.to_string())?;
    ensure((r - 0.5).abs() <= 1e-12, format!("ratio {r}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a: Vec<f64> = (0..101).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..101).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scale = rng.random_range(0.01..100.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let shift = rng.random_range(-50.0..50.0);
        let bt: Vec<f64> = b.iter().map(|x| scale * x + shift).collect();
        let r0 = pearson_r(&a, &b).map_err(|e| e.to_string())?;
        let r1 = pearson_r(&a, &bt).map_err(|e| e.to_string())?;
        worst = worst.max((r1 - scale.signum() * r0).abs());
    }
    ensure(worst <= 1e-9, format!("affine deviation {worst}"))?;

    let parts = phase_partition(&axis, &PhaseBoundaries::default()).map_err(|e| e.to_string())?;
    ensure(parts[0].start == 0 && parts[3].end == axis.len(), "partition does not span the axis")?;
    ensure(parts.windows(2).all(|w| w[0].end == w[1].start), "partition has gaps or overlaps")?;
    let lens: Vec<usize> = parts.iter().map(|r| r.len()).collect();
    ensure(lens == vec![10, 40, 10, 41], format!("phase sizes {lens:?}"))?;
    Ok(format!("231 pairs, ratio {r}, pearson affine deviation {worst:.1e}, phases {lens:?}"))
}

fn c6_learning() -> Result<String, String> {
    let acts = synth::activation_matrix(2000, 100, 0.01, 0);
    let basis = nmf(&acts, &NmfOptions::new(10, 0)).map_err(|e| e.to_string())?;
    let threads = thread_count();
    let mut lines = Vec::new();
    for mode in [ControllerMode::Synergy, ControllerMode::Independent] {
        let cfg = TrainConfig {
            controller_mode: mode,
            ..TrainConfig::desk()
        };
        ensure(cfg.total_steps <= 200_000 && cfg.target_speed == Some(0.9), "desk profile out of range")?;
        let setup = match mode {
            ControllerMode::Synergy => EnvSetup::synergy(ModelConfig::default(), &basis).map_err(|e| e.to_string())?,
            ControllerMode::Independent => EnvSetup::independent(ModelConfig::default()),
        };
        let t = Instant::now();
        let mut passed = 0;
        let mut detail = Vec::new();
        for run in train_seeds(&cfg, &setup, None, threads) {
            let run = run.map_err(|e| e.to_string())?;
            let (first, last) = run.decile_means(0, cfg.total_steps);
            let (first, last) = (first.ok_or("no episode in the first decile")?, last.ok_or("no episode in the final decile")?);
            let ok = last >= 2.0 * first && last > first;
            passed += ok as usize;
            detail.push(format!("seed {} {first:.1}->{last:.1}{}", run.seed, if ok { "" } else { " x" }));
        }
        let minutes = t.elapsed().as_secs_f64() / 60.0;
        let line = format!("{mode}: {passed}/5 [{}] in {minutes:.1} min on {threads} thread(s)", detail.join(", "));
        println!("    {line}");
        ensure(passed >= 3, line.clone())?;
        ensure(minutes <= 30.0, format!("{mode} took {minutes:.1} min"))?;
        lines.push(line);
    }
    Ok(lines.join("; "))
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Signs of every hidden pre-activation of `net` on `x`.
fn relu_pattern(net: &Mlp, x: &Array2<f64>) -> Vec<bool> {
    let mut pattern = Vec::new();
    let mut h = x.clone();
    let last = net.layers.len() - 1;
    for (i, l) in net.layers.iter().enumerate() {
        h = h.dot(&l.w) + &l.b;
        if i < last {
            pattern.extend(h.iter().map(|&v| v > 0.0));
            h.mapv_inplace(|v| v.max(0.0));
        }
    }
    pattern
}

fn with_param(net: &Mlp, i: usize, delta: f64) -> Mlp {
    let mut p = net.flat();
    p[i] += delta;
    let mut out = net.clone();
    out.set_flat(&p);
    out
}

/// Central differences at step `h`, plus the indices whose ±h perturbation
/// crosses a non-differentiable point as reported by `kinks`.
fn central_difference(
    net: &Mlp,
    f: impl Fn(&Mlp) -> f64,
    kinks: impl Fn(&Mlp) -> Vec<bool>,
    h: f64,
) -> (Vec<f64>, Vec<usize>) {
    let mut fd = Vec::new();
    let mut crossed = Vec::new();
    for i in 0..net.n_params() {
        let (plus, minus) = (with_param(net, i, h), with_param(net, i, -h));
        fd.push((f(&plus) - f(&minus)) / (2.0 * h));
        if kinks(&plus) != kinks(&minus) {
            crossed.push(i);
        }
    }
    (fd, crossed)
}

fn masked_error(g: &[f64], fd: &[f64], skip: &[usize]) -> f64 {
    let keep = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, x)| *x).collect() };
    relative_error(&keep(g), &keep(fd))
}

fn concat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).unwrap()
}

/// Squashed reparameterized action, computed from the policy head directly.
fn policy_action(actor: &Mlp, obs: &Array2<f64>, eps: &Array2<f64>) -> Array2<f64> {
    let out = actor.forward(obs);
    let d = eps.ncols();
    Array2::from_shape_fn(eps.dim(), |(b, j)| {
        let log_std = LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (out[(b, d + j)].tanh() + 1.0);
        (out[(b, j)] + log_std.exp() * eps[(b, j)]).tanh()
    })
}

fn c7_gradients() -> Result<String, String> {
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (od, ad, n) = (12, 5, 16);
    let sac = Sac::new(od, ad, &[24, 16], &[24, 16], &SacParams::default(), &mut rng);
    let mut u = |r: usize, c: usize| Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0));
    let batch = Batch {
        obs: u(n, od),
        action: u(n, ad),
        reward: u(n, 1).column(0).to_owned(),
        next_obs: u(n, od),
        done: Array1::from_shape_fn(n, |b| (b % 4 == 0) as u8 as f64),
    };
    let eps_next = u(n, ad);
    let eps = u(n, ad);
    let y = sac.critic_targets(&batch, &eps_next);
    let x = concat(&batch.obs, &batch.action);
    let mut report = Vec::new();
    let mut excluded = 0;
    let mut total = 0;
    for (name, q) in [("q1", &sac.q1), ("q2", &sac.q2)] {
        let (_, g) = Sac::critic_loss_grad(q, &batch, &y);
        let (fd, crossed) = central_difference(q, |net| Sac::critic_loss_grad(net, &batch, &y).0, |net| relu_pattern(net, &x), h);
        let e = masked_error(&g.flat(), &fd, &crossed);
        ensure(e < 1e-3, format!("{name} relative error {e} ({} kink-crossing parameters excluded)", crossed.len()))?;
        report.push(format!("{name} {e:.1e}"));
        excluded += crossed.len();
        total += fd.len();
    }
    let actor_kinks = |a: &Mlp| {
        let act = policy_action(a, &batch.obs, &eps);
        let xa = concat(&batch.obs, &act);
        let (o1, o2) = (sac.q1.forward(&xa), sac.q2.forward(&xa));
        let mut k = relu_pattern(a, &batch.obs);
        k.extend(relu_pattern(&sac.q1, &xa));
        k.extend(relu_pattern(&sac.q2, &xa));
        k.extend((0..n).map(|b| o1[(b, 0)] <= o2[(b, 0)]));
        k
    };
    let (_, g, _) = sac.actor_loss_grad(&sac.actor, &batch.obs, &eps);
    let (fd, crossed) = central_difference(&sac.actor, |a| sac.actor_loss_grad(a, &batch.obs, &eps).0, actor_kinks, h);
    let ea = masked_error(&g.flat(), &fd, &crossed);
    ensure(ea < 1e-3, format!("actor relative error {ea} ({} kink-crossing parameters excluded)", crossed.len()))?;
    report.push(format!("actor {ea:.1e}"));
    excluded += crossed.len();
    total += fd.len();
    ensure(excluded * 100 <= total, format!("{excluded} of {total} parameters sit on a kink"))?;
    Ok(format!("{} at h = 1e-4 in f64; {excluded}/{total} kink-crossing parameters excluded", report.join(", ")))
}

fn synwalk(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_synwalk"))
        .args(args)
        .env("SYNWALK_THREADS", "1")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`synwalk {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn artifacts(manifest: &Path) -> Result<Vec<(String, String)>, String> {
    let text = std::fs::read_to_string(manifest).map_err(|e| format!("{}: {e}", manifest.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let list = v["artifacts"].as_array().ok_or("manifest without artifacts")?;
    Ok(list
        .iter()
        .map(|a| (a["path"].as_str().unwrap_or("").to_string(), a["sha256"].as_str().unwrap_or("").to_string()))
        .collect())
}

const STAGES: [&str; 5] = ["demo", "pre", "syn", "train", "eval"];

fn pipeline(root: &Path) -> Result<MetricReport, String> {
    let p = |s: &str| -> String { root.join(s).display().to_string() };
    synwalk(&["demo-data", "--out", &p("demo")])?;
    synwalk(&["preprocess", "--input", &p("demo/trials"), "--out", &p("pre")])?;
    synwalk(&["synergy", "--input", &p("demo/activations.csv"), "--k", "10", "--out", &p("syn")])?;
    let basis = load_basis(&root.join("syn/basis.json")).map_err(|e| e.to_string())?;
    ensure(basis.h.dim() == (10, 40), format!("H is {:?}", basis.h.dim()))?;
    synwalk(&[
        "train", "--profile", "desk", "--mode", "synergy", "--basis", &p("syn/basis.json"), "--seed", "0", "--steps",
        "8000", "--out", &p("train"),
    ])?;
    synwalk(&[
        "evaluate", "--checkpoint", &p("train/seed_0/checkpoints/final.ckpt"), "--basis", &p("syn/basis.json"),
        "--reference", &p("demo/reference"), "--rollouts", "1", "--out", &p("eval"),
    ])?;
    for s in STAGES {
        synwalk(&["verify", "--manifest", &p(&format!("{s}/run_manifest.json"))])?;
    }
    let text = std::fs::read_to_string(root.join("eval/report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn c8_pipeline() -> Result<String, String> {
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let roots: Vec<PathBuf> = dirs.iter().map(|d| d.path().to_path_buf()).collect();
    let report = pipeline(&roots[0])?;
    let again = pipeline(&roots[1])?;

    let ds_vars = synth::reference_dataset(11, 1, 0).variables();
    let conditions = synwalk_core::trainer::Condition::standard_grid();
    let expected = ds_vars.len() * conditions.len() * PHASE_NAMES.len();
    ensure(report.entries.len() == expected, format!("{} entries, expected {expected}", report.entries.len()))?;
    let keys: BTreeSet<(String, String, String)> = report
        .entries
        .iter()
        .map(|e| (e.variable.clone(), e.condition.clone(), e.phase.clone()))
        .collect();
    ensure(keys.len() == expected, "duplicate report entries")?;
    for (t, n) in &report.threshold_counts {
        let recount = report.entries.iter().filter(|e| e.rmse_ratio.is_some_and(|r| r > *t)).count();
        ensure(recount == *n, format!("threshold {t}: reported {n}, recounted {recount}"))?;
    }
    ensure(report.threshold_counts.iter().map(|(t, _)| *t).eq(THRESHOLDS), "threshold set")?;
    ensure(report == again, "reports differ between runs")?;

    let mut hashed = 0;
    for s in STAGES {
        let a = artifacts(&roots[0].join(s).join("run_manifest.json"))?;
        let b = artifacts(&roots[1].join(s).join("run_manifest.json"))?;
        ensure(!a.is_empty(), format!("{s}: no artifacts"))?;
        ensure(a == b, format!("{s}: artifact hashes differ between runs"))?;
        hashed += a.len();
    }
    let failed = report.entries.iter().filter(|e| e.rmse_ratio.is_none()).count() / PHASE_NAMES.len();
    Ok(format!(
        "H 10x40, {expected} entries ({} variables x {} conditions x 4 phases, {failed} variable-conditions without strides), {hashed} artifacts reproduced",
        ds_vars.len(),
        conditions.len()
    ))
}
