use super::*;
use crate::reward::RewardConfig;

fn env_with(cfg: ModelConfig) -> Env {
    let ctrl = Controller::independent(&cfg);
    Env::new(cfg, ctrl, RewardConfig::default()).unwrap()
}

fn env() -> Env {
    env_with(ModelConfig::default())
}

fn zero_action(env: &Env) -> Vec<f64> {
    vec![0.0; env.action_dim()]
}

#[test]
fn reset_is_deterministic_and_reports_target() {
    let mut a = env();
    let mut b = env();
    let oa = a.reset(TerrainSpec::flat(10), 1.2, 7).unwrap();
    let ob = b.reset(TerrainSpec::flat(10), 1.2, 7).unwrap();
    assert_eq!(oa, ob);
    assert_eq!(oa.target_speed(), 1.2);
    assert_eq!(oa.dim(), 133);
    assert!(!oa.mirrored);
    let oc = b.reset(TerrainSpec::flat(10), 1.2, 8).unwrap();
    assert_ne!(oa.values, oc.values);
}

#[test]
fn settled_stance_carries_body_weight() {
    let mut e = env();
    e.reset(TerrainSpec::flat(10), 0.9, 3).unwrap();
    let vertical: f64 = e.state().grf.iter().map(|f| f[1]).sum();
    let bw = e.body_weight();
    assert!((vertical - bw).abs() < 0.05 * bw, "vertical GRF {vertical} N vs BW {bw} N");
}

#[test]
fn settles_on_slopes_too() {
    for pitch in [-6.0, 6.0] {
        let mut e = env();
        e.reset(TerrainSpec::constant_slope(10, pitch), 0.9, 1).unwrap();
        let vertical: f64 = e.state().grf.iter().map(|f| f[1]).sum();
        assert!((vertical / e.body_weight() - 1.0).abs() < 0.05, "pitch {pitch}: {vertical}");
    }
}

#[test]
fn zero_excitation_collapses_within_two_seconds() {
    for seed in 0..5 {
        let mut e = env();
        e.reset(TerrainSpec::flat(10), 0.9, seed).unwrap();
        let a = zero_action(&e);
        let mut fell_at = None;
        for _ in 0..80 {
            let r = e.step(&a).unwrap();
            assert!(!r.truncated);
            if r.terminated {
                fell_at = Some(r.info.time);
                assert_eq!(r.reward.r_fall, 1.0);
                break;
            }
        }
        let t = fell_at.unwrap_or_else(|| panic!("seed {seed}: still standing after 2 s"));
        assert!(t <= 2.0);
        assert!(matches!(e.step(&a), Err(EnvError::EpisodeOver)));
    }
}

#[test]
fn horizon_truncates_at_1000_steps() {
    // Without gravity the model cannot fall, so the horizon is reached.
    let mut cfg = ModelConfig::default();
    cfg.gravity = 0.0;
    let mut e = env_with(cfg);
    let obs = e.reset(TerrainSpec::flat(10), 0.9, 0).unwrap();
    let a = zero_action(&e);
    for i in 1..=1000 {
        let r = e.step(&a).unwrap();
        assert_eq!(r.observation.dim(), obs.dim());
        assert!(!r.terminated);
        assert_eq!(r.truncated, i == 1000);
    }
    assert_eq!(e.state().step, 1000);
    assert_eq!(e.state().time, 25.0);
    assert!(e.step(&a).is_err());
}

#[test]
fn base_translation_is_hidden() {
    let mut e = env();
    let o = e.reset(TerrainSpec::flat(10), 1.0, 2).unwrap();
    let idx = o.layout.base_translation();
    assert!(idx.iter().all(|&i| o.values[i] == 0.0));
    let a = vec![0.3; e.action_dim()];
    loop {
        let r = e.step(&a).unwrap();
        assert!(idx.iter().all(|&i| r.observation.values[i] == 0.0));
        if r.terminated || r.truncated {
            break;
        }
    }
}

#[test]
fn trajectories_replay_bitwise() {
    let run = || {
        let mut e = env();
        e.reset(TerrainSpec::flat(10), 1.0, 11).unwrap();
        let mut out = Vec::new();
        for i in 0..60 {
            let a: Vec<f64> = (0..e.action_dim()).map(|j| ((i * 7 + j * 3) % 10) as f64 / 10.0).collect();
            match e.step(&a) {
                Ok(r) => {
                    out.extend(r.observation.values);
                    out.push(r.reward.total);
                    if r.terminated {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
        out
    };
    let a = run();
    let b = run();
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

fn airborne(gravity: f64) -> (Env, f64) {
    let mut cfg = ModelConfig::default();
    cfg.gravity = gravity;
    cfg.joint_damping = 0.0;
    cfg.joint_limits.damping = 0.0;
    let mut e = env_with(cfg);
    e.reset(TerrainSpec::flat(10), 0.9, 0).unwrap();
    let mut q = [0.0; NQ];
    let mut qd = [0.0; NQ];
    q[1] = 6.0;
    for (i, v) in qd.iter_mut().enumerate().skip(2) {
        *v = 0.4 * ((i as f64) * 1.3).sin();
    }
    qd[0] = 0.5;
    e.set_generalized_state(q, qd);
    let e0 = e.mechanical_energy();
    (e, e0)
}

#[test]
fn flight_energy_drift_is_small() {
    // Conservative case: no excitation, no contact, no damping.
    for g in [9.81, 0.0] {
        let (mut e, e0) = airborne(g);
        let ke0 = {
            let q = VecQ::from(e.state().q);
            let qd = VecQ::from(e.state().qd);
            e.skeleton().kinetic_energy(&e.skeleton().pose(&q, &qd), &qd, g)
        };
        let a = zero_action(&e);
        for _ in 0..40 {
            e.step(&a).unwrap();
        }
        let drift = (e.mechanical_energy() - e0).abs();
        // Ground datum with gravity; kinetic energy alone without.
        let reference = if g > 0.0 { e0 } else { ke0 };
        assert!(drift < 0.01 * reference, "g={g}: drift {drift} J over 1 s of {reference} J");
    }
}

#[test]
fn fall_predicate_boundaries() {
    let c = FallCriteria::default();
    assert!(!detect_fall(0.94, 0.0, 0.94, &c));
    assert!(detect_fall(0.0, 0.0, 0.94, &c));
    assert!(!detect_fall(0.6 * 0.94, 0.0, 0.94, &c));
    assert!(detect_fall(0.6 * 0.94 - 1e-12, 0.0, 0.94, &c));
    assert!(!detect_fall(0.94, 60.0, 0.94, &c));
    assert!(detect_fall(0.94, -60.5, 0.94, &c));
    let mut e = env();
    e.reset(TerrainSpec::flat(10), 0.9, 0).unwrap();
    assert!(!e.is_fallen());
    assert!((e.standing_height() - 0.94).abs() < 1e-12);
}

#[test]
fn heel_strikes_toggle_mirror_phase() {
    let mut e = env();
    e.reset(TerrainSpec::flat(10), 0.9, 4).unwrap();
    // Drop the model from a small height so both heels land.
    let mut q = e.state().q;
    q[1] += 0.05;
    e.set_generalized_state(q, [0.0; NQ]);
    let a = vec![0.2; e.action_dim()];
    let mut strikes = 0;
    let mut phase = false;
    for _ in 0..20 {
        let r = e.step(&a).unwrap();
        strikes += r.info.heel_strike.iter().filter(|&&s| s).count();
        phase = r.info.mirror_phase;
        assert_eq!(r.observation.mirrored, phase);
        if r.terminated {
            break;
        }
    }
    assert!(strikes >= 1, "no heel strike detected");
    assert_eq!(phase, strikes % 2 == 1);
}

#[test]
fn impossible_initial_pose_is_rejected() {
    let mut cfg = ModelConfig::default();
    cfg.initial_pose.hip = 120.0;
    cfg.initial_pose.angle_noise_deg = 0.0;
    let mut e = env_with(cfg);
    assert!(matches!(
        e.reset(TerrainSpec::flat(10), 0.9, 0),
        Err(EnvError::Penetration(_))
    ));
}

#[test]
fn rollout_log_round_trip() {
    let mut e = env();
    e.reset(TerrainSpec::flat(10), 0.9, 0).unwrap();
    let mut log = RolloutLog::new(&e, "speed_0.9");
    let a = vec![0.1; e.action_dim()];
    for _ in 0..10 {
        let r = e.step(&a).unwrap();
        log.record(&e, &a, &r);
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.jsonl");
    log.write_jsonl(&p).unwrap();
    let back = RolloutLog::read_jsonl(&p).unwrap();
    assert_eq!(back, log);
    let trial = back.to_trial().unwrap();
    assert_eq!(trial.len(), 10);
    assert_eq!(trial.activations.as_ref().unwrap().muscles(), 8);
}
