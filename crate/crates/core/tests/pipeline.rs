use synwalk_core::gaitdata::{
    detect_heel_strikes, load_trial, segment_cycles, time_normalize, GrfAxis, TrialSchema,
};
use synwalk_core::synergy::{load_basis, nmf, save_basis, vaf, ActivationMatrix, NmfOptions};
use synwalk_core::synth::{self, TrialOptions};

#[test]
fn synthetic_trials_segment_into_normalized_strides() {
    let dir = tempfile::tempdir().unwrap();
    let opts = TrialOptions { n_trials: 2, ..TrialOptions::default() };
    let paths = synth::write_demo_trials(dir.path(), &opts).unwrap();
    assert_eq!(paths.len(), 2);
    let schema = TrialSchema::from_json_file(&dir.path().join(synth::SCHEMA_FILE)).unwrap();
    let mut parts = Vec::new();
    for p in &paths {
        let trial = load_trial(p, &schema).unwrap().filtered(6.0, 4).unwrap();
        let strikes = detect_heel_strikes(&trial.grf[&GrfAxis::Vertical], 15.0);
        // 8 s at 1.2 m/s is several strides.
        assert!(strikes.len() >= 4, "{} heel strikes", strikes.len());
        let cycles = segment_cycles(&trial, &strikes).unwrap();
        assert_eq!(cycles.len(), strikes.len() - 1);
        for c in &cycles {
            let n = time_normalize(c, 101).unwrap();
            assert!(n.is_normalized());
            assert!(n.channels.values().all(|v| v.len() == 101 && v.iter().all(|x| x.is_finite())));
            assert!(n.channels.contains_key("knee_angle"));
        }
        parts.push(trial.activations.expect("activation columns"));
    }
    let m = ActivationMatrix::concat(&parts).unwrap();
    assert_eq!(m.muscles(), synth::BASIS_MUSCLES.len());
}

#[test]
fn synthetic_activations_recover_a_ten_synergy_basis() {
    let m = synth::activation_matrix(1000, 100, 0.01, 3);
    let basis = nmf(&m, &NmfOptions::new(10, 0)).unwrap();
    assert_eq!(basis.h.dim(), (10, 40));
    let v = vaf(&m.data, &basis.reconstruct()).unwrap();
    assert!(v > 0.9, "VAF {v}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.json");
    save_basis(&basis, &path).unwrap();
    let back = load_basis(&path).unwrap();
    assert_eq!(back.muscle_names, basis.muscle_names);
    assert_eq!(back.h, basis.h);
}
