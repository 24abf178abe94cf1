use analog_verify::compiler::CompilerConfig;
use analog_verify::models::{build_preset, preset_rotation, PresetName};
use analog_verify::noise::{sample_all, NoiseKind, NoiseSpec, SegmentTiming};
use analog_verify::protocols::*;
use analog_verify::SystemState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(taus: &[f64], noise: Vec<NoiseSpec>) -> ProtocolRunConfig {
    ProtocolRunConfig { tau_grid: taus.to_vec(), shots_per_run: 200, runs_per_point: 10, noise, seed: 11, ..Default::default() }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

#[test]
fn noiseless_echoes_return_every_shot() {
    let h = build_preset(PresetName::Ising2Q);
    let r = preset_rotation(PresetName::Ising2Q).unwrap();
    let c = cfg(&[1e-3, 5e-3, 2e-2], vec![]);
    for curve in [run_time_reversal(&h, &c).unwrap(), run_multi_basis(&h, &r, &c).unwrap()] {
        for p in &curve.points {
            assert!(p.success_probability >= 1.0 - 1e-12, "{p:?}");
            assert_eq!(p.n_samples, 2000);
        }
    }
}

#[test]
fn noiseless_randomized_meets_the_compile_threshold() {
    let h = build_preset(PresetName::Ising2Q);
    let c = ProtocolRunConfig { n_steps: 30, n_sequences: 6, runs_per_point: 2, ..cfg(&[1e-3, 3e-3], vec![]) };
    let comp = CompilerConfig { threshold: 0.98, ..Default::default() };
    let curve = run_randomized_analog(&h, &c, &comp).unwrap();
    for p in &curve.points {
        assert_eq!(p.skipped, 0);
        assert!(p.success_probability >= 0.98 - 3.0 * p.standard_error.max(0.005), "{p:?}");
    }
    assert!(curve.points[1].time > curve.points[0].time);
}

#[test]
fn parallel_and_serial_runs_agree() {
    let h = build_preset(PresetName::Heisenberg5Q);
    let noise = vec![NoiseSpec::fast_ou(0.3, 1e-5, 1), NoiseSpec::new(NoiseKind::SlowShotToShot, 0.15, 2)];
    let c = ProtocolRunConfig { runs_per_point: 6, shots_per_run: 50, ..cfg(&[2e-4, 4e-4], noise) };
    let par = run_time_reversal(&h, &c).unwrap();
    let ser = single_threaded(|| run_time_reversal(&h, &c).unwrap());
    assert_eq!(par, ser);

    let r = preset_rotation(PresetName::Heisenberg5Q).unwrap();
    assert_eq!(run_multi_basis(&h, &r, &c).unwrap(), single_threaded(|| run_multi_basis(&h, &r, &c).unwrap()));

    let h2 = build_preset(PresetName::RavHeisenberg2Q);
    let rc = ProtocolRunConfig { n_sequences: 4, runs_per_point: 3, ..c.clone() };
    let comp = CompilerConfig { threshold: 0.98, ..Default::default() };
    let a = run_randomized_analog(&h2, &rc, &comp).unwrap();
    let b = single_threaded(|| run_randomized_analog(&h2, &rc, &comp).unwrap());
    assert_eq!(a, b);
}

#[test]
fn noise_realizations_depend_only_on_their_run_index() {
    let h = build_preset(PresetName::Heisenberg5Q);
    let specs = vec![NoiseSpec::fast_ou(0.3, 1e-5, 1), NoiseSpec::new(NoiseKind::SlowShotToShot, 0.15, 2)];
    let segs = [SegmentTiming::new(1e-4, 0), SegmentTiming::new(1e-4, 0)];
    let forward: Vec<u64> = (0..8).map(|i| sample_all(&specs, &h, i, &segs).unwrap().fingerprint()).collect();
    let backward: Vec<u64> = (0..8).rev().map(|i| sample_all(&specs, &h, i, &segs).unwrap().fingerprint()).collect();
    assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    let mut unique = forward.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), forward.len());
}

#[test]
fn echoes_are_blind_to_constant_errors() {
    let h = build_preset(PresetName::Heisenberg5Q);
    let r = preset_rotation(PresetName::Heisenberg5Q).unwrap();
    for spec in [NoiseSpec::new(NoiseKind::Miscalibration, 0.1, 3), NoiseSpec::new(NoiseKind::IdleCrosstalk, 0.1, 4)] {
        let c = ProtocolRunConfig { runs_per_point: 5, ..cfg(&[1e-3, 2e-3], vec![spec]) };
        for curve in [run_time_reversal(&h, &c).unwrap(), run_multi_basis(&h, &r, &c).unwrap()] {
            assert!(curve.last().unwrap().success_probability > 0.99);
        }
    }
}

#[test]
fn slow_noise_separates_multi_basis_from_time_reversal() {
    let h = build_preset(PresetName::Heisenberg5Q);
    let r = preset_rotation(PresetName::Heisenberg5Q).unwrap();
    let c = ProtocolRunConfig { runs_per_point: 20, ..cfg(&[2e-3], vec![NoiseSpec::new(NoiseKind::SlowShotToShot, 0.15, 2)]) };
    let tr = run_time_reversal(&h, &c).unwrap();
    let mb = run_multi_basis(&h, &r, &c).unwrap();
    assert!(tr.points[0].success_probability > 0.99);
    assert!(mb.points[0].success_probability < 0.7);
}

#[test]
fn fast_noise_pulls_time_reversal_below_the_noiseless_level() {
    let h = build_preset(PresetName::Heisenberg5Q);
    let base = run_time_reversal(&h, &cfg(&[2e-3], vec![])).unwrap();
    let noisy = run_time_reversal(&h, &cfg(&[2e-3], vec![NoiseSpec::fast_ou(0.3, 1e-5, 1)])).unwrap();
    let (b, n) = (base.points[0], noisy.points[0]);
    let sigma = (b.standard_error.powi(2) + n.standard_error.powi(2)).sqrt();
    assert!(b.success_probability - n.success_probability > 5.0 * sigma);
}

#[test]
fn randomized_effective_time_grows_with_tau() {
    let h = build_preset(PresetName::RavHeisenberg2Q);
    let c = ProtocolRunConfig { n_sequences: 4, ..cfg(&[1e-3, 2e-3, 4e-3, 8e-3], vec![]) };
    let prepared = prepare_randomized(&h, &c, &CompilerConfig { threshold: 0.98, ..Default::default() }).unwrap();
    let times: Vec<f64> = prepared.iter().map(|p| p.effective_time()).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]), "{times:?}");
    for p in &prepared {
        for s in &p.sequences {
            assert_eq!(s.forward_layers, 150);
            assert!(s.achieved_population >= 0.98);
        }
    }
}

#[test]
fn fixed_layer_duration_scales_the_sequence_length() {
    let h = build_preset(PresetName::RavHeisenberg2Q);
    let c = ProtocolRunConfig { n_sequences: 2, layer_duration: Some(2e-5), ..cfg(&[1e-4, 4e-4], vec![]) };
    let prepared = prepare_randomized(&h, &c, &CompilerConfig { threshold: 0.98, ..Default::default() }).unwrap();
    assert!(prepared[0].sequences.iter().all(|s| s.forward_layers == 10));
    assert!(prepared[1].sequences.iter().all(|s| s.forward_layers == 40));
    assert!(prepared[1].sequences.iter().all(|s| s.layers.iter().all(|l| l.duration == 2e-5)));
}

#[test]
fn randomized_initial_states_honour_the_restriction() {
    let h = build_preset(PresetName::RavIsing2Q);
    let c = ProtocolRunConfig { n_sequences: 8, n_steps: 30, initial_states: vec![1, 2], ..cfg(&[1e-4], vec![]) };
    let prepared = prepare_randomized(&h, &c, &CompilerConfig { threshold: 0.98, ..Default::default() }).unwrap();
    let states: Vec<usize> = prepared[0].sequences.iter().map(|s| s.initial_state).collect();
    assert!(states.iter().all(|s| *s == 1 || *s == 2));
    assert!(states.contains(&1) && states.contains(&2));
}

#[test]
fn shot_noise_stderr_matches_binomial_width() {
    // a 0.99 / 0.01 superposition measured 100 shots at a time
    let amps = nalgebra::DVector::from_vec(vec![
        analog_verify::C64::new(0.99f64.sqrt(), 0.0),
        analog_verify::C64::new(0.01f64.sqrt(), 0.0),
    ]);
    let state = SystemState::pure(amps).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let estimates: Vec<f64> = (0..2000).map(|_| measure(&state, 0, 100, &mut rng).unwrap().success).collect();
    let (mean, sem) = mean_and_sem(&estimates);
    let sd = sem * (estimates.len() as f64).sqrt();
    assert!((mean - 0.99).abs() < 0.002);
    assert!((sd - 0.00995).abs() < 0.001);
}
