use eitshape::fdm::*;
use eitshape::forward::{ConductivityField, Protocol};
use eitshape::mesh::*;
use eitshape::scenarios::*;

fn hinged() -> Actuator {
    let mesh = generate_hinged_actuator_mesh(&HingedActuatorParams::default()).unwrap();
    Actuator::hinged(mesh, Protocol::hinged_default()).unwrap()
}

fn finger() -> Actuator {
    Actuator::finger(&FingerChamberParams::default(), FINGER_FREQUENCIES).unwrap()
}

fn quiet() -> SweepConfig {
    SweepConfig {
        noise: NoiseModel::none(),
        ..Default::default()
    }
}

fn angle_sweep(dof: usize) -> Vec<BendState> {
    (0..=9)
        .map(|i| {
            let a = 10.0 * i as f64;
            if dof == 1 {
                BendState::Hinged { angle1: a, angle2: 0.0 }
            } else {
                BendState::Hinged { angle1: 0.0, angle2: a }
            }
        })
        .collect()
}

/// Std giving `snr_db` on the mean absolute rest voltage.
fn calibrated(actuator: &Actuator, snr_db: f64, seed: u64) -> NoiseModel {
    let cfg = SweepConfig::default();
    let sigma = actuator.conductivity(&actuator.rest_state(), &cfg.surrogate, cfg.sigma0).unwrap();
    let v = actuator.solver(&sigma).unwrap().reference_voltages().unwrap();
    let mean = v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64;
    let n = cfg.acquisition.n_samples().unwrap();
    NoiseModel::default().with_std(noise_std_for_snr(mean, snr_db, n)).with_seed(seed)
}

#[test]
fn ten_states_three_repeats_give_thirty_frames() {
    let t = run_static_sweep(&hinged(), &angle_sweep(2), &quiet()).unwrap();
    assert_eq!(t.records.len(), 30);
    assert_eq!(t.baseline_frames.len(), 3);
    assert!(t.records.iter().all(|r| r.frame.len() == 9));
    assert_eq!(t.mean_dv_by_state().len(), 10);
}

#[test]
fn rest_state_without_noise_gives_exactly_zero_change() {
    let t = run_static_sweep(&hinged(), &[BendState::rest_hinged(); 2], &quiet()).unwrap();
    for r in &t.records {
        assert!(r.dv.iter().all(|&v| v == 0.0), "{:?}", r.dv);
    }
    let frames: Vec<_> = t.records.iter().map(|r| r.frame.clone()).collect();
    assert!(frames.windows(2).all(|w| w[0].amplitudes == w[1].amplitudes));
}

#[test]
fn sweeps_are_deterministic_per_seed() {
    let a = hinged();
    let states = [BendState::Hinged { angle1: 40.0, angle2: 20.0 }];
    let cfg = |seed| SweepConfig {
        noise: calibrated(&a, 66.0, seed),
        ..Default::default()
    };
    let x = run_static_sweep(&a, &states, &cfg(5)).unwrap();
    let y = run_static_sweep(&a, &states, &cfg(5)).unwrap();
    let z = run_static_sweep(&a, &states, &cfg(6)).unwrap();
    assert_eq!(x, y);
    assert_ne!(x.records[0].frame, z.records[0].frame);
}

#[test]
fn repeat_spread_matches_configured_snr() {
    let a = hinged();
    let noise = calibrated(&a, 66.0, 3);
    let cfg = SweepConfig {
        noise,
        repeats: 60,
        ..Default::default()
    };
    let t = run_static_sweep(&a, &[BendState::Hinged { angle1: 30.0, angle2: 0.0 }], &cfg).unwrap();
    let frames: Vec<_> = t.records.iter().map(|r| r.frame.clone()).collect();
    let snr = compute_snr(&frames).unwrap();
    let n = cfg.acquisition.n_samples().unwrap();
    for (m, s) in snr.iter().enumerate() {
        let amp = frames[0].amplitudes[m];
        let expected = 20.0 * (amp / (noise.std * (2.0 / n as f64).sqrt())).log10();
        assert!((s - expected).abs() < 1.5, "measurement {m}: {s} vs {expected}");
    }
}

#[test]
fn angle_two_response_is_near_linear() {
    let t = run_static_sweep(&hinged(), &angle_sweep(2), &quiet()).unwrap();
    let means = t.mean_dv_by_state();
    let angles: Vec<f64> = means.iter().map(|(s, _)| s.values()[1]).collect();
    let last = &means.last().unwrap().1;
    let mut order: Vec<usize> = (0..last.len()).collect();
    order.sort_by(|&a, &b| last[b].abs().total_cmp(&last[a].abs()));
    for &m in &order[..2] {
        let y: Vec<f64> = means.iter().map(|(_, dv)| dv[m]).collect();
        let r2 = linear_fit_r2(&angles, &y);
        assert!(r2 >= 0.8, "measurement {m}: R² {r2}");
        assert!(y.windows(2).all(|w| (w[1] - w[0]) * (y[9] - y[0]) >= 0.0), "not monotone: {y:?}");
    }
}

#[test]
fn single_dof_motion_stays_isolated() {
    let a = hinged();
    let mut states = angle_sweep(1);
    states.extend(angle_sweep(2));
    let t = run_static_sweep(&a, &states, &quiet()).unwrap();
    for (s, dv) in t.mean_dv_by_state() {
        if let Some(r) = cross_dof_ratio(&a, &s, &dv) {
            assert!(r < 0.05, "{}: {r}", s.label());
        }
    }
    let f = finger();
    let states: Vec<BendState> = [0.1, 0.2, 0.3, 0.4]
        .iter()
        .flat_map(|&p| [BendState::Finger { p1: p, p2: 0.0 }, BendState::Finger { p1: 0.0, p2: p }])
        .collect();
    let t = run_static_sweep(&f, &states, &quiet()).unwrap();
    for (s, dv) in t.mean_dv_by_state() {
        let r = cross_dof_ratio(&f, &s, &dv).unwrap();
        assert!(r < 0.05, "{}: {r}", s.label());
    }
}

#[test]
fn images_follow_the_moving_hinge() {
    let a = hinged();
    let mut states = angle_sweep(1)[1..].to_vec();
    states.extend(&angle_sweep(2)[1..]);
    let cfg = SweepConfig {
        noise: calibrated(&a, 66.0, 1),
        ..Default::default()
    };
    let inverse = InverseSettings::for_actuator(a.kind());
    let (trace, setup) = run_reconstruction_experiment(&a, &states, &cfg, &inverse).unwrap();
    assert!(setup.cv.is_some());
    let sign = |s: &BendState| {
        let dv = trace.mean_dv_by_state().into_iter().find(|(x, _)| x == s).unwrap().1;
        let (_, _, loc) = setup.image(&dv).unwrap();
        (loc.dominant_chamber, loc.dominant_sign())
    };
    // angle 1: conductivity up at small angles, down at large ones
    assert_eq!(sign(&BendState::Hinged { angle1: 20.0, angle2: 0.0 }), (CHAMBER_1, 1.0));
    assert_eq!(sign(&BendState::Hinged { angle1: 90.0, angle2: 0.0 }), (CHAMBER_1, -1.0));
    // angle 2: a decrease in the nearest chamber
    for d in [30.0, 60.0, 90.0] {
        assert_eq!(sign(&BendState::Hinged { angle1: 0.0, angle2: d }), (CHAMBER_3, -1.0));
    }
    for r in &trace.records {
        let loc = r.localization.as_ref().unwrap();
        let expect = if r.state.values()[0] > 0.0 { [HINGE_1, CHAMBER_1] } else { [HINGE_2, CHAMBER_3] };
        assert!(expect.contains(&loc.region), "{}: region {}", r.state.label(), loc.region);
    }
}

#[test]
fn finger_pressurization_changes_only_its_chamber() {
    let f = finger();
    let t = run_static_sweep(&f, &[BendState::Finger { p1: 0.4, p2: 0.0 }], &quiet()).unwrap();
    let dv = &t.mean_dv_by_state()[0].1;
    assert!(dv[1].abs() < 0.05 * dv[0].abs(), "{dv:?}");
    assert!(dv[0] > 0.0, "lower conductivity raises the transfer voltage");
}

#[test]
fn surrogate_is_identity_at_rest_and_local_per_hinge() {
    let mesh = generate_hinged_actuator_mesh(&HingedActuatorParams { edge_length: 4.0, ..Default::default() }).unwrap();
    let base = ConductivityField::uniform(&mesh, 0.2).unwrap();
    let p = SurrogateParams::default();
    let rest = bend_to_conductivity(&mesh, &base, &BendState::rest_hinged(), &p).unwrap();
    assert_eq!(rest, base);
    let bent = bend_to_conductivity(&mesh, &base, &BendState::Hinged { angle1: 90.0, angle2: 0.0 }, &p).unwrap();
    let g_min = (0..=90).map(|a| p.hinge1.g(a as f64)).fold(f64::INFINITY, f64::min);
    for (k, &t) in mesh.region_tags().iter().enumerate() {
        let v = bent.values()[k];
        match t {
            HINGE_1 => assert!((v - 0.2 * g_min).abs() < 1e-15),
            HINGE_2 | CHAMBER_2 | CHAMBER_3 => assert_eq!(v, 0.2),
            _ => {}
        }
    }
}

#[test]
fn phantom_is_frequency_invariant() {
    let acq = Acquisition::default();
    let n = acq.n_samples().unwrap();
    let quiet = run_resistor_phantom(
        &ResistorPhantom::new(vec![300.0]).unwrap(),
        &PHANTOM_FREQUENCIES,
        PHANTOM_CURRENT,
        &acq,
        &NoiseModel::none(),
        1,
    )
    .unwrap();
    assert!(quiet.max_spread() < 1e-6);

    let loads = vec![171.0, 476.0, 2300.0, 4200.0];
    let amp = PHANTOM_CURRENT * 476.0;
    let noise = NoiseModel::default().with_std(noise_std_for_snr(amp, 66.0, n)).with_seed(9);
    let noisy = run_resistor_phantom(&ResistorPhantom::new(loads).unwrap(), &PHANTOM_FREQUENCIES, PHANTOM_CURRENT, &acq, &noise, 100).unwrap();
    assert!(noisy.max_spread() < 0.005, "{:?}", noisy.spread);
}

#[test]
fn phantom_snr_tracks_the_noise_model() {
    let acq = Acquisition::default();
    let n = acq.n_samples().unwrap();
    let phantom = ResistorPhantom::new(vec![171.0, 476.0]).unwrap();
    let run = |noise: NoiseModel| {
        let r = run_resistor_phantom(&phantom, &PHANTOM_FREQUENCIES, PHANTOM_CURRENT, &acq, &noise, 100).unwrap();
        let s = r.mean_snr();
        s[1].unwrap() - s[0].unwrap()
    };
    // a fixed floor makes SNR follow the load: 20·log10(476/171) ≈ 8.9 dB
    let floor = NoiseModel::none().with_std(noise_std_for_snr(PHANTOM_CURRENT * 300.0, 66.0, n)).with_seed(4);
    let diff = run(floor);
    assert!((diff - 20.0 * (476.0f64 / 171.0).log10()).abs() < 1.0, "{diff}");
    // amplitude-proportional noise keeps the two loads within 3 dB
    let relative = NoiseModel {
        relative_std: relative_std_for_snr(66.0, n),
        ..NoiseModel::none().with_seed(4)
    };
    let diff = run(relative);
    assert!(diff.abs() < 3.0, "{diff}");
}

#[test]
fn localization_trials_hit_their_chambers() {
    for a in [hinged(), finger()] {
        let cfg = SweepConfig {
            noise: calibrated(&a, 66.0, 2),
            ..Default::default()
        };
        let sigma = a.conductivity(&a.rest_state(), &cfg.surrogate, cfg.sigma0).unwrap();
        let solver = a.solver(&sigma).unwrap();
        let v = solver.reference_voltages().unwrap();
        let setup = ImagingSetup::new(&a, &solver, &v, cfg.sigma0, &InverseSettings::for_actuator(a.kind())).unwrap();
        let trials = run_localization_trials(&a, &setup, &cfg, 12, 77).unwrap();
        let hits = trials.iter().filter(|t| t.hit()).count();
        assert_eq!(hits, 12, "{:?}", a.kind());
    }
}
