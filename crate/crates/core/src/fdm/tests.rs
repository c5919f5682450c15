use super::*;
use crate::forward::{Injection, InjectionTone, MeasurementPair, DEFAULT_AMPLITUDE};
use proptest::prelude::*;

fn single_tone(freq: f64) -> Protocol {
    Protocol::new(vec![Injection {
        tone: InjectionTone::new(1, 2, DEFAULT_AMPLITUDE, freq).unwrap(),
        measurements: vec![MeasurementPair::new(1, 2)],
    }])
    .unwrap()
}

fn tone(amplitude: f64, f: f64, phase: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| amplitude * (2.0 * PI * f * k as f64 / DEFAULT_SAMPLE_RATE + phase).sin())
        .collect()
}

#[test]
fn paper_tones_are_orthogonal_at_frame_and_floor_windows() {
    let r = check_orthogonality(&[2e3, 4e3, 6e3], 0.020, DEFAULT_SAMPLE_RATE);
    assert!(r.passes);
    assert_eq!(r.periods, vec![40.0, 80.0, 120.0]);
    assert!(r.worst_leakage_db < -120.0);
    let r = check_orthogonality(&[2e3, 4e3, 6e3], 0.003, DEFAULT_SAMPLE_RATE);
    assert!(r.passes);
    for (p, want) in r.periods.iter().zip([6.0, 12.0, 18.0]) {
        assert!((p - want).abs() < 1e-9);
    }
}

#[test]
fn off_grid_tone_fails_with_leakage() {
    // 2.1 kHz completes 42 periods in 20 ms, so it only fails on a 3 ms window
    assert!(check_orthogonality(&[2.1e3, 4e3], 0.020, DEFAULT_SAMPLE_RATE).passes);
    let r = check_orthogonality(&[2.1e3, 4e3], 0.003, DEFAULT_SAMPLE_RATE);
    assert!(!r.passes);
    assert!(r.offending.contains(&2.1e3));
    assert!(r.worst_leakage_db > -120.0 && r.worst_leakage_db < 0.0);
    let r = check_orthogonality(&[2.01e3, 4e3], 0.020, DEFAULT_SAMPLE_RATE);
    assert!(!r.passes);
    assert!(r.worst_leakage_db > -120.0 && r.worst_leakage_db < 0.0);
}

#[test]
fn duplicate_frequencies_fail() {
    assert!(!check_orthogonality(&[2e3, 2e3], 0.02, DEFAULT_SAMPLE_RATE).passes);
}

#[test]
fn ten_khz_separation_passes_at_every_tenth_millisecond() {
    for k in 30..=2500u32 {
        let window = k as f64 * 1e-4;
        let r = check_orthogonality(&[10e3, 20e3], window, DEFAULT_SAMPLE_RATE);
        assert!(r.passes, "window {window}");
        if k % 97 == 0 {
            assert!(r.worst_leakage_db < -120.0, "window {window}: {}", r.worst_leakage_db);
        }
    }
}

#[test]
fn zero_input_gives_zero_samples() {
    let p = Protocol::hinged_default();
    let ts = synthesize_frame(&p, &[0.0; 9], &Acquisition::default(), &NoiseModel::none(), 0).unwrap();
    assert_eq!(ts.n_channels(), 3);
    assert!(ts.channels.iter().flatten().all(|&v| v == 0.0));
    let f = demodulate_frame(&ts, &p, DEFAULT_WINDOW, false).unwrap();
    assert_eq!(f.amplitudes, vec![0.0; 9]);
}

#[test]
fn single_tone_rms() {
    let ts = synthesize_frame(&single_tone(2e3), &[1.0], &Acquisition::default(), &NoiseModel::none(), 0).unwrap();
    assert_eq!(ts.n_samples(), 1000);
    let rms = (ts.channels[0].iter().map(|v| v * v).sum::<f64>() / 1000.0).sqrt();
    assert!((rms - 0.5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn pure_tone_amplitude_and_phase() {
    let ts = TimeSeries::new(DEFAULT_SAMPLE_RATE, 0.0, vec![tone(1.0, 2e3, 0.3, 1000)]).unwrap();
    let d = demodulate(&ts, 2e3, 0.02, false).unwrap();
    assert!((d.channels[0].amplitude - 1.0).abs() < 1e-9);
    assert!((d.channels[0].phase - 0.3).abs() < 1e-9);
    assert!(d.leakage_warning_db.is_none());
}

#[test]
fn second_tone_does_not_leak() {
    let x: Vec<f64> = tone(1.0, 2e3, 0.0, 1000)
        .iter()
        .zip(tone(0.5, 4e3, 1.1, 1000))
        .map(|(a, b)| a + b)
        .collect();
    let ts = TimeSeries::new(DEFAULT_SAMPLE_RATE, 0.0, vec![x]).unwrap();
    let d = demodulate(&ts, 2e3, 0.02, false).unwrap();
    assert!((d.channels[0].amplitude - 1.0).abs() < 1e-9);
    let d = demodulate(&ts, 4e3, 0.02, false).unwrap();
    assert!((d.channels[0].amplitude - 0.5).abs() < 1e-9);
}

#[test]
fn non_integer_window_needs_override() {
    let ts = TimeSeries::new(DEFAULT_SAMPLE_RATE, 0.0, vec![tone(1.0, 2.01e3, 0.0, 1000)]).unwrap();
    assert!(demodulate(&ts, 2.01e3, 0.02, false).is_err());
    let d = demodulate(&ts, 2.01e3, 0.02, true).unwrap();
    assert!(d.leakage_warning_db.unwrap() > -120.0);
    assert!(demodulate(&ts, 2e3, 0.04, false).is_err());
}

#[test]
fn quantization_error_is_small() {
    let noise = NoiseModel::default();
    let ts = synthesize_frame(&single_tone(2e3), &[1.0], &Acquisition::default(), &noise, 0).unwrap();
    let step = quantization_step(16, 10.0);
    assert!(ts.channels[0].iter().all(|v| ((v / step) - (v / step).round()).abs() < 1e-6));
    let d = demodulate(&ts, 2e3, 0.02, false).unwrap();
    assert!((d.channels[0].amplitude - 1.0).abs() < 1e-4);
}

#[test]
fn clipping_at_full_scale() {
    let noise = NoiseModel::default();
    let ts = synthesize_frame(&single_tone(2e3), &[20.0], &Acquisition::default(), &noise, 0).unwrap();
    assert!(ts.channels[0].iter().all(|v| v.abs() <= 10.0));
}

#[test]
fn hinged_frame_round_trip_keeps_sign() {
    let p = Protocol::hinged_default();
    let v: Vec<f64> = (0..9).map(|i| (i as f64 - 4.2) * 1e-3).collect();
    let ts = synthesize_frame(&p, &v, &Acquisition::default(), &NoiseModel::none(), 0).unwrap();
    let f = demodulate_frame(&ts, &p, DEFAULT_WINDOW, false).unwrap();
    assert_eq!(f.len(), 9);
    for (got, want) in f.signed().iter().zip(&v) {
        assert!((got - want).abs() <= 1e-9 * want.abs());
    }
}

#[test]
fn nyquist_and_length_checks() {
    let p = single_tone(30e3);
    assert!(synthesize_frame(&p, &[1.0], &Acquisition::default(), &NoiseModel::none(), 0).is_err());
    let p = Protocol::hinged_default();
    assert!(synthesize_frame(&p, &[1.0; 3], &Acquisition::default(), &NoiseModel::none(), 0).is_err());
    let acq = Acquisition::default().with_window(0.02001);
    assert!(synthesize_frame(&p, &[1.0; 9], &acq, &NoiseModel::none(), 0).is_err());
}

#[test]
fn seeded_noise_is_reproducible_and_varies_by_frame() {
    let p = Protocol::hinged_default();
    let noise = NoiseModel::none().with_std(1e-3).with_seed(42);
    let acq = Acquisition::default();
    let a = synthesize_frame(&p, &[1e-2; 9], &acq, &noise, 3).unwrap();
    let b = synthesize_frame(&p, &[1e-2; 9], &acq, &noise, 3).unwrap();
    let c = synthesize_frame(&p, &[1e-2; 9], &acq, &noise, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.channels, c.channels);
}

#[test]
fn snr_of_identical_frames_is_infinite() {
    let p = Protocol::hinged_default();
    let frames = acquire_frames(&p, &[1e-2; 9], &Acquisition::default(), &NoiseModel::none(), 0, 10).unwrap();
    assert!(compute_snr(&frames).unwrap().iter().all(|s| *s == f64::INFINITY));
    assert!(compute_snr(&frames[..9]).is_err());
}

#[test]
fn doubling_noise_costs_six_db() {
    let p = single_tone(2e3);
    let acq = Acquisition::default();
    let base = NoiseModel::none().with_std(1e-3).with_seed(9);
    let snr = |n: &NoiseModel| compute_snr(&acquire_frames(&p, &[0.1], &acq, n, 0, 200).unwrap()).unwrap()[0];
    let drop = snr(&base) - snr(&base.with_std(2e-3));
    assert!((drop - 6.02).abs() < 0.3, "{drop}");
}

#[test]
fn analytic_noise_calibration_hits_target() {
    let p = single_tone(2e3);
    let acq = Acquisition::default();
    let std = noise_std_for_snr(0.05, 66.0, 1000);
    let noise = NoiseModel::none().with_std(std).with_seed(1);
    let snr = compute_snr(&acquire_frames(&p, &[0.05], &acq, &noise, 0, 400).unwrap()).unwrap()[0];
    assert!((snr - 66.0).abs() < 1.0, "{snr}");
}

#[test]
fn amplitude_variance_scales_inversely_with_window() {
    let p = single_tone(2e3);
    let noise = NoiseModel::none().with_std(1e-2).with_seed(5);
    let var = |w: f64| {
        let acq = Acquisition::default().with_window(w);
        let f = acquire_frames(&p, &[0.1], &acq, &noise, 0, 400).unwrap();
        let a: Vec<f64> = f.iter().map(|f| f.amplitudes[0]).collect();
        let m = a.iter().sum::<f64>() / a.len() as f64;
        a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (a.len() - 1) as f64
    };
    let (v3, v30) = (var(0.003), var(0.030));
    let ratio = v3 / v30;
    assert!((ratio / 10.0 - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn relative_noise_scales_with_signal() {
    let p = single_tone(2e3);
    let acq = Acquisition::default();
    let noise = NoiseModel {
        relative_std: 0.01,
        ..NoiseModel::none()
    };
    let snr = |v: f64| compute_snr(&acquire_frames(&p, &[v], &acq, &noise, 0, 200).unwrap()).unwrap()[0];
    assert!((snr(0.01) - snr(1.0)).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn synthesis_then_demodulation_recovers_voltages(
        v in proptest::collection::vec(-1.0f64..1.0, 9),
        periods in 1u32..20,
    ) {
        let p = Protocol::hinged_default();
        // 2 kHz base tone: one period is 0.5 ms
        let acq = Acquisition::default().with_window(periods as f64 * 0.5e-3);
        prop_assume!(acq.n_samples().is_ok());
        let ts = synthesize_frame(&p, &v, &acq, &NoiseModel::none(), 0).unwrap();
        let f = demodulate_frame(&ts, &p, acq.window, false).unwrap();
        for (got, want) in f.signed().iter().zip(&v) {
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-3));
        }
    }
}
