//! Frequency-division multiplexed acquisition: multi-tone synthesis,
//! lock-in demodulation, SNR and tone orthogonality.

mod io;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use io::{
    load_frames_csv, load_time_series, parse_frames_csv, parse_time_series, save_frames_csv,
    save_time_series, write_frames_csv, write_time_series,
};

use crate::error::{Error, Result};
use crate::forward::Protocol;

pub const DEFAULT_SAMPLE_RATE: f64 = 50_000.0;
/// One frame, 20 ms.
pub const DEFAULT_WINDOW: f64 = 0.020;
pub const MIN_WINDOW: f64 = 0.003;
pub const MAX_WINDOW: f64 = 0.250;
pub const ADC_BITS: u32 = 16;
pub const ADC_FULL_SCALE: f64 = 10.0;
/// Fewest frames accepted by [`compute_snr`].
pub const MIN_SNR_FRAMES: usize = 10;

const PERIOD_TOLERANCE: f64 = 1e-9;

/// Step of a `bits`-bit converter spanning `±full_scale`.
pub fn quantization_step(bits: u32, full_scale: f64) -> f64 {
    2.0 * full_scale / 2f64.powi(bits as i32)
}

/// Sampled waveforms, one channel per recorded measurement pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sample_rate: f64,
    pub start_time: f64,
    pub channels: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, start_time: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if let Some(c) = channels.first() {
            if channels.iter().any(|o| o.len() != c.len()) {
                return Err(Error::invalid("time series channels differ in length"));
            }
        }
        Ok(TimeSeries {
            sample_rate,
            start_time,
            channels,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }
}

/// Additive white noise plus ADC quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// White noise std on every channel, V.
    pub std: f64,
    /// Extra white noise std as a fraction of the channel's summed tone amplitude.
    pub relative_std: f64,
    /// Quantization step, V; 0 disables quantization.
    pub quantization_step: f64,
    /// Clipping level, V.
    pub full_scale: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            std: 0.0,
            relative_std: 0.0,
            quantization_step: quantization_step(ADC_BITS, ADC_FULL_SCALE),
            full_scale: ADC_FULL_SCALE,
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// No noise, no quantization.
    pub fn none() -> Self {
        NoiseModel {
            quantization_step: 0.0,
            full_scale: f64::INFINITY,
            ..Default::default()
        }
    }

    pub fn with_std(self, std: f64) -> Self {
        NoiseModel { std, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        NoiseModel { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("std", self.std),
            ("relative_std", self.relative_std),
            ("quantization_step", self.quantization_step),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("noise {name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.full_scale > 0.0) {
            return Err(Error::invalid("full scale must be positive"));
        }
        Ok(())
    }

    fn is_silent(&self) -> bool {
        self.std == 0.0 && self.relative_std == 0.0
    }
}

/// White-noise std giving amplitude SNR `snr_db` on a tone of `amplitude`
/// demodulated over `n_samples`; the lock-in amplitude std is `std·√(2/N)`.
pub fn noise_std_for_snr(amplitude: f64, snr_db: f64, n_samples: usize) -> f64 {
    amplitude.abs() / (10f64.powf(snr_db / 20.0) * (2.0 / n_samples as f64).sqrt())
}

/// Relative white-noise std giving amplitude SNR `snr_db` over `n_samples`,
/// for use as [`NoiseModel::relative_std`].
pub fn relative_std_for_snr(snr_db: f64, n_samples: usize) -> f64 {
    noise_std_for_snr(1.0, snr_db, n_samples)
}

/// Sampling setup of one acquisition frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acquisition {
    pub sample_rate: f64,
    pub window: f64,
    /// Synthesize or demodulate even when tones are not orthogonal.
    pub allow_leakage: bool,
}

impl Default for Acquisition {
    fn default() -> Self {
        Acquisition {
            sample_rate: DEFAULT_SAMPLE_RATE,
            window: DEFAULT_WINDOW,
            allow_leakage: false,
        }
    }
}

impl Acquisition {
    pub fn with_window(self, window: f64) -> Self {
        Acquisition { window, ..self }
    }

    /// Samples in one window; the window must hold a whole number of samples.
    pub fn n_samples(&self) -> Result<usize> {
        window_samples(self.sample_rate, self.window)
    }
}

fn window_samples(sample_rate: f64, window: f64) -> Result<usize> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::invalid(format!("window must be positive, got {window}")));
    }
    let n = window * sample_rate;
    if !is_whole(n) || n.round() < 1.0 {
        return Err(Error::invalid(format!(
            "window {window} s holds {n} samples at {sample_rate} Hz; need a whole number"
        )));
    }
    Ok(n.round() as usize)
}

fn is_whole(x: f64) -> bool {
    (x - x.round()).abs() <= PERIOD_TOLERANCE * x.abs().max(1.0)
}

/// Outcome of [`check_orthogonality`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalityReport {
    pub passes: bool,
    /// Periods of each frequency inside the window.
    pub periods: Vec<f64>,
    /// Frequencies or differences without a whole number of periods.
    pub offending: Vec<f64>,
    /// Worst response of any tone's lock-in to a unit tone at another
    /// frequency, dB; `-inf` when exactly zero.
    pub worst_leakage_db: f64,
}

/// Tones are orthogonal over `window` when every frequency and every
/// pairwise difference completes a whole number of periods.
pub fn check_orthogonality(frequencies: &[f64], window: f64, sample_rate: f64) -> OrthogonalityReport {
    let periods: Vec<f64> = frequencies.iter().map(|f| f * window).collect();
    let mut offending = Vec::new();
    let valid_window = window > 0.0 && window.is_finite();
    for &f in frequencies {
        if !valid_window || !is_whole(f * window) || (f * window).round() < 1.0 {
            offending.push(f);
        }
    }
    for (i, &a) in frequencies.iter().enumerate() {
        for &b in &frequencies[i + 1..] {
            let d = (a - b).abs();
            if !valid_window || !is_whole(d * window) || d == 0.0 {
                offending.push(d);
            }
        }
    }
    let worst_leakage_db = if valid_window {
        worst_leakage(frequencies, window, sample_rate)
    } else {
        0.0
    };
    OrthogonalityReport {
        passes: offending.is_empty(),
        periods,
        offending,
        worst_leakage_db,
    }
}

fn db(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        20.0 * x.log10()
    }
}

/// Largest lock-in response at one tone to a unit sine or cosine at another.
fn worst_leakage(frequencies: &[f64], window: f64, sample_rate: f64) -> f64 {
    let n = (window * sample_rate).round().max(1.0) as usize;
    let mut worst = 0.0f64;
    for (i, &fa) in frequencies.iter().enumerate() {
        for (j, &fb) in frequencies.iter().enumerate() {
            if i == j {
                continue;
            }
            for phase in [0.0, PI / 2.0] {
                let x: Vec<f64> = (0..n)
                    .map(|k| (2.0 * PI * fb * k as f64 / sample_rate + phase).sin())
                    .collect();
                let (amp, _) = lock_in(&x, fa, sample_rate);
                worst = worst.max(amp);
            }
        }
    }
    db(worst)
}

/// In-phase/quadrature correlation with `sin(2πft)`; returns (amplitude, phase)
/// for a signal `A·sin(2πft + φ)`.
fn lock_in(x: &[f64], frequency: f64, sample_rate: f64) -> (f64, f64) {
    let w = 2.0 * PI * frequency / sample_rate;
    let (mut i_acc, mut q_acc) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        let (s, c) = (w * k as f64).sin_cos();
        i_acc += v * s;
        q_acc += v * c;
    }
    let scale = 2.0 / x.len() as f64;
    let (i, q) = (i_acc * scale, q_acc * scale);
    ((i * i + q * q).sqrt(), q.atan2(i))
}

/// Amplitude and phase of one channel at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demodulated {
    pub amplitude: f64,
    pub phase: f64,
}

impl Demodulated {
    /// In-phase component; the real voltage when the phase is 0 or π.
    pub fn signed(&self) -> f64 {
        self.amplitude * self.phase.cos()
    }
}

/// Per-channel lock-in result plus the leakage warning when the window is not
/// a whole number of periods.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulation {
    pub channels: Vec<Demodulated>,
    /// Worst self-image leakage, dB, when the window is not a whole number of periods.
    pub leakage_warning_db: Option<f64>,
}

/// Lock-in demodulation of every channel over the first `window` seconds.
pub fn demodulate(ts: &TimeSeries, frequency: f64, window: f64, allow_leakage: bool) -> Result<Demodulation> {
    let n = window_samples(ts.sample_rate, window)?;
    if n > ts.n_samples() {
        return Err(Error::invalid(format!(
            "window {window} s longer than the {} s series",
            ts.duration()
        )));
    }
    if !(frequency > 0.0 && frequency < ts.sample_rate / 2.0) {
        return Err(Error::invalid(format!(
            "demodulation frequency {frequency} Hz outside (0, {}) Hz",
            ts.sample_rate / 2.0
        )));
    }
    let whole = is_whole(frequency * window);
    if !whole && !allow_leakage {
        return Err(Error::invalid(format!(
            "window {window} s holds {} periods of {frequency} Hz; need a whole number",
            frequency * window
        )));
    }
    let leakage_warning_db = (!whole).then(|| {
        let unit: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * frequency * k as f64 / ts.sample_rate).cos())
            .collect();
        let (a, _) = lock_in(&unit, frequency, ts.sample_rate);
        db((a - 1.0).abs())
    });
    let channels = ts
        .channels
        .iter()
        .map(|x| {
            let (amplitude, phase) = lock_in(&x[..n], frequency, ts.sample_rate);
            Demodulated { amplitude, phase }
        })
        .collect();
    Ok(Demodulation {
        channels,
        leakage_warning_db,
    })
}

/// One demodulated frame: amplitude and phase per protocol measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageFrame {
    pub timestamp: f64,
    pub window: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl VoltageFrame {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Real-valued voltages `amplitude·cos(phase)`.
    pub fn signed(&self) -> Vec<f64> {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(a, p)| a * p.cos())
            .collect()
    }
}

/// Channel index of every protocol measurement.
fn measurement_channels(protocol: &Protocol) -> Vec<usize> {
    let channels = protocol.channels();
    protocol
        .measurements()
        .iter()
        .map(|m| channels.iter().position(|c| *c == m.pair).expect("listed"))
        .collect()
}

/// Multi-tone waveforms for one frame. `voltages` are the real transfer
/// voltages per measurement; negative values become a phase of π.
/// Each frame index draws independent noise from the model's seed.
pub fn synthesize_frame(
    protocol: &Protocol,
    voltages: &[f64],
    acquisition: &Acquisition,
    noise: &NoiseModel,
    frame_index: u64,
) -> Result<TimeSeries> {
    if voltages.len() != protocol.measurement_count() {
        return Err(Error::invalid(format!(
            "{} voltages for {} protocol measurements",
            voltages.len(),
            protocol.measurement_count()
        )));
    }
    if voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("voltages must be finite"));
    }
    noise.validate()?;
    let n = acquisition.n_samples()?;
    let fs = acquisition.sample_rate;
    let freqs = protocol.frequencies();
    let fmax = freqs.iter().copied().fold(0.0, f64::max);
    if fs <= 2.0 * fmax {
        return Err(Error::invalid(format!(
            "sample rate {fs} Hz does not exceed twice the highest tone {fmax} Hz"
        )));
    }
    if !acquisition.allow_leakage {
        let report = check_orthogonality(&freqs, acquisition.window, fs);
        if !report.passes {
            return Err(Error::invalid(format!(
                "tones not orthogonal over {} s (offending {:?}, leakage {:.1} dB)",
                acquisition.window, report.offending, report.worst_leakage_db
            )));
        }
    }

    let chan_of = measurement_channels(protocol);
    let n_channels = protocol.channels().len();
    let mut channels = vec![vec![0.0; n]; n_channels];
    let mut tone_sum = vec![0.0; n_channels];
    for (m, meas) in protocol.measurements().iter().enumerate() {
        let v = voltages[m];
        if v == 0.0 {
            continue;
        }
        let f = freqs[meas.injection];
        let ch = chan_of[m];
        tone_sum[ch] += v.abs();
        let w = 2.0 * PI * f / fs;
        for (k, x) in channels[ch].iter_mut().enumerate() {
            *x += v * (w * k as f64).sin();
        }
    }

    if !noise.is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(frame_index);
        for (ch, x) in channels.iter_mut().enumerate() {
            let std = (noise.std * noise.std
                + (noise.relative_std * tone_sum[ch]) * (noise.relative_std * tone_sum[ch]))
                .sqrt();
            for s in x.iter_mut() {
                *s += std * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    if noise.quantization_step > 0.0 || noise.full_scale.is_finite() {
        for x in channels.iter_mut().flatten() {
            let mut v = x.clamp(-noise.full_scale, noise.full_scale);
            if noise.quantization_step > 0.0 {
                v = (v / noise.quantization_step).round() * noise.quantization_step;
            }
            *x = v;
        }
    }
    TimeSeries::new(fs, frame_index as f64 * acquisition.window, channels)
}

/// Demodulates each protocol measurement at its injection's frequency.
pub fn demodulate_frame(ts: &TimeSeries, protocol: &Protocol, window: f64, allow_leakage: bool) -> Result<VoltageFrame> {
    let n_channels = protocol.channels().len();
    if ts.n_channels() != n_channels {
        return Err(Error::invalid(format!(
            "time series has {} channels, protocol records {n_channels}",
            ts.n_channels()
        )));
    }
    let chan_of = measurement_channels(protocol);
    let per_injection = protocol
        .injections()
        .iter()
        .map(|inj| demodulate(ts, inj.tone.frequency, window, allow_leakage))
        .collect::<Result<Vec<_>>>()?;
    let (mut amplitudes, mut phases) = (Vec::new(), Vec::new());
    for (m, meas) in protocol.measurements().iter().enumerate() {
        let d = per_injection[meas.injection].channels[chan_of[m]];
        amplitudes.push(d.amplitude);
        phases.push(d.phase);
    }
    Ok(VoltageFrame {
        timestamp: ts.start_time,
        window,
        amplitudes,
        phases,
    })
}

/// `20·log10(mean/std)` of each measurement's amplitude across frames, sample
/// std; `+inf` for channels that do not vary.
pub fn compute_snr(frames: &[VoltageFrame]) -> Result<Vec<f64>> {
    if frames.len() < MIN_SNR_FRAMES {
        return Err(Error::invalid(format!(
            "SNR needs at least {MIN_SNR_FRAMES} frames, got {}",
            frames.len()
        )));
    }
    let m = frames[0].len();
    if frames.iter().any(|f| f.len() != m) {
        return Err(Error::invalid("frames differ in measurement count"));
    }
    let n = frames.len() as f64;
    Ok((0..m)
        .map(|i| {
            let first = frames[0].amplitudes[i];
            if frames.iter().all(|f| f.amplitudes[i] == first) {
                return f64::INFINITY;
            }
            let mean = frames.iter().map(|f| f.amplitudes[i]).sum::<f64>() / n;
            let var = frames
                .iter()
                .map(|f| (f.amplitudes[i] - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            20.0 * (mean.abs() / var.sqrt()).log10()
        })
        .collect())
}

/// Synthesizes and demodulates `count` consecutive frames of a static scene.
pub fn acquire_frames(
    protocol: &Protocol,
    voltages: &[f64],
    acquisition: &Acquisition,
    noise: &NoiseModel,
    first_frame: u64,
    count: usize,
) -> Result<Vec<VoltageFrame>> {
    (0..count as u64)
        .map(|i| {
            let ts = synthesize_frame(protocol, voltages, acquisition, noise, first_frame + i)?;
            demodulate_frame(&ts, protocol, acquisition.window, acquisition.allow_leakage)
        })
        .collect()
}

#[cfg(test)]
mod tests;
