//! Resistor phantom: Ohmic loads driven at several frequencies, bypassing
//! the field solver.

use crate::error::{Error, Result};
use crate::fdm::{acquire_frames, compute_snr, Acquisition, NoiseModel};
use crate::forward::{Protocol, DEFAULT_AMPLITUDE};

/// Six equally spaced tones from 2 to 12 kHz.
pub const PHANTOM_FREQUENCIES: [f64; 6] = [2e3, 4e3, 6e3, 8e3, 10e3, 12e3];

/// Resistive loads, Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistorPhantom {
    loads: Vec<f64>,
}

impl ResistorPhantom {
    pub fn new(loads: Vec<f64>) -> Result<Self> {
        if loads.is_empty() {
            return Err(Error::invalid("resistor phantom needs at least one load"));
        }
        if let Some(r) = loads.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::invalid(format!("load {r} must be positive")));
        }
        Ok(ResistorPhantom { loads })
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }
}

/// Load estimates per load and frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomReport {
    pub frequencies: Vec<f64>,
    pub loads: Vec<f64>,
    /// `estimates[l][f]`: mean demodulated load, Ω.
    pub estimates: Vec<Vec<f64>>,
    /// `snr_db[l][f]`; `None` with fewer than the SNR minimum of repeats.
    pub snr_db: Vec<Vec<Option<f64>>>,
    /// Per load, `(max − min)/mean` of the estimates across frequencies.
    pub spread: Vec<f64>,
}

impl PhantomReport {
    pub fn max_spread(&self) -> f64 {
        self.spread.iter().copied().fold(0.0, f64::max)
    }

    /// Mean SNR of each load over frequencies, dB.
    pub fn mean_snr(&self) -> Vec<Option<f64>> {
        self.snr_db
            .iter()
            .map(|row| {
                let v: Option<Vec<f64>> = row.iter().copied().collect();
                v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect()
    }
}

/// Demodulated load estimate `|V|/I` per load and frequency; load `l` at
/// frequency `f` uses noise streams from `(l·F + f)·repeats`.
pub fn run_resistor_phantom(
    phantom: &ResistorPhantom,
    frequencies: &[f64],
    current: f64,
    acquisition: &Acquisition,
    noise: &NoiseModel,
    repeats: usize,
) -> Result<PhantomReport> {
    if frequencies.is_empty() {
        return Err(Error::invalid("no phantom frequencies"));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    let mut estimates = Vec::new();
    let mut snr_db = Vec::new();
    let mut spread = Vec::new();
    for (l, &r) in phantom.loads.iter().enumerate() {
        let (mut est_row, mut snr_row) = (Vec::new(), Vec::new());
        for (fi, &f) in frequencies.iter().enumerate() {
            let protocol = Protocol::two_electrode(f)?.with_amplitude(current)?;
            let first = ((l * frequencies.len() + fi) * repeats) as u64;
            let frames = acquire_frames(&protocol, &[current * r], acquisition, noise, first, repeats)?;
            let mean_amp = frames.iter().map(|fr| fr.amplitudes[0]).sum::<f64>() / repeats as f64;
            est_row.push(mean_amp / current);
            snr_row.push(compute_snr(&frames).ok().map(|s| s[0]));
        }
        let max = est_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = est_row.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = est_row.iter().sum::<f64>() / est_row.len() as f64;
        spread.push((max - min) / mean);
        estimates.push(est_row);
        snr_db.push(snr_row);
    }
    Ok(PhantomReport {
        frequencies: frequencies.to_vec(),
        loads: phantom.loads.clone(),
        estimates,
        snr_db,
        spread,
    })
}

/// Default drive for the phantom, A.
pub const PHANTOM_CURRENT: f64 = DEFAULT_AMPLITUDE;
