//! Injection/measurement protocols and their text file format.
//!
//! ```text
//! EITPROT 1
//! inject <src> <snk> <amp_uA> <freq_hz>
//! measure <pos> <neg>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Default drive amplitude, 165 µA.
pub const DEFAULT_AMPLITUDE: f64 = 165e-6;
pub const MIN_FREQUENCY: f64 = 10.0;
pub const MAX_FREQUENCY: f64 = 100e3;

/// One current source: `amplitude` amperes from `source` to `sink` at `frequency`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionTone {
    pub source: usize,
    pub sink: usize,
    pub amplitude: f64,
    pub frequency: f64,
}

impl InjectionTone {
    pub fn new(source: usize, sink: usize, amplitude: f64, frequency: f64) -> Result<Self> {
        let tone = InjectionTone {
            source,
            sink,
            amplitude,
            frequency,
        };
        tone.validate()?;
        Ok(tone)
    }

    pub fn validate(&self) -> Result<()> {
        if self.source == self.sink {
            return Err(Error::invalid(format!(
                "injection source and sink are both electrode {}",
                self.source
            )));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::invalid(format!(
                "injection amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if !(MIN_FREQUENCY..=MAX_FREQUENCY).contains(&self.frequency) {
            return Err(Error::invalid(format!(
                "injection frequency {} Hz outside {MIN_FREQUENCY}-{MAX_FREQUENCY} Hz",
                self.frequency
            )));
        }
        Ok(())
    }
}

/// Differential voltage `V_positive - V_negative`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementPair {
    pub positive: usize,
    pub negative: usize,
}

impl MeasurementPair {
    pub fn new(positive: usize, negative: usize) -> Self {
        MeasurementPair { positive, negative }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub tone: InjectionTone,
    pub measurements: Vec<MeasurementPair>,
}

/// A flat measurement: index of its injection plus the electrode pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub injection: usize,
    pub pair: MeasurementPair,
}

/// Simultaneous injections and the measurement pairs read for each.
/// Measurements are indexed injection-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    injections: Vec<Injection>,
}

impl Protocol {
    pub fn new(injections: Vec<Injection>) -> Result<Self> {
        if injections.is_empty() {
            return Err(Error::invalid("protocol has no injections"));
        }
        for inj in &injections {
            inj.tone.validate()?;
            if inj.measurements.is_empty() {
                return Err(Error::invalid(format!(
                    "injection {}-{} has no measurements",
                    inj.tone.source, inj.tone.sink
                )));
            }
            for m in &inj.measurements {
                if m.positive == m.negative {
                    return Err(Error::invalid(format!(
                        "measurement pair uses electrode {} twice",
                        m.positive
                    )));
                }
            }
        }
        Ok(Protocol { injections })
    }

    /// Double-hinge actuator: injections 1-6, 2-3, 4-5 at 2, 4 and 6 kHz,
    /// each read on pairs 2-5, 1-4 and 3-6.
    pub fn hinged_default() -> Self {
        let pairs = vec![
            MeasurementPair::new(2, 5),
            MeasurementPair::new(1, 4),
            MeasurementPair::new(3, 6),
        ];
        let inj = |s, k, f| Injection {
            tone: InjectionTone {
                source: s,
                sink: k,
                amplitude: DEFAULT_AMPLITUDE,
                frequency: f,
            },
            measurements: pairs.clone(),
        };
        Protocol::new(vec![inj(1, 6, 2e3), inj(2, 3, 4e3), inj(4, 5, 6e3)]).unwrap()
    }

    /// Two-electrode impedance measurement on one finger chamber.
    pub fn two_electrode(frequency: f64) -> Result<Self> {
        Protocol::new(vec![Injection {
            tone: InjectionTone::new(1, 2, DEFAULT_AMPLITUDE, frequency)?,
            measurements: vec![MeasurementPair::new(1, 2)],
        }])
    }

    pub fn injections(&self) -> &[Injection] {
        &self.injections
    }

    pub fn measurement_count(&self) -> usize {
        self.injections.iter().map(|i| i.measurements.len()).sum()
    }

    pub fn measurements(&self) -> Vec<Measurement> {
        self.injections
            .iter()
            .enumerate()
            .flat_map(|(i, inj)| {
                inj.measurements.iter().map(move |&pair| Measurement {
                    injection: i,
                    pair,
                })
            })
            .collect()
    }

    /// Flat measurement indices belonging to injection `i`.
    pub fn measurement_range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.injections[..i].iter().map(|j| j.measurements.len()).sum();
        start..start + self.injections[i].measurements.len()
    }

    /// Distinct measurement pairs in first-appearance order; these are the
    /// recorded channels of a multiplexed acquisition.
    pub fn channels(&self) -> Vec<MeasurementPair> {
        let mut out: Vec<MeasurementPair> = Vec::new();
        for inj in &self.injections {
            for m in &inj.measurements {
                if !out.contains(m) {
                    out.push(*m);
                }
            }
        }
        out
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.injections.iter().map(|i| i.tone.frequency).collect()
    }

    /// Index of the injection driving electrodes `source -> sink`.
    pub fn find_injection(&self, source: usize, sink: usize) -> Option<usize> {
        self.injections
            .iter()
            .position(|i| i.tone.source == source && i.tone.sink == sink)
    }

    /// Same protocol with every injection amplitude replaced.
    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        let mut p = self.clone();
        for inj in &mut p.injections {
            inj.tone.amplitude = amplitude;
        }
        Protocol::new(p.injections)
    }

    /// Checks that every referenced electrode exists on `mesh`.
    pub fn validate_against(&self, mesh: &Mesh) -> Result<()> {
        for inj in &self.injections {
            let ids = [inj.tone.source, inj.tone.sink]
                .into_iter()
                .chain(inj.measurements.iter().flat_map(|m| [m.positive, m.negative]));
            for id in ids {
                if mesh.electrode(id).is_none() {
                    return Err(Error::invalid(format!(
                        "protocol references electrode {id}, which the mesh does not have"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn content_hash(&self) -> String {
        crate::hash::sha256_hex(write_protocol(self).as_bytes())
    }
}

pub fn write_protocol(p: &Protocol) -> String {
    let mut out = String::from("EITPROT 1\n");
    for inj in &p.injections {
        let t = &inj.tone;
        writeln!(
            out,
            "inject {} {} {} {}",
            t.source,
            t.sink,
            t.amplitude * 1e6,
            t.frequency
        )
        .unwrap();
        for m in &inj.measurements {
            writeln!(out, "measure {} {}", m.positive, m.negative).unwrap();
        }
    }
    out
}

pub fn parse_protocol(text: &str, path: impl AsRef<Path>) -> Result<Protocol> {
    let path = path.as_ref();
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut injections: Vec<Injection> = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        if !seen_header {
            if t != ["EITPROT", "1"] {
                return Err(err(line, "missing `EITPROT 1` header".into()));
            }
            seen_header = true;
            continue;
        }
        let num = |tok: &str, field: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| err(line, format!("invalid {field} `{tok}`")))
        };
        let id = |tok: &str| -> Result<usize> {
            tok.parse::<usize>()
                .map_err(|_| err(line, format!("invalid electrode id `{tok}`")))
        };
        match (t[0], t.len()) {
            ("inject", 5) => injections.push(Injection {
                tone: InjectionTone {
                    source: id(t[1])?,
                    sink: id(t[2])?,
                    amplitude: num(t[3], "amplitude")? * 1e-6,
                    frequency: num(t[4], "frequency")?,
                },
                measurements: Vec::new(),
            }),
            ("measure", 3) => {
                let inj = injections
                    .last_mut()
                    .ok_or_else(|| err(line, "`measure` before any `inject`".into()))?;
                inj.measurements.push(MeasurementPair::new(id(t[1])?, id(t[2])?));
            }
            _ => {
                return Err(err(
                    line,
                    format!("expected `inject <src> <snk> <amp_uA> <freq_hz>` or `measure <pos> <neg>`, found `{}`", t.join(" ")),
                ))
            }
        }
    }
    if !seen_header {
        return Err(err(0, "empty protocol file".into()));
    }
    Protocol::new(injections).map_err(|e| err(0, e.to_string()))
}

pub fn load_protocol(path: impl AsRef<Path>) -> Result<Protocol> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_protocol(&text, path)
}

pub fn save_protocol(p: &Protocol, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_protocol(p)).map_err(|e| Error::io(path, e))
}
