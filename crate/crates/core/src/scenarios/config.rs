//! Declarative scenario files and the runner that turns them into output
//! directories.
//!
//! ```toml
//! [scenario]
//! actuator = "hinged"          # or "finger"
//! experiment = "reconstruction" # "sweep", "reconstruction" or "phantom"
//!
//! [mesh]
//! file = "hinged.mesh"          # optional, relative to the config file
//!
//! [states]
//! sweep = [{ dof = 2, start = 0, stop = 90, step = 10 }]
//!
//! [noise]
//! snr_db = 66
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::actuator::{Actuator, ActuatorKind, FINGER_FREQUENCIES};
use super::phantom::{run_resistor_phantom, ResistorPhantom, PHANTOM_FREQUENCIES};
use super::surrogate::{BendState, SurrogateParams, MAX_ANGLE, MAX_PRESSURE};
use super::sweep::{
    cross_dof_ratio, run_localization_trials, run_reconstruction_experiment, run_static_sweep,
    CvSettings, InverseSettings, LambdaChoice, ScenarioTrace, SweepConfig,
};
use crate::error::{Error, Result};
use crate::fdm::{
    noise_std_for_snr, quantization_step, write_frames_csv, Acquisition, NoiseModel, ADC_BITS,
    ADC_FULL_SCALE, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW,
};
use crate::forward::{load_protocol, Protocol, DEFAULT_AMPLITUDE, DEFAULT_CONDUCTIVITY};
use crate::inverse::{write_reconstruction_csv, write_vtk};
use crate::mesh::{
    generate_hinged_actuator_mesh, load_mesh, refine_near_electrodes, FingerChamberParams,
    HingedActuatorParams, Mesh,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuatorChoice {
    Hinged,
    Finger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Sweep,
    Reconstruction,
    Phantom,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default)]
    pub name: Option<String>,
    pub actuator: ActuatorChoice,
    pub experiment: Experiment,
    /// Rest-state conductivity, S/m.
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
}

fn default_sigma0() -> f64 {
    DEFAULT_CONDUCTIVITY
}

/// Mesh source. Without `file` the actuator's generator is used with the
/// given overrides.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub file: Option<PathBuf>,
    pub edge_length: Option<f64>,
    /// Ω·m².
    pub contact_impedance: Option<f64>,
    pub refine_radius: Option<f64>,
    pub refine_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// Hinged only.
    pub file: Option<PathBuf>,
    /// Finger only: the two chamber tones, Hz.
    pub frequencies: Option<[f64; 2]>,
    /// Drive amplitude, µA.
    pub amplitude_ua: Option<f64>,
}

/// Regular grid along one degree of freedom, the other held at `other`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub dof: u8,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    #[serde(default)]
    pub other: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatesSection {
    /// Explicit `[a, b]` pairs: angles in degrees or pressures in bar.
    #[serde(default)]
    pub list: Vec<[f64; 2]>,
    #[serde(default)]
    pub sweep: Vec<SweepSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionSection {
    pub sample_rate: f64,
    pub window: f64,
    pub repeats: usize,
    pub allow_leakage: bool,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        AcquisitionSection {
            sample_rate: DEFAULT_SAMPLE_RATE,
            window: DEFAULT_WINDOW,
            repeats: 3,
            allow_leakage: false,
        }
    }
}

/// `snr_db` calibrates a white-noise std against the mean absolute rest
/// voltage; `std` sets it directly, V.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub snr_db: Option<f64>,
    pub std: Option<f64>,
    pub relative_std: f64,
    pub quantization: bool,
    pub full_scale: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            snr_db: None,
            std: None,
            relative_std: 0.0,
            quantization: true,
            full_scale: ADC_FULL_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    /// Multiple of the largest squared singular value.
    Relative(f64),
    /// `"cv"`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseSection {
    pub lambda: LambdaSpec,
    /// Voxel edge, mm; 0 reconstructs on elements. Defaults to voxels for
    /// the hinged actuator and elements for the finger.
    pub voxel_size: Option<f64>,
    pub cv_points: usize,
    pub cv_lo_rel: f64,
    pub cv_hi_rel: f64,
    pub cv_training: usize,
    pub cv_snr_db: f64,
}

impl Default for InverseSection {
    fn default() -> Self {
        let cv = CvSettings::default();
        InverseSection {
            lambda: LambdaSpec::Named("cv".into()),
            voxel_size: None,
            cv_points: cv.points,
            cv_lo_rel: cv.lo_rel,
            cv_hi_rel: cv.hi_rel,
            cv_training: cv.training,
            cv_snr_db: cv.snr_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSection {
    /// Ω.
    pub loads: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub current_ua: f64,
    pub repeats: usize,
}

impl Default for PhantomSection {
    fn default() -> Self {
        PhantomSection {
            loads: vec![171.0, 476.0, 2300.0, 4200.0],
            frequencies: PHANTOM_FREQUENCIES.to_vec(),
            current_ua: DEFAULT_AMPLITUDE * 1e6,
            repeats: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    /// Largest allowed cross-DOF injection response ratio.
    pub isolation_max: f64,
    /// Random single-chamber trials that must all localize; 0 skips.
    pub localization_trials: usize,
    /// Largest allowed relative spread of phantom load estimates.
    pub phantom_spread_max: f64,
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            isolation_max: 0.05,
            localization_trials: 10,
            phantom_spread_max: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Write VTK files next to reconstruction CSVs.
    pub vtk: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { vtk: true }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub states: StatesSection,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub inverse: InverseSection,
    #[serde(default)]
    pub surrogate: SurrogateParams,
    #[serde(default)]
    pub phantom: PhantomSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn parse(text: &str, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn validate(&self) -> Result<()> {
        if self.noise.snr_db.is_some() && self.noise.std.is_some() {
            return Err(Error::invalid("noise: give either snr_db or std, not both"));
        }
        if let LambdaSpec::Named(n) = &self.inverse.lambda {
            if n != "cv" {
                return Err(Error::invalid(format!("inverse.lambda must be a number or \"cv\", got \"{n}\"")));
            }
        }
        for s in &self.states.sweep {
            if s.dof != 1 && s.dof != 2 {
                return Err(Error::invalid(format!("sweep dof must be 1 or 2, got {}", s.dof)));
            }
            if !(s.step > 0.0) || s.stop < s.start {
                return Err(Error::invalid("sweep needs start <= stop and a positive step"));
            }
        }
        if self.scenario.actuator == ActuatorChoice::Finger && self.protocol.file.is_some() {
            return Err(Error::invalid("the finger actuator builds its own protocol; use protocol.frequencies"));
        }
        Ok(())
    }

    /// Explicit states followed by the sweeps; defaults when neither is given.
    pub fn states(&self) -> Result<Vec<BendState>> {
        let finger = self.scenario.actuator == ActuatorChoice::Finger;
        let make = |a: f64, b: f64| {
            let s = if finger {
                BendState::Finger { p1: a, p2: b }
            } else {
                BendState::Hinged { angle1: a, angle2: b }
            };
            s.validate().map(|_| s)
        };
        let mut sweeps = self.states.sweep.clone();
        if self.states.list.is_empty() && sweeps.is_empty() {
            let (stop, step) = if finger { (MAX_PRESSURE - 0.1, 0.1) } else { (MAX_ANGLE, 10.0) };
            sweeps = [1, 2]
                .map(|dof| SweepSpec { dof, start: step, stop, step, other: 0.0 })
                .to_vec();
        }
        let mut out = Vec::new();
        for &[a, b] in &self.states.list {
            out.push(make(a, b)?);
        }
        for s in &sweeps {
            let n = ((s.stop - s.start) / s.step + 1e-9).floor() as usize;
            for i in 0..=n {
                // rounded so 0.1 steps print as 0.3, not 0.30000000000000004
                let v = ((s.start + i as f64 * s.step) * 1e9).round() / 1e9;
                out.push(if s.dof == 1 { make(v, s.other)? } else { make(s.other, v)? });
            }
        }
        Ok(out)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Builds the actuator a config describes; relative paths resolve against `base`.
pub fn build_actuator(cfg: &ScenarioConfig, base: &Path) -> Result<Actuator> {
    let m = &cfg.mesh;
    let amplitude = cfg.protocol.amplitude_ua.map(|a| a * 1e-6);
    match cfg.scenario.actuator {
        ActuatorChoice::Hinged => {
            let mesh = match &m.file {
                Some(f) => load_mesh(resolve(base, f))?,
                None => {
                    let mut p = HingedActuatorParams::default();
                    if let Some(h) = m.edge_length {
                        p.edge_length = h;
                    }
                    if let Some(z) = m.contact_impedance {
                        p.contact_impedance = z;
                    }
                    generate_hinged_actuator_mesh(&p)?
                }
            };
            let mesh = refine(mesh, m)?;
            let mut protocol = match &cfg.protocol.file {
                Some(f) => load_protocol(resolve(base, f))?,
                None => Protocol::hinged_default(),
            };
            if let Some(a) = amplitude {
                protocol = protocol.with_amplitude(a)?;
            }
            Actuator::hinged(mesh, protocol)
        }
        ActuatorChoice::Finger => {
            if m.file.is_some() || m.refine_factor.is_some() {
                return Err(Error::invalid("finger meshes are generated; only edge_length and contact_impedance apply"));
            }
            let mut p = FingerChamberParams::default();
            if let Some(h) = m.edge_length {
                p.edge_length = h;
            }
            if let Some(z) = m.contact_impedance {
                p.contact_impedance = z;
            }
            let a = Actuator::finger(&p, cfg.protocol.frequencies.unwrap_or(FINGER_FREQUENCIES))?;
            match amplitude {
                Some(amp) => a.with_amplitude(amp),
                None => Ok(a),
            }
        }
    }
}

fn refine(mesh: Mesh, m: &MeshSection) -> Result<Mesh> {
    match (m.refine_radius, m.refine_factor) {
        (Some(r), Some(f)) => refine_near_electrodes(&mesh, r, f),
        (None, None) => Ok(mesh),
        _ => Err(Error::invalid("mesh refinement needs both refine_radius and refine_factor")),
    }
}

fn acquisition(cfg: &ScenarioConfig) -> Acquisition {
    Acquisition {
        sample_rate: cfg.acquisition.sample_rate,
        window: cfg.acquisition.window,
        allow_leakage: cfg.acquisition.allow_leakage,
    }
}

/// Noise model of a config; an `snr_db` is calibrated against `reference`
/// amplitude.
pub fn noise_model(cfg: &ScenarioConfig, reference: f64, seed: u64) -> Result<NoiseModel> {
    let n = acquisition(cfg).n_samples()?;
    let c = &cfg.noise;
    let std = match (c.snr_db, c.std) {
        (Some(snr), None) => noise_std_for_snr(reference, snr, n),
        (None, Some(s)) => s,
        _ => 0.0,
    };
    let model = NoiseModel {
        std,
        relative_std: c.relative_std,
        quantization_step: if c.quantization { quantization_step(ADC_BITS, c.full_scale) } else { 0.0 },
        full_scale: c.full_scale,
        seed,
    };
    model.validate()?;
    Ok(model)
}

fn inverse_settings(cfg: &ScenarioConfig, kind: ActuatorKind, seed: u64) -> InverseSettings {
    let i = &cfg.inverse;
    let mut s = InverseSettings::for_actuator(kind);
    s.lambda = match i.lambda {
        LambdaSpec::Relative(r) => LambdaChoice::Relative(r),
        LambdaSpec::Named(_) => LambdaChoice::CrossValidated,
    };
    if let Some(v) = i.voxel_size {
        s.voxel_size = (v > 0.0).then_some(v);
    }
    s.cv = CvSettings {
        points: i.cv_points,
        lo_rel: i.cv_lo_rel,
        hi_rel: i.cv_hi_rel,
        training: i.cv_training,
        snr_db: i.cv_snr_db,
        seed,
        ..CvSettings::default()
    };
    s
}

/// One named pass/fail check of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub checks: Vec<CheckOutcome>,
    pub lambda: Option<f64>,
    /// Written files, relative to the output directory, in write order.
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }
}

fn states_csv(states: &[BendState]) -> String {
    let mut out = String::from("state,label,a,b\n");
    for (i, s) in states.iter().enumerate() {
        let [a, b] = s.values();
        writeln!(out, "{},{},{a},{b}", i + 1, s.label()).unwrap();
    }
    out
}

fn dv_csv(trace: &ScenarioTrace, states: &[BendState]) -> String {
    let m = trace.protocol.measurement_count();
    let mut out = String::from("state,repeat");
    for i in 1..=m {
        write!(out, ",dv{i}").unwrap();
    }
    out.push('\n');
    for (k, r) in trace.records.iter().enumerate() {
        let state = k / (trace.records.len() / states.len().max(1)).max(1) + 1;
        write!(out, "{state},{}", r.repeat + 1).unwrap();
        for v in &r.dv {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn isolation_check(actuator: &Actuator, trace: &ScenarioTrace, max: f64) -> CheckOutcome {
    let mut worst: Option<(f64, String)> = None;
    for (state, dv) in trace.mean_dv_by_state() {
        if let Some(r) = cross_dof_ratio(actuator, &state, &dv) {
            if worst.as_ref().is_none_or(|(w, _)| r > *w) {
                worst = Some((r, state.label()));
            }
        }
    }
    match worst {
        Some((r, label)) => CheckOutcome {
            name: "isolation".into(),
            passed: r < max,
            detail: format!("worst cross/same injection response {r:.4} at {label} (limit {max})"),
        },
        None => CheckOutcome {
            name: "isolation".into(),
            passed: true,
            detail: "no single-DOF states".into(),
        },
    }
}

/// Runs a scenario and writes its outputs into `out_dir`.
///
/// Files: `states.csv`, `frames.csv` (baseline frames first), `dv.csv`,
/// per-state images under `images/` and `localization.csv` for
/// reconstructions, `trials.csv` for localization trials, `phantom.csv` for
/// the resistor phantom, and `summary.txt`.
pub fn run_scenario(cfg: &ScenarioConfig, base: &Path, out_dir: &Path, seed: u64) -> Result<ScenarioReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut w = Writer { dir: out_dir, files: Vec::new() };
    let mut checks = Vec::new();
    let mut lambda = None;
    let mut summary = String::new();
    let title = cfg.scenario.name.clone().unwrap_or_else(|| "scenario".into());
    writeln!(summary, "{title}").unwrap();
    writeln!(summary, "seed {seed}").unwrap();

    if cfg.scenario.experiment == Experiment::Phantom {
        let p = &cfg.phantom;
        let phantom = ResistorPhantom::new(p.loads.clone())?;
        let current = p.current_ua * 1e-6;
        let mean_load = p.loads.iter().sum::<f64>() / p.loads.len() as f64;
        let noise = noise_model(cfg, current * mean_load, seed)?;
        let report = run_resistor_phantom(&phantom, &p.frequencies, current, &acquisition(cfg), &noise, p.repeats)?;
        let mut csv = String::from("load_ohm,frequency_hz,estimate_ohm,snr_db\n");
        for (l, load) in report.loads.iter().enumerate() {
            for (f, freq) in report.frequencies.iter().enumerate() {
                let snr = report.snr_db[l][f].map_or(String::new(), |s| s.to_string());
                writeln!(csv, "{load},{freq},{},{snr}", report.estimates[l][f]).unwrap();
            }
        }
        w.write("phantom.csv", csv)?;
        let spread = report.max_spread();
        checks.push(CheckOutcome {
            name: "frequency_invariance".into(),
            passed: spread < cfg.checks.phantom_spread_max,
            detail: format!("max relative spread {spread:.3e} (limit {})", cfg.checks.phantom_spread_max),
        });
    } else {
        let actuator = build_actuator(cfg, base)?;
        let states = cfg.states()?;
        let rest = actuator.rest_state();
        let sigma_rest = actuator.conductivity(&rest, &cfg.surrogate, cfg.scenario.sigma0)?;
        let v_rest = actuator.solver(&sigma_rest)?.reference_voltages()?;
        let reference = v_rest.iter().map(|v| v.abs()).sum::<f64>() / v_rest.len() as f64;
        let sweep = SweepConfig {
            acquisition: acquisition(cfg),
            noise: noise_model(cfg, reference, seed)?,
            repeats: cfg.acquisition.repeats,
            sigma0: cfg.scenario.sigma0,
            surrogate: cfg.surrogate,
        };
        writeln!(summary, "noise std {:e} V", sweep.noise.std).unwrap();
        w.write("states.csv", states_csv(&states))?;

        let (trace, setup) = match cfg.scenario.experiment {
            Experiment::Sweep => (run_static_sweep(&actuator, &states, &sweep)?, None),
            _ => {
                let inv = inverse_settings(cfg, actuator.kind(), seed);
                let (t, s) = run_reconstruction_experiment(&actuator, &states, &sweep, &inv)?;
                (t, Some(s))
            }
        };
        let frames: Vec<_> = trace
            .baseline_frames
            .iter()
            .chain(trace.records.iter().map(|r| &r.frame))
            .cloned()
            .collect();
        w.write("frames.csv", write_frames_csv(&frames))?;
        w.write("dv.csv", dv_csv(&trace, &states))?;
        checks.push(isolation_check(&actuator, &trace, cfg.checks.isolation_max));

        if let Some(setup) = setup {
            lambda = Some(setup.lambda());
            writeln!(summary, "lambda {:e}", setup.lambda()).unwrap();
            let mut loc_csv = String::from("state,label,centroid_x,centroid_y,centroid_z,region,dominant_chamber,dominant_sign\n");
            let meshes = actuator.meshes();
            for (i, (state, dv)) in trace.mean_dv_by_state().iter().enumerate() {
                let (result, per_element, loc) = setup.image(dv)?;
                w.write(&format!("images/state_{:03}.csv", i + 1), write_reconstruction_csv(&result.delta_sigma))?;
                if cfg.output.vtk {
                    let mut offset = 0;
                    for (mi, mesh) in meshes.iter().enumerate() {
                        let part = &per_element[offset..offset + mesh.n_elements()];
                        offset += mesh.n_elements();
                        let name = if meshes.len() == 1 {
                            format!("images/state_{:03}.vtk", i + 1)
                        } else {
                            format!("images/state_{:03}_chamber{}.vtk", i + 1, mi + 1)
                        };
                        w.write(&name, write_vtk(mesh, &[("delta_sigma", part)])?)?;
                    }
                }
                let c = loc.centroid;
                writeln!(
                    loc_csv,
                    "{},{},{},{},{},{},{},{}",
                    i + 1,
                    state.label(),
                    c[0],
                    c[1],
                    c[2],
                    loc.region,
                    loc.dominant_chamber,
                    loc.dominant_sign()
                )
                .unwrap();
            }
            w.write("localization.csv", loc_csv)?;

            let n = cfg.checks.localization_trials;
            if n > 0 {
                let trials = run_localization_trials(&actuator, &setup, &sweep, n, seed)?;
                let mut csv = String::from("trial,chamber,region,hit\n");
                for (i, t) in trials.iter().enumerate() {
                    writeln!(csv, "{},{},{},{}", i + 1, t.chamber, t.localization.region, t.hit()).unwrap();
                }
                w.write("trials.csv", csv)?;
                let hits = trials.iter().filter(|t| t.hit()).count();
                checks.push(CheckOutcome {
                    name: "localization".into(),
                    passed: hits == n,
                    detail: format!("{hits}/{n} single-chamber perturbations located in their chamber"),
                });
            }
        }
    }

    for c in &checks {
        writeln!(summary, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
    }
    let all = checks.iter().all(|c| c.passed);
    writeln!(summary, "{}", if all { "all checks passed" } else { "some checks failed" }).unwrap();
    w.write("summary.txt", &summary)?;
    Ok(ScenarioReport {
        checks,
        lambda,
        files: w.files,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ScenarioConfig::parse("[scenario]\nactuator = \"hinged\"\nexperiment = \"sweep\"\n", "x").unwrap();
        let states = cfg.states().unwrap();
        assert_eq!(states.len(), 18);
        assert_eq!(states[0], BendState::Hinged { angle1: 10.0, angle2: 0.0 });
        assert_eq!(cfg.inverse.lambda, LambdaSpec::Named("cv".into()));
        assert_eq!(cfg.acquisition.repeats, 3);
    }

    #[test]
    fn explicit_states_and_sweeps() {
        let text = r#"
[scenario]
actuator = "finger"
experiment = "reconstruction"
[states]
list = [[0.2, 0.0]]
sweep = [{ dof = 2, start = 0.1, stop = 0.3, step = 0.1, other = 0.1 }]
[inverse]
lambda = 0.3
"#;
        let cfg = ScenarioConfig::parse(text, "x").unwrap();
        let s = cfg.states().unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s[3], BendState::Finger { p1: 0.1, p2: 0.3 });
        assert_eq!(cfg.inverse.lambda, LambdaSpec::Relative(0.3));
    }

    #[test]
    fn rejects_bad_configs() {
        let head = "[scenario]\nactuator = \"hinged\"\nexperiment = \"sweep\"\n";
        for extra in [
            "[noise]\nsnr_db = 60\nstd = 1e-4\n",
            "[inverse]\nlambda = \"lcurve\"\n",
            "[states]\nsweep = [{ dof = 3, start = 0, stop = 90, step = 10 }]\n",
            "[mesh]\ncolour = 1\n",
            "[states]\nlist = [[95, 0]]\n",
        ] {
            let r = ScenarioConfig::parse(&format!("{head}{extra}"), "x").and_then(|c| c.states());
            assert!(r.is_err(), "{extra}");
        }
        match ScenarioConfig::parse("[scenario]\nactuator = \"snake\"\nexperiment = \"sweep\"\n", "cfg.toml") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
