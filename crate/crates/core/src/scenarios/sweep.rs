//! Static sweeps and reconstruction experiments driven through the full
//! acquisition chain.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::actuator::{Actuator, ActuatorKind, ActuatorSolver};
use super::surrogate::{BendState, SurrogateParams};
use crate::error::{Error, Result};
use crate::fdm::{acquire_frames, Acquisition, NoiseModel, VoltageFrame};
use crate::forward::{Protocol, DEFAULT_CONDUCTIVITY};
use crate::inverse::{
    blob_perturbations, lambda_grid, select_lambda_cv, CvNoise, CvSelection, JacobianSvd,
    ReconstructionOperator, ReconstructionResult,
};
use crate::mesh::geometry::{distance, Point};
use crate::sensitivity::{aggregate_to_hex, HexSubdomain, Jacobian};

/// Acquisition settings shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub acquisition: Acquisition,
    pub noise: NoiseModel,
    /// Frames recorded per state.
    pub repeats: usize,
    /// Uniform reference conductivity, S/m.
    pub sigma0: f64,
    pub surrogate: SurrogateParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            acquisition: Acquisition::default(),
            noise: NoiseModel::default(),
            repeats: 3,
            sigma0: DEFAULT_CONDUCTIVITY,
            surrogate: SurrogateParams::default(),
        }
    }
}

/// One recorded frame of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub state: BendState,
    pub repeat: usize,
    pub sigma: Vec<f64>,
    pub frame: VoltageFrame,
    /// Signed voltage change against the baseline.
    pub dv: Vec<f64>,
    pub reconstruction: Option<ReconstructionResult>,
    pub localization: Option<Localization>,
}

/// Ordered frames of an experiment plus the rest-state reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    pub protocol: Protocol,
    pub baseline_frames: Vec<VoltageFrame>,
    /// Mean signed baseline voltage per measurement.
    pub baseline: Vec<f64>,
    pub records: Vec<TraceRecord>,
    pub lambda: Option<f64>,
}

impl ScenarioTrace {
    /// Mean `dv` of each state over its repeats, in state order.
    pub fn mean_dv_by_state(&self) -> Vec<(BendState, Vec<f64>)> {
        let mut out: Vec<(BendState, Vec<f64>, usize)> = Vec::new();
        for r in &self.records {
            match out.last_mut() {
                Some((s, acc, n)) if *s == r.state && r.repeat > 0 => {
                    acc.iter_mut().zip(&r.dv).for_each(|(a, b)| *a += b);
                    *n += 1;
                }
                _ => out.push((r.state, r.dv.clone(), 1)),
            }
        }
        out.into_iter()
            .map(|(s, acc, n)| (s, acc.into_iter().map(|v| v / n as f64).collect()))
            .collect()
    }
}

fn mean_signed(frames: &[VoltageFrame]) -> Vec<f64> {
    let m = frames.first().map_or(0, VoltageFrame::len);
    let mut acc = vec![0.0; m];
    for f in frames {
        acc.iter_mut().zip(f.signed()).for_each(|(a, b)| *a += b);
    }
    acc.into_iter().map(|v| v / frames.len() as f64).collect()
}

fn check_config(cfg: &SweepConfig) -> Result<()> {
    if cfg.repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if !(cfg.sigma0 > 0.0 && cfg.sigma0.is_finite()) {
        return Err(Error::invalid("reference conductivity must be positive"));
    }
    cfg.noise.validate()?;
    cfg.surrogate.validate()
}

/// Forward solve, synthesis and demodulation for every state and repeat.
/// Frame `r` of the baseline uses noise stream `r`; frame `r` of state `s`
/// uses stream `repeats·(s+1) + r`.
pub fn run_static_sweep(actuator: &Actuator, states: &[BendState], cfg: &SweepConfig) -> Result<ScenarioTrace> {
    check_config(cfg)?;
    let rest = actuator.rest_state();
    let sigma_rest = actuator.conductivity(&rest, &cfg.surrogate, cfg.sigma0)?;
    let solver = actuator.solver(&sigma_rest)?;
    run_sweep_with(actuator, &solver, states, cfg)
}

fn run_sweep_with(
    actuator: &Actuator,
    solver: &ActuatorSolver<'_>,
    states: &[BendState],
    cfg: &SweepConfig,
) -> Result<ScenarioTrace> {
    let protocol = actuator.protocol();
    let v_rest = solver.reference_voltages()?;
    let baseline_frames = acquire_frames(protocol, &v_rest, &cfg.acquisition, &cfg.noise, 0, cfg.repeats)?;
    let baseline = mean_signed(&baseline_frames);

    let per_state = states
        .par_iter()
        .enumerate()
        .map(|(s, state)| {
            let sigma = actuator.conductivity(state, &cfg.surrogate, cfg.sigma0)?;
            let v = solver.voltages(&sigma)?;
            let first = (cfg.repeats * (s + 1)) as u64;
            let frames = acquire_frames(protocol, &v, &cfg.acquisition, &cfg.noise, first, cfg.repeats)?;
            Ok(frames
                .into_iter()
                .enumerate()
                .map(|(repeat, frame)| {
                    let dv = frame.signed().iter().zip(&baseline).map(|(a, b)| a - b).collect();
                    TraceRecord {
                        state: *state,
                        repeat,
                        sigma: sigma.clone(),
                        frame,
                        dv,
                        reconstruction: None,
                        localization: None,
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ScenarioTrace {
        protocol: protocol.clone(),
        baseline_frames,
        baseline,
        records: per_state.into_iter().flatten().collect(),
        lambda: None,
    })
}

/// How the regularization weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    /// Multiple of the largest squared singular value of J.
    Relative(f64),
    CrossValidated,
}

/// Cross-validation settings; blob sizes in mm, amplitude relative to σ0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvSettings {
    pub points: usize,
    pub lo_rel: f64,
    pub hi_rel: f64,
    pub training: usize,
    pub blob_radius: f64,
    pub blob_amplitude: f64,
    /// SNR of the simulated CV noise, dB.
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            points: 40,
            lo_rel: 1e-10,
            hi_rel: 1e2,
            training: 40,
            blob_radius: 10.0,
            blob_amplitude: 0.1,
            snr_db: 66.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseSettings {
    pub lambda: LambdaChoice,
    /// Reconstruct on a voxel grid of this size, mm, instead of on elements.
    pub voxel_size: Option<f64>,
    pub cv: CvSettings,
}

/// Edge of the default voxel grid, mm.
pub const DEFAULT_VOXEL_SIZE: f64 = 5.0;

impl Default for InverseSettings {
    fn default() -> Self {
        InverseSettings {
            lambda: LambdaChoice::CrossValidated,
            voxel_size: None,
            cv: CvSettings::default(),
        }
    }
}

impl InverseSettings {
    /// Cross-validated defaults: voxels for the single-mesh hinged actuator,
    /// elements for the finger.
    pub fn for_actuator(kind: ActuatorKind) -> Self {
        InverseSettings {
            voxel_size: (kind == ActuatorKind::Hinged).then_some(DEFAULT_VOXEL_SIZE),
            ..Default::default()
        }
    }
}

/// Where an image's strongest change sits.
#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    /// Centroid of the top decile of `|δσ|`, weighted by `|δσ|·volume`, mm.
    pub centroid: Point,
    /// Tag of the element whose centroid is nearest to `centroid`.
    pub region: u32,
    /// Volume-weighted mean `δσ` per region.
    pub region_mean: BTreeMap<u32, f64>,
    /// Chamber with the largest `|mean δσ|`.
    pub dominant_chamber: u32,
}

impl Localization {
    pub fn dominant_sign(&self) -> f64 {
        self.region_mean[&self.dominant_chamber].signum()
    }
}

/// Localization metrics of a per-element image.
pub fn localize(values: &[f64], centroids: &[Point], volumes: &[f64], tags: &[u32], chambers: &[u32]) -> Localization {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let top = &order[..n.div_ceil(10)];
    let mut c = [0.0; 3];
    let mut w_sum = 0.0;
    for &k in top {
        let w = values[k].abs() * volumes[k];
        for d in 0..3 {
            c[d] += w * centroids[k][d];
        }
        w_sum += w;
    }
    if w_sum > 0.0 {
        c.iter_mut().for_each(|v| *v /= w_sum);
    } else {
        let m = top.len() as f64;
        c = top.iter().fold([0.0; 3], |acc, &k| {
            [acc[0] + centroids[k][0] / m, acc[1] + centroids[k][1] / m, acc[2] + centroids[k][2] / m]
        });
    }
    let nearest = (0..n)
        .min_by(|&a, &b| distance(&centroids[a], &c).total_cmp(&distance(&centroids[b], &c)))
        .unwrap_or(0);

    let mut acc: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for k in 0..n {
        let e = acc.entry(tags[k]).or_default();
        e.0 += values[k] * volumes[k];
        e.1 += volumes[k];
    }
    let region_mean: BTreeMap<u32, f64> = acc.into_iter().map(|(t, (s, v))| (t, s / v)).collect();
    let dominant_chamber = chambers
        .iter()
        .copied()
        .filter(|t| region_mean.contains_key(t))
        .max_by(|a, b| region_mean[a].abs().total_cmp(&region_mean[b].abs()))
        .unwrap_or(0);
    Localization {
        centroid: c,
        region: tags.get(nearest).copied().unwrap_or(0),
        region_mean,
        dominant_chamber,
    }
}

/// Jacobian, operator and geometry needed to turn voltage changes into
/// located images.
#[derive(Debug, Clone)]
pub struct ImagingSetup {
    pub jacobian: Jacobian,
    pub hex: Option<HexSubdomain>,
    pub operator: ReconstructionOperator,
    pub cv: Option<CvSelection>,
    centroids: Vec<Point>,
    volumes: Vec<f64>,
    tags: Vec<u32>,
    chambers: Vec<u32>,
}

impl ImagingSetup {
    pub fn new(
        actuator: &Actuator,
        solver: &ActuatorSolver<'_>,
        reference_voltages: &[f64],
        sigma0: f64,
        settings: &InverseSettings,
    ) -> Result<Self> {
        let element_j = solver.jacobian()?;
        let (jacobian, hex, column_centres) = match settings.voxel_size {
            None => (element_j, None, actuator.element_centroids()),
            Some(size) => {
                if actuator.kind() != ActuatorKind::Hinged {
                    return Err(Error::invalid("voxel reconstruction needs a single-mesh actuator"));
                }
                let mesh = actuator.meshes()[0];
                let (j, hex) = aggregate_to_hex(&element_j, mesh, size)?;
                let centres = (0..hex.n_voxels()).map(|c| hex.voxel_centre(c)).collect();
                (j, Some(hex), centres)
            }
        };
        let svd = JacobianSvd::new(&jacobian)?;
        let (lambda, cv) = match settings.lambda {
            LambdaChoice::Relative(r) => {
                let s = svd.max_singular_value();
                (r * s * s, None)
            }
            LambdaChoice::CrossValidated => {
                let sel = cross_validated_lambda(&jacobian, &svd, &column_centres, reference_voltages, sigma0, &settings.cv)?;
                (sel.lambda, Some(sel))
            }
        };
        let operator = svd.operator(lambda)?;
        Ok(ImagingSetup {
            jacobian,
            hex,
            operator,
            cv,
            centroids: actuator.element_centroids(),
            volumes: actuator.element_volumes(),
            tags: actuator.element_tags(),
            chambers: actuator.chambers(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.operator.lambda
    }

    /// Reconstruction on the operator's columns, its per-element expansion
    /// and the localization metrics.
    pub fn image(&self, dv: &[f64]) -> Result<(ReconstructionResult, Vec<f64>, Localization)> {
        let r = crate::inverse::reconstruct(&self.operator, dv)?;
        let per_element = match &self.hex {
            Some(h) => h.expand(&r.delta_sigma),
            None => r.delta_sigma.clone(),
        };
        let loc = localize(&per_element, &self.centroids, &self.volumes, &self.tags, &self.chambers);
        Ok((r, per_element, loc))
    }
}

/// Cross-validated λ for `jacobian`, trained on blobs around the column
/// centres with noise at `cv.snr_db` relative to the reference voltages.
pub fn cross_validated_lambda(
    jacobian: &Jacobian,
    svd: &JacobianSvd,
    column_centres: &[Point],
    reference_voltages: &[f64],
    sigma0: f64,
    cv: &CvSettings,
) -> Result<CvSelection> {
    let grid = lambda_grid(svd.max_singular_value(), cv.points, cv.lo_rel, cv.hi_rel)?;
    let training = blob_perturbations(column_centres, cv.training, cv.blob_radius, cv.blob_amplitude * sigma0, cv.seed)?;
    let noise = CvNoise::from_snr(reference_voltages, cv.snr_db, cv.seed ^ 0x5eed);
    select_lambda_cv(jacobian, &noise, &grid, &training)
}

/// Static sweep followed by a reconstruction of every frame.
pub fn run_reconstruction_experiment(
    actuator: &Actuator,
    states: &[BendState],
    cfg: &SweepConfig,
    inverse: &InverseSettings,
) -> Result<(ScenarioTrace, ImagingSetup)> {
    check_config(cfg)?;
    let rest = actuator.rest_state();
    let sigma_rest = actuator.conductivity(&rest, &cfg.surrogate, cfg.sigma0)?;
    let solver = actuator.solver(&sigma_rest)?;
    let v_rest = solver.reference_voltages()?;
    let setup = ImagingSetup::new(actuator, &solver, &v_rest, cfg.sigma0, inverse)?;
    let mut trace = run_sweep_with(actuator, &solver, states, cfg)?;
    let images = trace
        .records
        .par_iter()
        .map(|r| setup.image(&r.dv))
        .collect::<Result<Vec<_>>>()?;
    for (rec, (result, _, loc)) in trace.records.iter_mut().zip(images) {
        rec.reconstruction = Some(result);
        rec.localization = Some(loc);
    }
    trace.lambda = Some(setup.lambda());
    Ok((trace, setup))
}

/// Norm of the voltage change of each injection.
pub fn injection_response(protocol: &Protocol, dv: &[f64]) -> Vec<f64> {
    (0..protocol.injections().len())
        .map(|i| {
            dv[protocol.measurement_range(i)]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// For a state moving a single degree of freedom: response of the injection
/// across the other DOF over the response of the one across the moved DOF.
/// `None` for states moving both or neither, or protocols without the
/// expected injections.
pub fn cross_dof_ratio(actuator: &Actuator, state: &BendState, dv: &[f64]) -> Option<f64> {
    let [a, b] = state.values();
    let moved = match (a != 0.0, b != 0.0) {
        (true, false) => 0,
        (false, true) => 1,
        _ => return None,
    };
    let p = actuator.protocol();
    let inj = match actuator.kind() {
        ActuatorKind::Hinged => [p.find_injection(2, 3)?, p.find_injection(4, 5)?],
        ActuatorKind::Finger => [0, 1],
    };
    let resp = injection_response(p, dv);
    let same = resp[inj[moved]];
    let cross = resp[inj[1 - moved]];
    (same > 0.0).then(|| cross / same)
}

/// Coefficient of determination of a least-squares line through `(x, y)`.
pub fn linear_fit_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    if sxx == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

/// A random conductivity change of one chamber: a relative amplitude of
/// 5–20 % of `sigma0` with random sign, spread over the whole chamber with a
/// random profile `0.5 + 0.5·exp(−d²/2r²)` around a random chamber element.
pub fn chamber_perturbation(actuator: &Actuator, chamber: u32, sigma0: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let tags = actuator.element_tags();
    let members: Vec<usize> = (0..tags.len()).filter(|&k| tags[k] == chamber).collect();
    if members.is_empty() {
        return Err(Error::invalid(format!("actuator has no region {chamber}")));
    }
    let centroids = actuator.element_centroids();
    let centre = centroids[members[rng.random_range(0..members.len())]];
    let radius = match actuator.kind() {
        ActuatorKind::Hinged => rng.random_range(15.0..30.0),
        ActuatorKind::Finger => rng.random_range(3.0..8.0),
    };
    let amp = rng.random_range(0.05..0.20) * sigma0 * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut out = vec![0.0; tags.len()];
    for &k in &members {
        let d = distance(&centroids[k], &centre) / radius;
        out[k] = amp * (0.5 + 0.5 * (-0.5 * d * d).exp());
    }
    Ok(out)
}

/// Outcome of one random single-chamber localization trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationTrial {
    pub chamber: u32,
    pub localization: Localization,
}

impl LocalizationTrial {
    pub fn hit(&self) -> bool {
        self.localization.region == self.chamber
    }
}

/// `count` trials cycling through the chambers: perturb, acquire through the
/// FDM chain against a rest reference, reconstruct and locate.
pub fn run_localization_trials(
    actuator: &Actuator,
    setup: &ImagingSetup,
    cfg: &SweepConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<LocalizationTrial>> {
    check_config(cfg)?;
    let sigma_rest = actuator.conductivity(&actuator.rest_state(), &cfg.surrogate, cfg.sigma0)?;
    let solver = actuator.solver(&sigma_rest)?;
    let protocol = actuator.protocol();
    let v_rest = solver.reference_voltages()?;
    let baseline = mean_signed(&acquire_frames(protocol, &v_rest, &cfg.acquisition, &cfg.noise, 0, cfg.repeats)?);
    let chambers = actuator.chambers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = (0..count)
        .map(|i| {
            let chamber = chambers[i % chambers.len()];
            chamber_perturbation(actuator, chamber, cfg.sigma0, &mut rng).map(|d| (chamber, d))
        })
        .collect::<Result<Vec<_>>>()?;
    cases
        .par_iter()
        .enumerate()
        .map(|(i, (chamber, delta))| {
            let sigma: Vec<f64> = sigma_rest.iter().zip(delta).map(|(a, b)| a + b).collect();
            let v = solver.voltages(&sigma)?;
            let first = (cfg.repeats * (i + 1)) as u64;
            let frames = acquire_frames(protocol, &v, &cfg.acquisition, &cfg.noise, first, cfg.repeats)?;
            let dv: Vec<f64> = mean_signed(&frames).iter().zip(&baseline).map(|(a, b)| a - b).collect();
            let (_, _, localization) = setup.image(&dv)?;
            Ok(LocalizationTrial {
                chamber: *chamber,
                localization,
            })
        })
        .collect()
}
