//! `eitshape` command-line pipeline.
//!
//! Every subcommand reads files, writes files plus a `manifest.json` into
//! `--out-dir`, and exits 0 on success, 1 on invalid input and 2 on a
//! numerical failure. Errors are a single line prefixed `error[validation]:`
//! or `error[numerical]:`.

mod commands;
mod files;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Seed used when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Debug, Parser, Serialize)]
#[command(name = "eitshape", version, about = "EIT shape sensing of soft fluidic actuators")]
pub struct Cli {
    /// Seed for every random stream (noise, CV training, trials).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Directory receiving all outputs.
    #[arg(long, global = true, default_value = "eitshape-out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Generate an actuator or test mesh (and its default protocol).
    Mesh(MeshArgs),
    /// Solve the forward problem and write transfer voltages.
    Forward(ForwardArgs),
    /// Compute the sensitivity matrix and per-measurement sensitivity maps.
    Jacobian(JacobianArgs),
    /// Tikhonov difference reconstruction from voltage changes.
    Reconstruct(ReconstructArgs),
    /// Synthesize and demodulate FDM frames, with an SNR report.
    Fdm(FdmArgs),
    /// Run a scenario config end to end.
    Scenario(ScenarioArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mesh(_) => "mesh",
            Command::Forward(_) => "forward",
            Command::Jacobian(_) => "jacobian",
            Command::Reconstruct(_) => "reconstruct",
            Command::Fdm(_) => "fdm",
            Command::Scenario(_) => "scenario",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    /// Double-hinge actuator, six electrodes.
    Hinged,
    /// One finger chamber, two electrodes.
    Finger,
    /// Rectangular bar with electrodes over both end faces.
    Box,
}

#[derive(Debug, Args, Serialize)]
pub struct MeshArgs {
    pub kind: MeshKind,
    /// Target edge length, mm.
    #[arg(long)]
    pub edge_length: Option<f64>,
    /// Contact impedance, Ω·m² (0 for ideal electrodes).
    #[arg(long)]
    pub contact_impedance: Option<f64>,
    /// Box extents `L,W,T` in mm.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [20.0, 4.0, 2.0])]
    pub size: Vec<f64>,
    /// Refine elements within this distance of any electrode, mm.
    #[arg(long)]
    pub refine_radius: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub refine_factor: f64,
    /// Number of refinement passes.
    #[arg(long, default_value_t = 1)]
    pub refine_passes: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SigmaArgs {
    /// Uniform background conductivity, S/m.
    #[arg(long, default_value_t = eitshape::forward::DEFAULT_CONDUCTIVITY)]
    pub sigma: f64,
    /// Per-element conductivity CSV (`element_id,sigma`).
    #[arg(long, conflicts_with = "sigma")]
    pub sigma_file: Option<PathBuf>,
    /// Override one region, `TAG=VALUE` with a tag number or region name; repeatable.
    #[arg(long)]
    pub region_sigma: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ForwardArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub protocol: PathBuf,
    #[command(flatten)]
    pub sigma: SigmaArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct JacobianArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub protocol: PathBuf,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    /// Aggregate columns onto cubic voxels of this edge, mm.
    #[arg(long)]
    pub voxel_size: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub jacobian: PathBuf,
    /// Voltage CSV (`voltage` or `dv` column, or a single column).
    #[arg(long)]
    pub data: PathBuf,
    /// Reference voltages; the data minus these is reconstructed.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// λ relative to the largest squared singular value, or `cv`.
    #[arg(long, default_value = "cv")]
    pub lambda: String,
    /// Mesh of the Jacobian; needed for CV, voxel expansion and VTK output.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Voxel edge the Jacobian was aggregated with, mm.
    #[arg(long)]
    pub voxel_size: Option<f64>,
    /// Background conductivity scaling the CV training blobs, S/m.
    #[arg(long, default_value_t = eitshape::forward::DEFAULT_CONDUCTIVITY)]
    pub sigma0: f64,
    #[arg(long, default_value_t = 66.0)]
    pub cv_snr_db: f64,
    #[arg(long, default_value_t = 40)]
    pub cv_training: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FdmArgs {
    #[arg(long)]
    pub protocol: PathBuf,
    /// Transfer voltages from `forward`.
    #[arg(long, conflicts_with = "amplitudes", required_unless_present = "amplitudes")]
    pub voltages: Option<PathBuf>,
    /// Signed transfer voltages, V, one per measurement.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub amplitudes: Option<Vec<f64>>,
    /// Noise floor set for this SNR relative to the mean |voltage|, dB.
    #[arg(long, conflicts_with = "noise_std")]
    pub snr_db: Option<f64>,
    /// Additive white noise std, V.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Noise std proportional to each channel's signal.
    #[arg(long, default_value_t = 0.0)]
    pub relative_std: f64,
    /// Skip the 16-bit ADC quantization.
    #[arg(long)]
    pub no_quantization: bool,
    #[arg(long, default_value_t = eitshape::fdm::DEFAULT_SAMPLE_RATE)]
    pub sample_rate: f64,
    /// Window length, s.
    #[arg(long, default_value_t = eitshape::fdm::DEFAULT_WINDOW)]
    pub window: f64,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    /// Demodulate even if tones are not orthogonal over the window.
    #[arg(long)]
    pub allow_leakage: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ScenarioArgs {
    pub config: PathBuf,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    fn report(&self) -> (u8, String) {
        let one_line = |s: &str| s.lines().map(str::trim).collect::<Vec<_>>().join("; ");
        match self {
            CliError::Validation(m) => (1, format!("error[validation]: {}", one_line(m))),
            CliError::Numerical(m) => (2, format!("error[numerical]: {}", one_line(m))),
        }
    }
}

impl From<eitshape::Error> for CliError {
    fn from(e: eitshape::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[validation]: {first}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, line) = e.report();
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    let mut m = manifest::Manifest::start(cli)?;
    let mut out = files::Outputs::new(&cli.out_dir);
    match &cli.command {
        Command::Mesh(a) => commands::mesh(a, &mut out, &mut m)?,
        Command::Forward(a) => commands::forward(a, &mut out, &mut m)?,
        Command::Jacobian(a) => commands::jacobian(a, &mut out, &mut m)?,
        Command::Reconstruct(a) => commands::reconstruct(a, cli.seed, &mut out, &mut m)?,
        Command::Fdm(a) => commands::fdm(a, cli.seed, &mut out, &mut m)?,
        Command::Scenario(a) => commands::scenario(a, cli.seed, &mut out, &mut m)?,
    }
    out.write("plot_results.py", files::PLOT_SCRIPT.as_bytes())?;
    m.finish(&out)
}
