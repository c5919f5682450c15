//! Synthetic experiments on the resistor phantom, the double-hinge actuator
//! and the finger actuator.

mod actuator;
mod config;
mod phantom;
mod surrogate;
mod sweep;

pub use actuator::{Actuator, ActuatorKind, ActuatorSolver, FINGER_FREQUENCIES, FINGER_GAP};
pub use config::{
    build_actuator, noise_model, run_scenario, AcquisitionSection, ActuatorChoice, CheckOutcome,
    ChecksSection, Experiment, InverseSection, LambdaSpec, MeshSection, NoiseSection,
    OutputSection, PhantomSection, ProtocolSection, ScenarioConfig, ScenarioReport,
    ScenarioSection, StatesSection, SweepSpec,
};
pub use phantom::{run_resistor_phantom, PhantomReport, ResistorPhantom, PHANTOM_CURRENT, PHANTOM_FREQUENCIES};
pub use surrogate::{bend_to_conductivity, BendState, HingeSurrogate, SurrogateParams, MAX_ANGLE, MAX_PRESSURE};
pub use sweep::{
    chamber_perturbation, cross_dof_ratio, cross_validated_lambda, injection_response, linear_fit_r2, localize,
    run_localization_trials, run_reconstruction_experiment, run_static_sweep, CvSettings,
    ImagingSetup, InverseSettings, LambdaChoice, Localization, LocalizationTrial, ScenarioTrace,
    SweepConfig, TraceRecord, DEFAULT_VOXEL_SIZE,
};
