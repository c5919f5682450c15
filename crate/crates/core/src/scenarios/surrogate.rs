//! Bend and pressure states mapped to conductivity on a fixed mesh.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::forward::ConductivityField;
use crate::mesh::{Mesh, CHAMBER_1, CHAMBER_2, CHAMBER_3, HINGE_1, HINGE_2};

pub const MAX_ANGLE: f64 = 90.0;
/// Finger chambers stay below 0.5 bar.
pub const MAX_PRESSURE: f64 = 0.5;

/// Configuration of one actuator degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BendState {
    /// Hinge angles, degrees in [0, 90].
    Hinged { angle1: f64, angle2: f64 },
    /// Chamber pressures, bar in [0, 0.5).
    Finger { p1: f64, p2: f64 },
}

impl BendState {
    pub fn rest_hinged() -> Self {
        BendState::Hinged { angle1: 0.0, angle2: 0.0 }
    }

    pub fn rest_finger() -> Self {
        BendState::Finger { p1: 0.0, p2: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BendState::Hinged { angle1, angle2 } => {
                for a in [angle1, angle2] {
                    if !(0.0..=MAX_ANGLE).contains(&a) {
                        return Err(Error::invalid(format!("bend angle {a} outside [0, {MAX_ANGLE}] degrees")));
                    }
                }
            }
            BendState::Finger { p1, p2 } => {
                for p in [p1, p2] {
                    if !(0.0..MAX_PRESSURE).contains(&p) {
                        return Err(Error::invalid(format!("pressure {p} outside [0, {MAX_PRESSURE}) bar")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_rest(&self) -> bool {
        match *self {
            BendState::Hinged { angle1, angle2 } => angle1 == 0.0 && angle2 == 0.0,
            BendState::Finger { p1, p2 } => p1 == 0.0 && p2 == 0.0,
        }
    }

    /// The two degrees of freedom as plain numbers.
    pub fn values(&self) -> [f64; 2] {
        match *self {
            BendState::Hinged { angle1, angle2 } => [angle1, angle2],
            BendState::Finger { p1, p2 } => [p1, p2],
        }
    }

    pub fn label(&self) -> String {
        match *self {
            BendState::Hinged { angle1, angle2 } => format!("a1={angle1} a2={angle2}"),
            BendState::Finger { p1, p2 } => format!("p1={p1} p2={p2}"),
        }
    }
}

/// Relative conductivity of a hinge as a function of bend angle:
///
/// `g(a) = 1 + rise·sin(π/2·min(a/knee, 1)) − slope·a/90 − drop·((a−knee)⁺/(90−knee))²`
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HingeSurrogate {
    pub rise: f64,
    pub slope: f64,
    pub drop: f64,
    /// Degrees.
    pub knee: f64,
}

impl Default for HingeSurrogate {
    fn default() -> Self {
        HingeSurrogate {
            rise: 0.15,
            slope: 0.0,
            drop: 0.8,
            knee: 50.0,
        }
    }
}

impl HingeSurrogate {
    /// Linear decrease, no knee.
    pub fn linear(slope: f64) -> Self {
        HingeSurrogate {
            rise: 0.0,
            slope,
            drop: 0.0,
            knee: 50.0,
        }
    }

    pub fn g(&self, angle: f64) -> f64 {
        let a = angle.clamp(0.0, MAX_ANGLE);
        let up = self.rise * (std::f64::consts::FRAC_PI_2 * (a / self.knee).min(1.0)).sin();
        let past = ((a - self.knee).max(0.0) / (MAX_ANGLE - self.knee)).powi(2);
        1.0 + up - self.slope * a / MAX_ANGLE - self.drop * past
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.knee > 0.0 && self.knee < MAX_ANGLE) {
            return Err(Error::invalid(format!("knee {} must lie in (0, {MAX_ANGLE})", self.knee)));
        }
        let min = (0..=900)
            .map(|i| self.g(i as f64 * 0.1))
            .fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::invalid("surrogate drives conductivity to zero or below"));
        }
        Ok(())
    }
}

/// Free parameters of the deformation surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    pub hinge1: HingeSurrogate,
    pub hinge2: HingeSurrogate,
    /// Fraction of a hinge's relative change carried by its outer chamber
    /// (chamber-1 for hinge-1, chamber-3 for hinge-2).
    pub chamber_coupling: f64,
    /// Relative conductivity drop of a finger chamber at 0.5 bar.
    pub finger_gain: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            hinge1: HingeSurrogate::default(),
            hinge2: HingeSurrogate::linear(0.3),
            chamber_coupling: 0.5,
            finger_gain: 0.3,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        self.hinge1.validate()?;
        self.hinge2.validate()?;
        if !(0.0..=1.0).contains(&self.chamber_coupling) {
            return Err(Error::invalid("chamber coupling must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.finger_gain) {
            return Err(Error::invalid("finger gain must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Multiplier applied to elements of region `tag`.
    pub fn region_factor(&self, state: &BendState, tag: u32) -> f64 {
        match *state {
            BendState::Hinged { angle1, angle2 } => {
                let g1 = self.hinge1.g(angle1);
                let g2 = self.hinge2.g(angle2);
                match tag {
                    HINGE_1 => g1,
                    HINGE_2 => g2,
                    CHAMBER_1 => 1.0 + self.chamber_coupling * (g1 - 1.0),
                    CHAMBER_3 => 1.0 + self.chamber_coupling * (g2 - 1.0),
                    _ => 1.0,
                }
            }
            BendState::Finger { p1, p2 } => match tag {
                CHAMBER_1 => 1.0 - self.finger_gain * p1 / MAX_PRESSURE,
                CHAMBER_2 => 1.0 - self.finger_gain * p2 / MAX_PRESSURE,
                _ => 1.0,
            },
        }
    }
}

/// Conductivity of `baseline` deformed to `state`. Hinged states need the
/// hinge and chamber tags; finger states need chamber-1 or chamber-2.
pub fn bend_to_conductivity(
    mesh: &Mesh,
    baseline: &ConductivityField,
    state: &BendState,
    params: &SurrogateParams,
) -> Result<ConductivityField> {
    state.validate()?;
    params.validate()?;
    baseline.check_against(mesh)?;
    let needed: &[u32] = match state {
        BendState::Hinged { .. } => &[HINGE_1, HINGE_2, CHAMBER_1, CHAMBER_3],
        BendState::Finger { .. } => &[],
    };
    let has = |t: u32| mesh.region_tags().contains(&t);
    let untagged = match state {
        BendState::Hinged { .. } => needed.iter().any(|&t| !has(t)),
        BendState::Finger { .. } => !has(CHAMBER_1) && !has(CHAMBER_2),
    };
    if untagged {
        return Err(Error::invalid(format!(
            "mesh lacks the region tags needed for a {} state",
            match state {
                BendState::Hinged { .. } => "hinged",
                BendState::Finger { .. } => "finger",
            }
        )));
    }
    if state.is_rest() {
        return Ok(baseline.clone());
    }
    let values = baseline
        .values()
        .iter()
        .zip(mesh.region_tags())
        .map(|(s, &t)| s * params.region_factor(state, t))
        .collect();
    ConductivityField::new(values)
}
