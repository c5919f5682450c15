//! Complete-electrode-model forward problem.
//!
//! Solves `div(sigma grad u) = 0` with zero normal flux off the electrodes
//! and `u + z sigma du/dn = V_l` on electrode `l`, using P1 elements.
//! Conductivity is real-valued; injection frequencies do not enter the
//! forward model.

mod cem;
mod protocol;

use rayon::prelude::*;

pub use cem::{CemSystem, FieldSolution, Grounding};
pub use protocol::{
    load_protocol, parse_protocol, save_protocol, write_protocol, Injection, InjectionTone,
    Measurement, MeasurementPair, Protocol, DEFAULT_AMPLITUDE,
};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Default saline conductivity, S/m.
pub const DEFAULT_CONDUCTIVITY: f64 = 0.2;
/// Default contact impedance, Ω·m².
pub const DEFAULT_CONTACT_IMPEDANCE: f64 = 1e-3;

/// Per-element conductivity in S/m.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    values: Vec<f64>,
}

impl ConductivityField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let f = ConductivityField { values };
        f.check_positive()?;
        Ok(f)
    }

    pub fn uniform(mesh: &Mesh, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma; mesh.n_elements()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sigma + delta`, element-wise.
    pub fn perturbed(&self, delta: &[f64]) -> Result<Self> {
        if delta.len() != self.values.len() {
            return Err(Error::invalid("perturbation length does not match the field"));
        }
        Self::new(self.values.iter().zip(delta).map(|(s, d)| s + d).collect())
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|s| s * k).collect())
    }

    pub(crate) fn check_positive(&self) -> Result<()> {
        if let Some((k, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::invalid(format!(
                "conductivity must be positive, element {k} has {v}"
            )));
        }
        Ok(())
    }

    pub fn check_against(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.n_elements() {
            return Err(Error::invalid(format!(
                "conductivity has {} values for {} elements",
                self.values.len(),
                mesh.n_elements()
            )));
        }
        self.check_positive()
    }

    pub fn content_hash(&self) -> String {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        crate::hash::sha256_hex(&bytes)
    }
}

/// An assembled system together with the solved field of every injection
/// of a protocol.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub system: CemSystem,
    pub fields: Vec<FieldSolution>,
    pub voltages: Vec<f64>,
}

/// Differential voltages of every protocol measurement, injection-major.
pub fn measure(protocol: &Protocol, fields: &[FieldSolution]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(protocol.measurement_count());
    for (inj, field) in protocol.injections().iter().zip(fields) {
        for m in &inj.measurements {
            let pos = field
                .voltage(m.positive)
                .ok_or_else(|| Error::invalid(format!("electrode {} does not exist", m.positive)))?;
            let neg = field
                .voltage(m.negative)
                .ok_or_else(|| Error::invalid(format!("electrode {} does not exist", m.negative)))?;
            out.push(pos - neg);
        }
    }
    Ok(out)
}

/// Solves every injection of `protocol` against one factorized system.
pub fn solve_protocol(system: CemSystem, protocol: &Protocol) -> Result<ForwardSolution> {
    let fields = protocol
        .injections()
        .par_iter()
        .map(|inj| system.solve_injection(&inj.tone))
        .collect::<Result<Vec<_>>>()?;
    let voltages = measure(protocol, &fields)?;
    Ok(ForwardSolution {
        system,
        fields,
        voltages,
    })
}

pub fn forward_solve(
    mesh: &Mesh,
    sigma: &ConductivityField,
    protocol: &Protocol,
) -> Result<ForwardSolution> {
    protocol.validate_against(mesh)?;
    let system = CemSystem::assemble(mesh, sigma, Grounding::default())?;
    solve_protocol(system, protocol)
}

/// Measured voltages for every protocol measurement, injection-major.
pub fn forward_all(mesh: &Mesh, sigma: &ConductivityField, protocol: &Protocol) -> Result<Vec<f64>> {
    Ok(forward_solve(mesh, sigma, protocol)?.voltages)
}
