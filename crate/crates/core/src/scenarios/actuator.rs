//! Actuator models: meshes, protocol and the forward/Jacobian plumbing shared
//! by the experiments.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::surrogate::{bend_to_conductivity, BendState, SurrogateParams};
use crate::error::{Error, Result};
use crate::forward::{
    solve_protocol, CemSystem, ConductivityField, Grounding, Injection, InjectionTone,
    MeasurementPair, Protocol, DEFAULT_AMPLITUDE,
};
use crate::mesh::geometry::Point;
use crate::mesh::{
    generate_finger_chamber_mesh, FingerChamberParams, Mesh, CHAMBER_1, CHAMBER_2, CHAMBER_3,
    HINGE_1, HINGE_2,
};
use crate::sensitivity::{jacobian_from_solution, ColumnBasis, Jacobian, Provenance};

/// Default finger tones: one chamber per tone, 10 kHz apart.
pub const FINGER_FREQUENCIES: [f64; 2] = [10e3, 20e3];
/// Gap between the two finger chambers along x, mm.
pub const FINGER_GAP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActuatorKind {
    Hinged,
    Finger,
}

/// One independently solved conductor.
#[derive(Debug, Clone)]
struct Part {
    mesh: Mesh,
    protocol: Protocol,
    /// Added to node coordinates when reporting positions, mm.
    offset: Point,
}

/// A test article: one or more conductors, the multiplexed protocol that
/// drives them and the per-column geometry used for localization.
#[derive(Debug, Clone)]
pub struct Actuator {
    kind: ActuatorKind,
    parts: Vec<Part>,
    protocol: Protocol,
}

impl Actuator {
    /// Double-hinge actuator on a tagged mesh.
    pub fn hinged(mesh: Mesh, protocol: Protocol) -> Result<Self> {
        for t in [CHAMBER_1, HINGE_1, CHAMBER_2, HINGE_2, CHAMBER_3] {
            if mesh.elements_in_region(t).is_empty() {
                return Err(Error::invalid(format!(
                    "hinged actuator mesh has no elements tagged {t}"
                )));
            }
        }
        protocol.validate_against(&mesh)?;
        Ok(Actuator {
            kind: ActuatorKind::Hinged,
            parts: vec![Part {
                mesh,
                protocol: protocol.clone(),
                offset: [0.0; 3],
            }],
            protocol,
        })
    }

    /// Two separate finger chambers side by side, each with its own
    /// two-electrode injection. In the multiplexed protocol the second
    /// chamber's electrodes are numbered 3 and 4.
    pub fn finger(params: &FingerChamberParams, frequencies: [f64; 2]) -> Result<Self> {
        let base = generate_finger_chamber_mesh(params)?;
        let mut parts = Vec::new();
        let mut injections = Vec::new();
        for (i, (&tag, &f)) in [CHAMBER_1, CHAMBER_2].iter().zip(&frequencies).enumerate() {
            let name = if i == 0 { "chamber-1" } else { "chamber-2" };
            let mesh = base.with_regions(
                vec![tag; base.n_elements()],
                BTreeMap::from([(tag, name.to_string())]),
            )?;
            parts.push(Part {
                mesh,
                protocol: Protocol::two_electrode(f)?,
                offset: [i as f64 * (params.length + FINGER_GAP), 0.0, 0.0],
            });
            let (a, b) = (2 * i + 1, 2 * i + 2);
            injections.push(Injection {
                tone: InjectionTone::new(a, b, DEFAULT_AMPLITUDE, f)?,
                measurements: vec![MeasurementPair::new(a, b)],
            });
        }
        Ok(Actuator {
            kind: ActuatorKind::Finger,
            parts,
            protocol: Protocol::new(injections)?,
        })
    }

    /// Same actuator with every drive amplitude replaced, A.
    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        let mut a = self.clone();
        a.protocol = a.protocol.with_amplitude(amplitude)?;
        for p in &mut a.parts {
            p.protocol = p.protocol.with_amplitude(amplitude)?;
        }
        Ok(a)
    }

    pub fn kind(&self) -> ActuatorKind {
        self.kind
    }

    /// The multiplexed protocol seen by the acquisition chain.
    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    /// Meshes of the separate conductors.
    pub fn meshes(&self) -> Vec<&Mesh> {
        self.parts.iter().map(|p| &p.mesh).collect()
    }

    pub fn rest_state(&self) -> BendState {
        match self.kind {
            ActuatorKind::Hinged => BendState::rest_hinged(),
            ActuatorKind::Finger => BendState::rest_finger(),
        }
    }

    pub fn n_elements(&self) -> usize {
        self.parts.iter().map(|p| p.mesh.n_elements()).sum()
    }

    /// Region tag of every element, parts concatenated.
    pub fn element_tags(&self) -> Vec<u32> {
        self.parts
            .iter()
            .flat_map(|p| p.mesh.region_tags().iter().copied())
            .collect()
    }

    pub fn region_names(&self) -> BTreeMap<u32, String> {
        let mut out = BTreeMap::new();
        for p in &self.parts {
            out.extend(p.mesh.region_names().iter().map(|(k, v)| (*k, v.clone())));
        }
        out
    }

    /// Chamber tags, in order.
    pub fn chambers(&self) -> Vec<u32> {
        match self.kind {
            ActuatorKind::Hinged => vec![CHAMBER_1, CHAMBER_2, CHAMBER_3],
            ActuatorKind::Finger => vec![CHAMBER_1, CHAMBER_2],
        }
    }

    /// Element centroids in a common frame, mm.
    pub fn element_centroids(&self) -> Vec<Point> {
        self.parts
            .iter()
            .flat_map(|p| {
                (0..p.mesh.n_elements()).map(move |k| {
                    let c = p.mesh.element_centroid(k);
                    [c[0] + p.offset[0], c[1] + p.offset[1], c[2] + p.offset[2]]
                })
            })
            .collect()
    }

    pub fn element_volumes(&self) -> Vec<f64> {
        self.parts
            .iter()
            .flat_map(|p| (0..p.mesh.n_elements()).map(move |k| p.mesh.element_volume(k)))
            .collect()
    }

    /// Per-element conductivity of `state` starting from a uniform `sigma0`.
    pub fn conductivity(&self, state: &BendState, params: &SurrogateParams, sigma0: f64) -> Result<Vec<f64>> {
        let expected = self.rest_state();
        if std::mem::discriminant(state) != std::mem::discriminant(&expected) {
            return Err(Error::invalid(format!(
                "state {} does not apply to this actuator",
                state.label()
            )));
        }
        let mut out = Vec::with_capacity(self.n_elements());
        for p in &self.parts {
            let base = ConductivityField::uniform(&p.mesh, sigma0)?;
            out.extend_from_slice(bend_to_conductivity(&p.mesh, &base, state, params)?.values());
        }
        Ok(out)
    }

    /// Assembles and factors the system of every part at `sigma`.
    pub fn solver(&self, sigma: &[f64]) -> Result<ActuatorSolver<'_>> {
        let fields = self.split(sigma)?;
        let systems = self
            .parts
            .iter()
            .zip(&fields)
            .map(|(p, s)| CemSystem::assemble(&p.mesh, s, Grounding::default()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ActuatorSolver {
            actuator: self,
            systems,
        })
    }

    fn split(&self, sigma: &[f64]) -> Result<Vec<ConductivityField>> {
        if sigma.len() != self.n_elements() {
            return Err(Error::invalid(format!(
                "conductivity has {} values for {} elements",
                sigma.len(),
                self.n_elements()
            )));
        }
        let mut start = 0;
        self.parts
            .iter()
            .map(|p| {
                let n = p.mesh.n_elements();
                let f = ConductivityField::new(sigma[start..start + n].to_vec());
                start += n;
                f
            })
            .collect()
    }
}

/// Factored systems of an actuator at a reference conductivity.
#[derive(Debug, Clone)]
pub struct ActuatorSolver<'a> {
    actuator: &'a Actuator,
    systems: Vec<CemSystem>,
}

impl ActuatorSolver<'_> {
    /// Voltages of the multiplexed protocol at the reference conductivity.
    pub fn reference_voltages(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (p, sys) in self.actuator.parts.iter().zip(&self.systems) {
            out.extend(solve_protocol(sys.clone(), &p.protocol)?.voltages);
        }
        Ok(out)
    }

    /// Voltages at another conductivity, reusing the reference assembly.
    pub fn voltages(&self, sigma: &[f64]) -> Result<Vec<f64>> {
        let fields = self.actuator.split(sigma)?;
        let mut out = Vec::new();
        for ((p, sys), s) in self.actuator.parts.iter().zip(&self.systems).zip(&fields) {
            let updated = if s == sys.conductivity() {
                sys.clone()
            } else {
                sys.with_conductivity(s)?
            };
            out.extend(solve_protocol(updated, &p.protocol)?.voltages);
        }
        Ok(out)
    }

    /// Block-diagonal Jacobian over all elements at the reference conductivity.
    pub fn jacobian(&self) -> Result<Jacobian> {
        let a = self.actuator;
        let rows = a.protocol.measurement_count();
        let mut matrix = DMatrix::zeros(rows, a.n_elements());
        let (mut r0, mut c0) = (0, 0);
        let mut hashes = (String::new(), String::new());
        for (p, sys) in a.parts.iter().zip(&self.systems) {
            let fw = solve_protocol(sys.clone(), &p.protocol)?;
            let j = jacobian_from_solution(&p.mesh, &p.protocol, &fw)?;
            matrix
                .view_mut((r0, c0), (j.rows(), j.cols()))
                .copy_from(&j.matrix);
            r0 += j.rows();
            c0 += j.cols();
            hashes.0.push_str(&j.provenance.mesh);
            hashes.1.push_str(&j.provenance.sigma);
        }
        let provenance = if a.parts.len() == 1 {
            Provenance {
                mesh: hashes.0,
                sigma: hashes.1,
                protocol: a.protocol.content_hash(),
            }
        } else {
            Provenance {
                mesh: crate::sha256_hex(hashes.0.as_bytes()),
                sigma: crate::sha256_hex(hashes.1.as_bytes()),
                protocol: a.protocol.content_hash(),
            }
        };
        Jacobian::new(matrix, ColumnBasis::Elements, provenance)
    }
}
