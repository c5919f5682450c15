//! Measurement sensitivity (Jacobian) by the adjoint method.

mod hex;
mod io;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use hex::{aggregate_to_hex, HexSubdomain};
pub use io::{load_jacobian, parse_jacobian, save_jacobian, write_jacobian};

use crate::error::{Error, Result};
use crate::forward::{
    forward_solve, ConductivityField, FieldSolution, ForwardSolution, InjectionTone,
    MeasurementPair, Protocol,
};
use crate::mesh::Mesh;

/// What the columns of a Jacobian refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnBasis {
    Elements,
    Voxels,
}

impl ColumnBasis {
    pub fn as_str(&self) -> &'static str {
        match self {
            ColumnBasis::Elements => "elements",
            ColumnBasis::Voxels => "voxels",
        }
    }
}

/// Hashes of the inputs a Jacobian was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub mesh: String,
    pub sigma: String,
    pub protocol: String,
}

/// Sensitivity of each measured voltage to each column's conductivity,
/// V per (S/m). Rows follow the protocol's injection-major measurement order.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub matrix: DMatrix<f64>,
    pub basis: ColumnBasis,
    pub provenance: Provenance,
}

impl Jacobian {
    pub fn new(matrix: DMatrix<f64>, basis: ColumnBasis, provenance: Provenance) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("Jacobian has non-finite entries"));
        }
        Ok(Jacobian {
            matrix,
            basis,
            provenance,
        })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `J * delta_sigma`.
    pub fn apply(&self, delta_sigma: &[f64]) -> Vec<f64> {
        assert_eq!(delta_sigma.len(), self.cols());
        let mut out = vec![0.0; self.rows()];
        for (k, &d) in delta_sigma.iter().enumerate() {
            if d != 0.0 {
                for (o, j) in out.iter_mut().zip(self.matrix.column(k).iter()) {
                    *o += j * d;
                }
            }
        }
        out
    }
}

/// Potential gradient per element, V/m.
fn element_gradients(mesh: &Mesh, field: &FieldSolution) -> Vec<[f64; 3]> {
    (0..mesh.n_elements())
        .map(|k| field.gradient(mesh, k))
        .collect()
}

/// Jacobian from an existing forward solution; one extra solve per distinct
/// measurement pair.
pub fn jacobian_from_solution(
    mesh: &Mesh,
    protocol: &Protocol,
    forward: &ForwardSolution,
) -> Result<Jacobian> {
    let pairs = protocol.channels();
    let adjoint: Vec<FieldSolution> = pairs
        .par_iter()
        .map(|p| {
            forward.system.solve_injection(&InjectionTone {
                source: p.positive,
                sink: p.negative,
                amplitude: 1.0,
                frequency: 1e3,
            })
        })
        .collect::<Result<_>>()?;
    let adjoint_grads: BTreeMap<MeasurementPair, Vec<[f64; 3]>> = pairs
        .iter()
        .zip(&adjoint)
        .map(|(p, f)| (*p, element_gradients(mesh, f)))
        .collect();
    let drive_grads: Vec<Vec<[f64; 3]>> = forward
        .fields
        .iter()
        .map(|f| element_gradients(mesh, f))
        .collect();
    let dim = mesh.dimension() as i32;
    let volumes: Vec<f64> = (0..mesh.n_elements())
        .map(|k| mesh.element_volume(k) * 1e-3f64.powi(dim))
        .collect();

    let measurements = protocol.measurements();
    let rows: Vec<Vec<f64>> = measurements
        .par_iter()
        .map(|m| {
            let gd = &drive_grads[m.injection];
            let gm = &adjoint_grads[&m.pair];
            (0..volumes.len())
                .map(|k| {
                    let a = gd[k];
                    let b = gm[k];
                    -volumes[k] * (a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(rows.len(), volumes.len(), |r, c| rows[r][c]);
    Jacobian::new(
        matrix,
        ColumnBasis::Elements,
        Provenance {
            mesh: mesh.content_hash(),
            sigma: forward.system.conductivity().content_hash(),
            protocol: protocol.content_hash(),
        },
    )
}

pub fn compute_jacobian(
    mesh: &Mesh,
    sigma: &ConductivityField,
    protocol: &Protocol,
) -> Result<Jacobian> {
    let forward = forward_solve(mesh, sigma, protocol)?;
    jacobian_from_solution(mesh, protocol, &forward)
}

/// Row `measurement` of the Jacobian as a per-column field.
pub fn sensitivity_map(j: &Jacobian, measurement: usize) -> Result<Vec<f64>> {
    if measurement >= j.rows() {
        return Err(Error::invalid(format!(
            "measurement index {measurement} out of range (Jacobian has {} rows)",
            j.rows()
        )));
    }
    Ok(j.matrix.row(measurement).iter().copied().collect())
}

/// Mean `|value|` per unit volume in each tagged region, 1/mm³ scaled.
pub fn region_density(mesh: &Mesh, map: &[f64]) -> BTreeMap<u32, f64> {
    let mut mass: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for (k, (tag, value)) in mesh.region_tags().iter().zip(map).enumerate() {
        let e = mass.entry(*tag).or_default();
        e.0 += value.abs();
        e.1 += mesh.element_volume(k);
    }
    mass.into_iter().map(|(t, (m, v))| (t, m / v)).collect()
}

/// Total `|value|` per tagged region.
pub fn region_mass(mesh: &Mesh, map: &[f64]) -> BTreeMap<u32, f64> {
    let mut mass: BTreeMap<u32, f64> = BTreeMap::new();
    for (tag, value) in mesh.region_tags().iter().zip(map) {
        *mass.entry(*tag).or_default() += value.abs();
    }
    mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{end_face_electrodes, generate_box_mesh};

    #[test]
    fn self_impedance_sensitivity_is_non_positive() {
        let m = generate_box_mesh(&[12.0, 4.0, 2.0], 1.0).unwrap();
        let m = end_face_electrodes(&m, 0, 0.0).unwrap();
        let p = Protocol::new(vec![crate::forward::Injection {
            tone: InjectionTone::new(1, 2, 1e-4, 1e3).unwrap(),
            measurements: vec![MeasurementPair::new(1, 2)],
        }])
        .unwrap();
        let s = ConductivityField::uniform(&m, 0.2).unwrap();
        let j = compute_jacobian(&m, &s, &p).unwrap();
        assert!(j.matrix.iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn zero_jacobian_gives_zero_map() {
        let j = Jacobian::new(DMatrix::zeros(3, 5), ColumnBasis::Elements, Provenance::default()).unwrap();
        assert_eq!(sensitivity_map(&j, 2).unwrap(), vec![0.0; 5]);
        assert!(sensitivity_map(&j, 3).is_err());
    }
}
