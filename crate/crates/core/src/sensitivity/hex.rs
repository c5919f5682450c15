use nalgebra::DMatrix;

use super::{ColumnBasis, Jacobian};
use crate::error::{Error, Result};
use crate::mesh::{geometry::Point, Mesh};

/// Axis-aligned voxel grid laid over (part of) a mesh.
///
/// Each element belongs to the voxel containing its centroid, with weight 1;
/// elements whose centroid is outside the grid have weight 0. Only voxels
/// holding at least one element become columns.
#[derive(Debug, Clone, PartialEq)]
pub struct HexSubdomain {
    pub origin: Point,
    pub voxel_size: f64,
    pub counts: [usize; 3],
    /// Grid index of each occupied voxel, in column order.
    pub voxels: Vec<[usize; 3]>,
    /// Column of each element, if covered.
    pub element_voxel: Vec<Option<usize>>,
    pub weights: Vec<f64>,
    /// Summed element volume per voxel column, mm³.
    pub voxel_volume: Vec<f64>,
}

impl HexSubdomain {
    /// Grid over `bounds` (default: the mesh bounding box).
    pub fn build(mesh: &Mesh, voxel_size: f64, bounds: Option<(Point, Point)>) -> Result<Self> {
        if !(voxel_size > 0.0) {
            return Err(Error::invalid("voxel size must be positive"));
        }
        let min_edge = mesh.min_edge_length();
        if voxel_size <= min_edge {
            return Err(Error::invalid(format!(
                "voxel size {voxel_size} mm must exceed the smallest element edge {min_edge} mm"
            )));
        }
        let dim = mesh.dimension();
        let (lo, hi) = bounds.unwrap_or_else(|| mesh.bounding_box());
        let mut counts = [1usize; 3];
        for d in 0..dim {
            if !(hi[d] > lo[d]) {
                return Err(Error::invalid("subdomain bounds are empty"));
            }
            counts[d] = ((hi[d] - lo[d]) / voxel_size - 1e-9).ceil().max(1.0) as usize;
        }
        let linear = |v: [usize; 3]| (v[2] * counts[1] + v[1]) * counts[0] + v[0];

        let mut cell_of = Vec::with_capacity(mesh.n_elements());
        for k in 0..mesh.n_elements() {
            let c = mesh.element_centroid(k);
            let mut v = [0usize; 3];
            let mut inside = true;
            for d in 0..dim {
                let t = (c[d] - lo[d]) / voxel_size;
                if t < 0.0 || c[d] > hi[d] {
                    inside = false;
                    break;
                }
                v[d] = (t.floor() as usize).min(counts[d] - 1);
            }
            cell_of.push(inside.then_some(v));
        }
        let mut voxels: Vec<[usize; 3]> = cell_of.iter().flatten().copied().collect();
        voxels.sort_by_key(|&v| linear(v));
        voxels.dedup();
        if voxels.is_empty() {
            return Err(Error::invalid("voxel grid does not intersect the mesh"));
        }
        let element_voxel: Vec<Option<usize>> = cell_of
            .iter()
            .map(|c| c.map(|v| voxels.binary_search_by_key(&linear(v), |&w| linear(w)).unwrap()))
            .collect();
        let weights = element_voxel
            .iter()
            .map(|c| if c.is_some() { 1.0 } else { 0.0 })
            .collect();
        let mut voxel_volume = vec![0.0; voxels.len()];
        for (k, c) in element_voxel.iter().enumerate() {
            if let Some(c) = c {
                voxel_volume[*c] += mesh.element_volume(k);
            }
        }
        Ok(HexSubdomain {
            origin: lo,
            voxel_size,
            counts,
            voxels,
            element_voxel,
            weights,
            voxel_volume,
        })
    }

    pub fn n_voxels(&self) -> usize {
        self.voxels.len()
    }

    /// Centre of voxel column `c`, mm.
    pub fn voxel_centre(&self, c: usize) -> Point {
        let v = self.voxels[c];
        let mut p = self.origin;
        for d in 0..3 {
            if self.counts[d] > 1 || d < 2 {
                p[d] += (v[d] as f64 + 0.5) * self.voxel_size;
            }
        }
        p
    }

    /// Weighted sum of element columns into voxel columns.
    pub fn aggregate(&self, j: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(j.nrows(), self.n_voxels());
        for (k, c) in self.element_voxel.iter().enumerate() {
            if let Some(c) = c {
                let w = self.weights[k];
                for r in 0..j.nrows() {
                    out[(r, *c)] += w * j[(r, k)];
                }
            }
        }
        out
    }

    /// Per-element field from per-voxel values (0 outside the grid).
    pub fn expand(&self, voxel_values: &[f64]) -> Vec<f64> {
        self.element_voxel
            .iter()
            .map(|c| c.map_or(0.0, |c| voxel_values[c]))
            .collect()
    }

    /// Per-voxel values from a per-element field, volume-averaged.
    pub fn restrict(&self, mesh: &Mesh, element_values: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_voxels()];
        for (k, c) in self.element_voxel.iter().enumerate() {
            if let Some(c) = c {
                acc[*c] += element_values[k] * mesh.element_volume(k);
            }
        }
        acc.iter().zip(&self.voxel_volume).map(|(a, v)| a / v).collect()
    }
}

/// Aggregates an element Jacobian onto a voxel grid covering the mesh.
pub fn aggregate_to_hex(j: &Jacobian, mesh: &Mesh, voxel_size: f64) -> Result<(Jacobian, HexSubdomain)> {
    if j.basis != ColumnBasis::Elements || j.cols() != mesh.n_elements() {
        return Err(Error::invalid("Jacobian columns do not match the mesh elements"));
    }
    let hex = HexSubdomain::build(mesh, voxel_size, None)?;
    let matrix = hex.aggregate(&j.matrix);
    let out = Jacobian::new(matrix, ColumnBasis::Voxels, j.provenance.clone())?;
    Ok((out, hex))
}
