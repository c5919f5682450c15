use std::collections::BTreeMap;

use super::geometry::{self, Point};
use super::{ElectrodePatch, Mesh};
use crate::error::{Error, Result};

/// Structured simplicial grid over an axis-aligned box.
///
/// Each cell is split into 6 tetrahedra (2 triangles in 2D) along one of its
/// main diagonals; the diagonal alternates with cell parity along every axis,
/// which keeps the mesh conforming and makes it mirror symmetric about the
/// box centre whenever the cell count along that axis is even.
struct StructuredGrid {
    dim: usize,
    counts: [usize; 3],
    spacing: [f64; 3],
}

impl StructuredGrid {
    fn node_id(&self, ijk: [usize; 3]) -> usize {
        (ijk[2] * (self.counts[1] + 1) + ijk[1]) * (self.counts[0] + 1) + ijk[0]
    }

    fn cell_centre(&self, ijk: [usize; 3]) -> Point {
        let mut c = [0.0; 3];
        for d in 0..self.dim {
            c[d] = (ijk[d] as f64 + 0.5) * self.spacing[d];
        }
        c
    }

    /// Builds the mesh for the kept cells, tagging each element by centroid.
    fn build<K, T>(&self, keep: K, tag: T, names: BTreeMap<u32, String>) -> Result<Mesh>
    where
        K: Fn(&Point) -> bool,
        T: Fn(&Point) -> u32,
    {
        let dim = self.dim;
        let nk = if dim == 3 { self.counts[2] } else { 1 };
        let nzn = if dim == 3 { self.counts[2] + 1 } else { 1 };
        let mut all_nodes = Vec::new();
        for k in 0..nzn {
            for j in 0..=self.counts[1] {
                for i in 0..=self.counts[0] {
                    all_nodes.push([
                        i as f64 * self.spacing[0],
                        j as f64 * self.spacing[1],
                        if dim == 3 { k as f64 * self.spacing[2] } else { 0.0 },
                    ]);
                }
            }
        }

        let local: Vec<Vec<[usize; 3]>> = if dim == 3 {
            let perms = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            perms
                .iter()
                .map(|p| {
                    let mut v = [0usize; 3];
                    let mut path = vec![v];
                    for &axis in p {
                        v[axis] = 1;
                        path.push(v);
                    }
                    path
                })
                .collect()
        } else {
            vec![
                vec![[0, 0, 0], [1, 0, 0], [1, 1, 0]],
                vec![[0, 0, 0], [0, 1, 0], [1, 1, 0]],
            ]
        };

        let mut cells = Vec::new();
        let mut tags = Vec::new();
        for k in 0..nk {
            for j in 0..self.counts[1] {
                for i in 0..self.counts[0] {
                    let ijk = [i, j, k];
                    if !keep(&self.cell_centre(ijk)) {
                        continue;
                    }
                    for simplex in &local {
                        let mut el: Vec<usize> = simplex
                            .iter()
                            .map(|corner| {
                                let mut g = ijk;
                                for d in 0..dim {
                                    // mirror the local corner on odd cells
                                    let bit = corner[d] ^ (ijk[d] & 1);
                                    g[d] += bit;
                                }
                                self.node_id(g)
                            })
                            .collect();
                        let pts: Vec<Point> = el.iter().map(|&n| all_nodes[n]).collect();
                        if geometry::signed_measure(&pts) < 0.0 {
                            el.swap(0, 1);
                        }
                        let pts: Vec<Point> = el.iter().map(|&n| all_nodes[n]).collect();
                        tags.push(tag(&geometry::centroid(&pts)));
                        cells.extend(el);
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::invalid("geometry removes every cell of the grid"));
        }

        let mut remap = vec![usize::MAX; all_nodes.len()];
        let mut nodes = Vec::new();
        for c in &mut cells {
            if remap[*c] == usize::MAX {
                remap[*c] = nodes.len();
                nodes.push(all_nodes[*c]);
            }
            *c = remap[*c];
        }
        Mesh::new(dim, nodes, cells, tags, names, Vec::new())
    }
}

fn cell_count(length: f64, h: f64) -> usize {
    ((length / h) - 1e-9).ceil().max(1.0) as usize
}

fn even(n: usize) -> usize {
    n + (n & 1)
}

/// Structured mesh of an axis-aligned box `[0, L_x] × [0, L_y] (× [0, L_z])`.
///
/// `lengths` has two entries for a triangle mesh, three for tetrahedra.
pub fn generate_box_mesh(lengths: &[f64], target_edge_length: f64) -> Result<Mesh> {
    let dim = lengths.len();
    if dim != 2 && dim != 3 {
        return Err(Error::invalid("box needs 2 or 3 side lengths"));
    }
    if lengths.iter().any(|&l| !(l > 0.0)) || !(target_edge_length > 0.0) {
        return Err(Error::invalid("box lengths and edge length must be positive"));
    }
    let smallest = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    if target_edge_length > smallest {
        return Err(Error::invalid(format!(
            "target edge length {target_edge_length} mm exceeds smallest box dimension {smallest} mm"
        )));
    }
    let mut counts = [1; 3];
    let mut spacing = [0.0; 3];
    for d in 0..dim {
        counts[d] = cell_count(lengths[d], target_edge_length);
        spacing[d] = lengths[d] / counts[d] as f64;
    }
    let grid = StructuredGrid {
        dim,
        counts,
        spacing,
    };
    let names = BTreeMap::from([(0, "domain".to_string())]);
    grid.build(|_| true, |_| 0, names)
}

/// Attaches electrode 1 to the whole `min` face and electrode 2 to the whole
/// `max` face along `axis`.
pub fn end_face_electrodes(mesh: &Mesh, axis: usize, contact_impedance: f64) -> Result<Mesh> {
    let (lo, hi) = mesh.bounding_box();
    let tol = 1e-9 * (hi[axis] - lo[axis]).abs().max(1.0);
    let low = mesh.select_boundary_facets(|c, _| (c[axis] - lo[axis]).abs() < tol);
    let high = mesh.select_boundary_facets(|c, _| (c[axis] - hi[axis]).abs() < tol);
    mesh.with_electrodes(vec![
        ElectrodePatch {
            id: 1,
            facets: low,
            contact_impedance,
        },
        ElectrodePatch {
            id: 2,
            facets: high,
            contact_impedance,
        },
    ])
}

/// Outer face of a box-shaped body an electrode is mounted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    /// `z = thickness`
    Top,
    /// `z = 0`
    Bottom,
    /// `y = 0`
    SideMin,
    /// `y = width`
    SideMax,
}

/// Electrode placement on a structured body. The patch centre is snapped to
/// the nearest grid cell centre on the face.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeSite {
    pub id: usize,
    pub face: Face,
    /// In-plane position on the face: (x, y) for top/bottom, (x, z) for sides.
    pub position: [f64; 2],
}

fn attach_sites(
    mesh: &Mesh,
    sites: &[ElectrodeSite],
    extents: [f64; 3],
    spacing: [f64; 3],
    electrode_size: f64,
    contact_impedance: f64,
) -> Result<Mesh> {
    let snap = |v: f64, h: f64, len: f64| {
        let n = (len / h).round() as i64;
        let i = ((v - 0.5 * h) / h).round().clamp(0.0, (n - 1) as f64);
        (i + 0.5) * h
    };
    let mut electrodes = Vec::new();
    for site in sites {
        let (normal_axis, outward, plane, axes) = match site.face {
            Face::Top => (2, 1.0, extents[2], [0, 1]),
            Face::Bottom => (2, -1.0, 0.0, [0, 1]),
            Face::SideMin => (1, -1.0, 0.0, [0, 2]),
            Face::SideMax => (1, 1.0, extents[1], [0, 2]),
        };
        let centre = [
            snap(site.position[0], spacing[axes[0]], extents[axes[0]]),
            snap(site.position[1], spacing[axes[1]], extents[axes[1]]),
        ];
        let half = [
            0.5 * electrode_size.max(spacing[axes[0]]),
            0.5 * electrode_size.max(spacing[axes[1]]),
        ];
        let facets = mesh.select_boundary_facets(|c, n| {
            (c[normal_axis] - plane).abs() < 1e-9
                && n[normal_axis] * outward > 0.5
                && (c[axes[0]] - centre[0]).abs() < half[0]
                && (c[axes[1]] - centre[1]).abs() < half[1]
        });
        if facets.is_empty() {
            return Err(Error::invalid(format!(
                "electrode {} at {:?} does not touch the mesh surface",
                site.id, site.position
            )));
        }
        electrodes.push(ElectrodePatch {
            id: site.id,
            facets,
            contact_impedance,
        });
    }
    mesh.with_electrodes(electrodes)
}

/// Geometry of the double-hinge actuator.
///
/// The planform is a `length × width` rectangle of saline, `thickness`
/// deep, interrupted at one and two thirds of its length by diamond-shaped
/// welds measuring `hinge_width` across the actuator and `hinge_length`
/// along it. The fluid passes through the narrow gaps beside each diamond.
#[derive(Debug, Clone, PartialEq)]
pub struct HingedActuatorParams {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub hinge_length: f64,
    pub hinge_width: f64,
    pub edge_length: f64,
    pub electrode_size: f64,
    pub contact_impedance: f64,
    pub electrodes: Vec<ElectrodeSite>,
}

impl Default for HingedActuatorParams {
    fn default() -> Self {
        let length = 200.0;
        let width = 50.0;
        let h1 = length / 3.0;
        let h2 = 2.0 * length / 3.0;
        let y = width / 2.0;
        let site = |id, face, x| ElectrodeSite {
            id,
            face,
            position: [x, y],
        };
        HingedActuatorParams {
            length,
            width,
            thickness: 8.0,
            hinge_length: 10.0,
            hinge_width: 20.0,
            edge_length: 2.5,
            electrode_size: 2.0,
            contact_impedance: 1e-3,
            // Two electrodes per chamber, each injection pair on opposite films.
            electrodes: vec![
                site(1, Face::Top, length / 6.0),
                site(2, Face::Top, h1 - 15.0),
                site(3, Face::Bottom, h1 + 15.0),
                site(4, Face::Top, h2 - 15.0),
                site(5, Face::Bottom, h2 + 15.0),
                site(6, Face::Bottom, 5.0 * length / 6.0),
            ],
        }
    }
}

impl HingedActuatorParams {
    /// Hinge-axis positions along the actuator.
    pub fn hinge_positions(&self) -> [f64; 2] {
        [self.length / 3.0, 2.0 * self.length / 3.0]
    }
}

pub const CHAMBER_1: u32 = 1;
pub const HINGE_1: u32 = 2;
pub const CHAMBER_2: u32 = 3;
pub const HINGE_2: u32 = 4;
pub const CHAMBER_3: u32 = 5;

pub fn generate_hinged_actuator_mesh(params: &HingedActuatorParams) -> Result<Mesh> {
    let p = params;
    if [p.length, p.width, p.thickness, p.hinge_length, p.hinge_width, p.edge_length, p.electrode_size]
        .iter()
        .any(|v| !(*v > 0.0))
    {
        return Err(Error::invalid("actuator dimensions must be positive"));
    }
    if p.hinge_width >= p.width {
        return Err(Error::invalid(format!(
            "hinge width {} mm must be smaller than actuator width {} mm",
            p.hinge_width, p.width
        )));
    }
    if p.hinge_length >= p.length / 3.0 {
        return Err(Error::invalid("hinge length must be shorter than a chamber"));
    }
    if p.edge_length > p.thickness {
        return Err(Error::invalid("edge length exceeds actuator thickness"));
    }
    let counts = [
        even(cell_count(p.length, p.edge_length)),
        even(cell_count(p.width, p.edge_length)),
        even(cell_count(p.thickness, p.edge_length)),
    ];
    let extents = [p.length, p.width, p.thickness];
    let spacing = [0, 1, 2].map(|d| extents[d] / counts[d] as f64);
    let grid = StructuredGrid {
        dim: 3,
        counts,
        spacing,
    };
    let hinges = p.hinge_positions();
    let (half_l, half_w, mid_y) = (p.hinge_length / 2.0, p.hinge_width / 2.0, p.width / 2.0);
    let keep = |c: &Point| {
        hinges
            .iter()
            .all(|&xh| (c[0] - xh).abs() / half_l + (c[1] - mid_y).abs() / half_w >= 1.0)
    };
    let tag = |c: &Point| {
        if (c[0] - hinges[0]).abs() <= half_l {
            HINGE_1
        } else if (c[0] - hinges[1]).abs() <= half_l {
            HINGE_2
        } else if c[0] < hinges[0] {
            CHAMBER_1
        } else if c[0] < hinges[1] {
            CHAMBER_2
        } else {
            CHAMBER_3
        }
    };
    let names = BTreeMap::from([
        (CHAMBER_1, "chamber-1".to_string()),
        (HINGE_1, "hinge-1".to_string()),
        (CHAMBER_2, "chamber-2".to_string()),
        (HINGE_2, "hinge-2".to_string()),
        (CHAMBER_3, "chamber-3".to_string()),
    ]);
    let mesh = grid.build(keep, tag, names)?;
    attach_sites(&mesh, &p.electrodes, extents, spacing, p.electrode_size, p.contact_impedance)
}

/// One hydraulic chamber of the finger actuator: a `length × width × thickness`
/// saline volume with an electrode on each side wall across its centre.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerChamberParams {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub edge_length: f64,
    pub electrode_size: f64,
    pub contact_impedance: f64,
}

impl Default for FingerChamberParams {
    fn default() -> Self {
        FingerChamberParams {
            length: 10.0,
            width: 25.0,
            thickness: 5.0,
            edge_length: 1.25,
            electrode_size: 2.0,
            contact_impedance: 1e-3,
        }
    }
}

pub const FINGER_CHAMBER: u32 = 1;

pub fn generate_finger_chamber_mesh(params: &FingerChamberParams) -> Result<Mesh> {
    let p = params;
    if [p.length, p.width, p.thickness, p.edge_length, p.electrode_size]
        .iter()
        .any(|v| !(*v > 0.0))
    {
        return Err(Error::invalid("chamber dimensions must be positive"));
    }
    if p.edge_length > p.thickness.min(p.length) {
        return Err(Error::invalid("edge length exceeds chamber dimensions"));
    }
    let counts = [
        even(cell_count(p.length, p.edge_length)),
        even(cell_count(p.width, p.edge_length)),
        even(cell_count(p.thickness, p.edge_length)),
    ];
    let extents = [p.length, p.width, p.thickness];
    let spacing = [0, 1, 2].map(|d| extents[d] / counts[d] as f64);
    let grid = StructuredGrid {
        dim: 3,
        counts,
        spacing,
    };
    let names = BTreeMap::from([(FINGER_CHAMBER, "chamber".to_string())]);
    let mesh = grid.build(|_| true, |_| FINGER_CHAMBER, names)?;
    let centre = [p.length / 2.0, p.thickness / 2.0];
    let sites = [
        ElectrodeSite {
            id: 1,
            face: Face::SideMin,
            position: centre,
        },
        ElectrodeSite {
            id: 2,
            face: Face::SideMax,
            position: centre,
        },
    ];
    attach_sites(&mesh, &sites, extents, spacing, p.electrode_size, p.contact_impedance)
}
