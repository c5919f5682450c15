//! Simplicial finite-element meshes with boundary electrode patches.
//!
//! Coordinates are in millimetres. Triangles (2D) and tetrahedra (3D) are
//! stored in a flat connectivity array with positive orientation.

mod generate;
pub mod geometry;
mod io;
mod refine;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use generate::{
    end_face_electrodes, generate_box_mesh, generate_finger_chamber_mesh,
    generate_hinged_actuator_mesh, ElectrodeSite, Face, FingerChamberParams, HingedActuatorParams,
};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};
pub use generate::{CHAMBER_1, CHAMBER_2, CHAMBER_3, FINGER_CHAMBER, HINGE_1, HINGE_2};
pub use refine::refine_near_electrodes;

use crate::error::{Error, Result};
use geometry::Point;

/// A sorted tuple of node indices bounding one element facet.
pub type FacetKey = Vec<usize>;

/// A facet lying on the mesh boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: FacetKey,
    pub element: usize,
    /// Outward unit normal.
    pub normal: Point,
}

/// An electrode: a cluster of boundary facets sharing one contact impedance.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodePatch {
    pub id: usize,
    /// Facets as sorted node tuples.
    pub facets: Vec<FacetKey>,
    /// Contact impedance in Ω·m² (Ω·m for 2D meshes). Zero denotes an
    /// ideal, perfectly conducting electrode.
    pub contact_impedance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<Point>,
    cells: Vec<usize>,
    region_tags: Vec<u32>,
    region_names: BTreeMap<u32, String>,
    electrodes: Vec<ElectrodePatch>,
    boundary: Vec<BoundaryFacet>,
    boundary_index: HashMap<FacetKey, usize>,
}

impl Mesh {
    /// Builds a mesh and checks every invariant: positive element measure,
    /// electrodes on the boundary and pairwise disjoint, single connected
    /// component.
    pub fn new(
        dim: usize,
        nodes: Vec<Point>,
        cells: Vec<usize>,
        region_tags: Vec<u32>,
        region_names: BTreeMap<u32, String>,
        mut electrodes: Vec<ElectrodePatch>,
    ) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::mesh(format!("dimension must be 2 or 3, got {dim}")));
        }
        let npe = dim + 1;
        if !cells.len().is_multiple_of(npe) || cells.is_empty() {
            return Err(Error::mesh("connectivity length is not a multiple of the element size"));
        }
        let n_el = cells.len() / npe;
        if region_tags.len() != n_el {
            return Err(Error::mesh(format!(
                "{} region tags for {n_el} elements",
                region_tags.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&c| c >= nodes.len()) {
            return Err(Error::mesh(format!("element references missing node {bad}")));
        }
        for electrode in &mut electrodes {
            for f in &mut electrode.facets {
                f.sort_unstable();
            }
            electrode.facets.sort();
        }
        electrodes.sort_by_key(|e| e.id);

        let mut mesh = Mesh {
            dim,
            nodes,
            cells,
            region_tags,
            region_names,
            electrodes,
            boundary: Vec::new(),
            boundary_index: HashMap::new(),
        };
        for k in 0..n_el {
            let v = mesh.element_volume(k);
            if !(v > 0.0) {
                return Err(Error::mesh(format!(
                    "element {k} has non-positive measure {v:e}"
                )));
            }
        }
        mesh.build_boundary();
        mesh.check_connected()?;
        mesh.check_electrodes()?;
        Ok(mesh)
    }

    /// Same mesh with a different electrode set.
    pub fn with_electrodes(&self, electrodes: Vec<ElectrodePatch>) -> Result<Mesh> {
        Mesh::new(
            self.dim,
            self.nodes.clone(),
            self.cells.clone(),
            self.region_tags.clone(),
            self.region_names.clone(),
            electrodes,
        )
    }

    /// Same mesh with different region labels.
    pub fn with_regions(&self, tags: Vec<u32>, names: BTreeMap<u32, String>) -> Result<Mesh> {
        Mesh::new(
            self.dim,
            self.nodes.clone(),
            self.cells.clone(),
            tags,
            names,
            self.electrodes.clone(),
        )
    }

    fn build_boundary(&mut self) {
        let mut seen: BTreeMap<FacetKey, (usize, usize)> = BTreeMap::new();
        for k in 0..self.n_elements() {
            let el = self.element(k);
            for skip in 0..el.len() {
                let mut key: FacetKey = el
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &n)| n)
                    .collect();
                key.sort_unstable();
                seen.entry(key).and_modify(|e| e.1 += 1).or_insert((k, 1));
            }
        }
        self.boundary = seen
            .into_iter()
            .filter(|(_, (_, count))| *count == 1)
            .map(|(nodes, (element, _))| {
                let pts: Vec<Point> = nodes.iter().map(|&n| self.nodes[n]).collect();
                let interior = self.element_centroid(element);
                let normal = geometry::facet_normal(&pts, &interior);
                BoundaryFacet {
                    nodes,
                    element,
                    normal,
                }
            })
            .collect();
        self.boundary_index = self
            .boundary
            .iter()
            .enumerate()
            .map(|(i, f)| (f.nodes.clone(), i))
            .collect();
    }

    fn check_connected(&self) -> Result<()> {
        let n_el = self.n_elements();
        let mut parent: Vec<usize> = (0..n_el).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut owner: HashMap<FacetKey, usize> = HashMap::new();
        for k in 0..n_el {
            let el = self.element(k).to_vec();
            for skip in 0..el.len() {
                let mut key: FacetKey = el
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &n)| n)
                    .collect();
                key.sort_unstable();
                if let Some(&other) = owner.get(&key) {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, other));
                    parent[a] = b;
                } else {
                    owner.insert(key, k);
                }
            }
        }
        let root = find(&mut parent, 0);
        for k in 1..n_el {
            if find(&mut parent, k) != root {
                return Err(Error::mesh(format!(
                    "mesh is disconnected (element {k} not reachable from element 0)"
                )));
            }
        }
        Ok(())
    }

    fn check_electrodes(&self) -> Result<()> {
        let mut owner: HashMap<&FacetKey, usize> = HashMap::new();
        let mut ids = BTreeSet::new();
        for e in &self.electrodes {
            if e.id == 0 || !ids.insert(e.id) {
                return Err(Error::mesh(format!(
                    "electrode {}: ids must be positive and unique",
                    e.id
                )));
            }
            if !(e.contact_impedance >= 0.0) || !e.contact_impedance.is_finite() {
                return Err(Error::mesh(format!(
                    "electrode {}: contact impedance must be finite and non-negative",
                    e.id
                )));
            }
            if e.facets.is_empty() {
                return Err(Error::mesh(format!("electrode {}: no facets", e.id)));
            }
            for f in &e.facets {
                if f.len() != self.dim {
                    return Err(Error::mesh(format!(
                        "electrode {}: facet {:?} has {} nodes, expected {}",
                        e.id,
                        f,
                        f.len(),
                        self.dim
                    )));
                }
                if !self.boundary_index.contains_key(f) {
                    return Err(Error::mesh(format!(
                        "electrode {}: facet {:?} is not on the mesh boundary",
                        e.id,
                        f.iter().map(|n| n + 1).collect::<Vec<_>>()
                    )));
                }
                if let Some(other) = owner.insert(f, e.id) {
                    return Err(Error::mesh(format!(
                        "electrode {}: facet {:?} also belongs to electrode {other}",
                        e.id,
                        f.iter().map(|n| n + 1).collect::<Vec<_>>()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn element(&self, k: usize) -> &[usize] {
        let npe = self.dim + 1;
        &self.cells[k * npe..(k + 1) * npe]
    }

    pub fn element_points(&self, k: usize) -> Vec<Point> {
        self.element(k).iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn element_volume(&self, k: usize) -> f64 {
        geometry::signed_measure(&self.element_points(k))
    }

    pub fn element_centroid(&self, k: usize) -> Point {
        geometry::centroid(&self.element_points(k))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_elements()).map(|k| self.element_volume(k)).sum()
    }

    /// Length of the longest edge of element `k`.
    pub fn element_diameter(&self, k: usize) -> f64 {
        let p = self.element_points(k);
        let mut d = 0.0f64;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                d = d.max(geometry::distance(&p[i], &p[j]));
            }
        }
        d
    }

    pub fn min_edge_length(&self) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..self.n_elements() {
            let p = self.element_points(k);
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    best = best.min(geometry::distance(&p[i], &p[j]));
                }
            }
        }
        best
    }

    pub fn region_tags(&self) -> &[u32] {
        &self.region_tags
    }

    pub fn region_names(&self) -> &BTreeMap<u32, String> {
        &self.region_names
    }

    /// Tag for a named region, e.g. `"hinge-1"`.
    pub fn region_tag(&self, name: &str) -> Option<u32> {
        self.region_names
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(&t, _)| t)
    }

    pub fn region_name(&self, tag: u32) -> Option<&str> {
        self.region_names.get(&tag).map(String::as_str)
    }

    pub fn elements_in_region(&self, tag: u32) -> Vec<usize> {
        (0..self.n_elements())
            .filter(|&k| self.region_tags[k] == tag)
            .collect()
    }

    pub fn electrodes(&self) -> &[ElectrodePatch] {
        &self.electrodes
    }

    pub fn electrode(&self, id: usize) -> Option<&ElectrodePatch> {
        self.electrodes.iter().find(|e| e.id == id)
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    /// Index of a facet in [`Mesh::boundary_facets`].
    pub fn boundary_facet_index(&self, facet: &[usize]) -> Option<usize> {
        let mut key = facet.to_vec();
        key.sort_unstable();
        self.boundary_index.get(&key).copied()
    }

    pub fn facet_measure(&self, facet: &[usize]) -> f64 {
        let pts: Vec<Point> = facet.iter().map(|&n| self.nodes[n]).collect();
        geometry::facet_measure(&pts)
    }

    /// Electrode area in mm² (mm in 2D).
    pub fn electrode_area(&self, id: usize) -> Option<f64> {
        self.electrode(id)
            .map(|e| e.facets.iter().map(|f| self.facet_measure(f)).sum())
    }

    /// Area-weighted centroid of an electrode patch.
    pub fn electrode_centroid(&self, id: usize) -> Option<Point> {
        let e = self.electrode(id)?;
        let mut c = [0.0; 3];
        let mut total = 0.0;
        for f in &e.facets {
            let pts: Vec<Point> = f.iter().map(|&n| self.nodes[n]).collect();
            let a = geometry::facet_measure(&pts);
            let fc = geometry::centroid(&pts);
            for d in 0..3 {
                c[d] += a * fc[d];
            }
            total += a;
        }
        Some(c.map(|v| v / total))
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Node permutation induced by reflecting the listed axes about the
    /// bounding-box centre, or `None` if the mesh is not symmetric under it.
    ///
    /// Elements must map onto elements with the same region tag, and every
    /// electrode must map onto an electrode with the same contact impedance.
    pub fn mirror_map(&self, axes: &[usize], tol: f64) -> Option<MirrorMap> {
        let (lo, hi) = self.bounding_box();
        let quant = |p: &Point| -> [i64; 3] { p.map(|v| (v / tol).round() as i64) };
        let lookup: HashMap<[i64; 3], usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, p)| (quant(p), i))
            .collect();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for p in &self.nodes {
            let mut q = *p;
            for &a in axes {
                q[a] = lo[a] + hi[a] - p[a];
            }
            nodes.push(*lookup.get(&quant(&q))?);
        }

        let key = |el: &[usize]| {
            let mut k = el.to_vec();
            k.sort_unstable();
            k
        };
        let elements_by_key: HashMap<Vec<usize>, usize> =
            (0..self.n_elements()).map(|k| (key(self.element(k)), k)).collect();
        let mut elements = Vec::with_capacity(self.n_elements());
        for k in 0..self.n_elements() {
            let image: Vec<usize> = self.element(k).iter().map(|&n| nodes[n]).collect();
            elements.push(*elements_by_key.get(&key(&image))?);
        }

        let mut electrodes = BTreeMap::new();
        for e in &self.electrodes {
            let mut image: Vec<FacetKey> = e
                .facets
                .iter()
                .map(|f| key(&f.iter().map(|&n| nodes[n]).collect::<Vec<_>>()))
                .collect();
            image.sort();
            let target = self
                .electrodes
                .iter()
                .find(|o| o.facets == image && o.contact_impedance == e.contact_impedance)?;
            electrodes.insert(e.id, target.id);
        }
        Some(MirrorMap { nodes, elements, electrodes })
    }

    pub fn is_mirror_symmetric(&self, axes: &[usize]) -> bool {
        self.mirror_map(axes, 1e-9).is_some()
    }

    /// Boundary facets accepted by `select(centroid, outward_normal)`.
    pub fn select_boundary_facets<F>(&self, mut select: F) -> Vec<FacetKey>
    where
        F: FnMut(&Point, &Point) -> bool,
    {
        self.boundary
            .iter()
            .filter(|f| {
                let pts: Vec<Point> = f.nodes.iter().map(|&n| self.nodes[n]).collect();
                select(&geometry::centroid(&pts), &f.normal)
            })
            .map(|f| f.nodes.clone())
            .collect()
    }

    /// SHA-256 of the canonical text serialization.
    pub fn content_hash(&self) -> String {
        crate::hash::sha256_hex(io::write_mesh(self).as_bytes())
    }
}

/// Result of [`Mesh::mirror_map`]. Region tags are not compared.
#[derive(Debug, Clone)]
pub struct MirrorMap {
    pub nodes: Vec<usize>,
    pub elements: Vec<usize>,
    /// Electrode id to mirrored electrode id.
    pub electrodes: BTreeMap<usize, usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> (Vec<Point>, Vec<usize>) {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        (nodes, vec![0, 1, 2, 0, 2, 3])
    }

    #[test]
    fn boundary_of_square() {
        let (nodes, cells) = two_triangles();
        let m = Mesh::new(2, nodes, cells, vec![0, 0], BTreeMap::new(), vec![]).unwrap();
        assert_eq!(m.boundary_facets().len(), 4);
        let left = m.boundary_facet_index(&[3, 0]).unwrap();
        assert_eq!(m.boundary_facets()[left].normal, [-1.0, 0.0, 0.0]);
        assert!(m.boundary_facet_index(&[0, 2]).is_none());
    }

    #[test]
    fn rejects_inverted_element() {
        let (nodes, _) = two_triangles();
        let err = Mesh::new(2, nodes, vec![0, 2, 1, 0, 2, 3], vec![0, 0], BTreeMap::new(), vec![])
            .unwrap_err();
        assert!(err.to_string().contains("non-positive"));
    }

    #[test]
    fn rejects_interior_electrode_facet() {
        let (nodes, cells) = two_triangles();
        let e = ElectrodePatch {
            id: 3,
            facets: vec![vec![0, 2]],
            contact_impedance: 1e-3,
        };
        let err = Mesh::new(2, nodes, cells, vec![0, 0], BTreeMap::new(), vec![e]).unwrap_err();
        assert!(err.to_string().contains("electrode 3"));
    }

    #[test]
    fn rejects_overlapping_electrodes() {
        let (nodes, cells) = two_triangles();
        let a = ElectrodePatch {
            id: 1,
            facets: vec![vec![0, 1]],
            contact_impedance: 1e-3,
        };
        let b = ElectrodePatch {
            id: 2,
            ..a.clone()
        };
        let err = Mesh::new(2, nodes, cells, vec![0, 0], BTreeMap::new(), vec![a, b]).unwrap_err();
        assert!(err.to_string().contains("also belongs"));
    }

    #[test]
    fn rejects_disconnected() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [5.0, 0.0, 0.0],
            [6.0, 0.0, 0.0],
            [5.0, 1.0, 0.0],
        ];
        let err = Mesh::new(2, nodes, vec![0, 1, 2, 3, 4, 5], vec![0, 0], BTreeMap::new(), vec![])
            .unwrap_err();
        assert!(err.to_string().contains("disconnected"));
    }

    #[test]
    fn electrode_area_sums_facets() {
        let (nodes, cells) = two_triangles();
        let e = ElectrodePatch {
            id: 1,
            facets: vec![vec![0, 1], vec![1, 2]],
            contact_impedance: 0.0,
        };
        let m = Mesh::new(2, nodes, cells, vec![0, 0], BTreeMap::new(), vec![e]).unwrap();
        assert_eq!(m.electrode_area(1), Some(2.0));
    }
}
