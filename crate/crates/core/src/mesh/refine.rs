use std::collections::{BTreeSet, HashMap};

use super::geometry::{self, Point};
use super::{FacetKey, Mesh};
use crate::error::{Error, Result};

type Edge = (usize, usize);

fn edge(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Locally refines the mesh around every electrode.
///
/// Elements with a vertex within `radius` of an electrode centroid are
/// bisected along their longest edge until that edge is at most
/// `1/factor` of its original length. Every bisection splits all elements
/// sharing the edge, so the result stays conforming, and electrode facets
/// on the edge are split with it. A `factor` of 1 returns the mesh unchanged.
pub fn refine_near_electrodes(mesh: &Mesh, radius: f64, factor: f64) -> Result<Mesh> {
    if !(radius > 0.0) {
        return Err(Error::invalid("refinement radius must be positive"));
    }
    if !(factor >= 1.0) {
        return Err(Error::invalid("refinement factor must be at least 1"));
    }
    if factor == 1.0 || mesh.electrodes().is_empty() {
        return Ok(mesh.clone());
    }
    let centres: Vec<Point> = mesh
        .electrodes()
        .iter()
        .filter_map(|e| mesh.electrode_centroid(e.id))
        .collect();

    let mut nodes = mesh.nodes().to_vec();
    let mut elements: Vec<Option<Vec<usize>>> = (0..mesh.n_elements())
        .map(|k| Some(mesh.element(k).to_vec()))
        .collect();
    let mut tags = mesh.region_tags().to_vec();
    let mut targets: Vec<f64> = (0..mesh.n_elements())
        .map(|k| {
            let near = mesh
                .element(k)
                .iter()
                .any(|&n| centres.iter().any(|c| geometry::distance(&nodes[n], c) <= radius));
            if near {
                mesh.element_diameter(k) / factor
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut electrode_facets: Vec<Vec<FacetKey>> =
        mesh.electrodes().iter().map(|e| e.facets.clone()).collect();

    let mut by_edge: HashMap<Edge, BTreeSet<usize>> = HashMap::new();
    let register = |by_edge: &mut HashMap<Edge, BTreeSet<usize>>, k: usize, el: &[usize], add: bool| {
        for i in 0..el.len() {
            for j in i + 1..el.len() {
                let set = by_edge.entry(edge(el[i], el[j])).or_default();
                if add {
                    set.insert(k);
                } else {
                    set.remove(&k);
                }
            }
        }
    };
    for (k, el) in elements.iter().enumerate() {
        register(&mut by_edge, k, el.as_ref().unwrap(), true);
    }

    let longest = |nodes: &[Point], el: &[usize]| -> (Edge, f64) {
        let mut best = (edge(el[0], el[1]), -1.0);
        for i in 0..el.len() {
            for j in i + 1..el.len() {
                let e = edge(el[i], el[j]);
                let l = geometry::distance(&nodes[e.0], &nodes[e.1]);
                if l > best.1 || (l == best.1 && e < best.0) {
                    best = (e, l);
                }
            }
        }
        best
    };

    const MAX_SWEEPS: usize = 64;
    for _ in 0..MAX_SWEEPS {
        let pending: Vec<usize> = (0..elements.len())
            .filter(|&k| {
                elements[k]
                    .as_ref()
                    .is_some_and(|el| longest(&nodes, el).1 > targets[k] * (1.0 + 1e-12))
            })
            .collect();
        if pending.is_empty() {
            let (cells, tags): (Vec<Vec<usize>>, Vec<u32>) = elements
                .into_iter()
                .zip(tags)
                .filter_map(|(el, t)| el.map(|el| (el, t)))
                .unzip();
            return Mesh::new(
                mesh.dimension(),
                nodes,
                cells.into_iter().flatten().collect(),
                tags,
                mesh.region_names().clone(),
                mesh.electrodes()
                    .iter()
                    .zip(electrode_facets)
                    .map(|(e, facets)| super::ElectrodePatch {
                        facets,
                        ..e.clone()
                    })
                    .collect(),
            );
        }
        for k in pending {
            // an earlier split in this sweep may already have replaced k
            let Some(el) = elements[k].clone() else { continue };
            let (e, _) = longest(&nodes, &el);
            let mid = geometry::centroid(&[nodes[e.0], nodes[e.1]]);
            let m = nodes.len();
            nodes.push(mid);
            let sharing: Vec<usize> = by_edge.remove(&e).unwrap_or_default().into_iter().collect();
            for s in sharing {
                let parent = elements[s].take().expect("live element");
                register(&mut by_edge, s, &parent, false);
                let parent_volume = {
                    let pts: Vec<Point> = parent.iter().map(|&n| nodes[n]).collect();
                    geometry::signed_measure(&pts)
                };
                for replaced in [e.0, e.1] {
                    let child: Vec<usize> = parent
                        .iter()
                        .map(|&n| if n == replaced { m } else { n })
                        .collect();
                    let pts: Vec<Point> = child.iter().map(|&n| nodes[n]).collect();
                    let v = geometry::signed_measure(&pts);
                    if !(v > 1e-12 * parent_volume) {
                        return Err(Error::numerical(format!(
                            "refinement would create a degenerate element (measure {v:e})"
                        )));
                    }
                    let id = elements.len();
                    register(&mut by_edge, id, &child, true);
                    elements.push(Some(child));
                    tags.push(tags[s]);
                    targets.push(targets[s]);
                }
            }
            for facets in &mut electrode_facets {
                let mut next = Vec::with_capacity(facets.len());
                for f in facets.drain(..) {
                    if f.contains(&e.0) && f.contains(&e.1) {
                        for replaced in [e.0, e.1] {
                            let mut child: FacetKey =
                                f.iter().map(|&n| if n == replaced { m } else { n }).collect();
                            child.sort_unstable();
                            next.push(child);
                        }
                    } else {
                        next.push(f);
                    }
                }
                *facets = next;
            }
        }
    }
    Err(Error::numerical("refinement did not converge"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{end_face_electrodes, generate_box_mesh};

    fn bar() -> Mesh {
        let m = generate_box_mesh(&[10.0, 2.0, 2.0], 1.0).unwrap();
        end_face_electrodes(&m, 0, 1e-3).unwrap()
    }

    #[test]
    fn factor_one_is_identity() {
        let m = bar();
        assert_eq!(refine_near_electrodes(&m, 3.0, 1.0).unwrap(), m);
    }

    #[test]
    fn refinement_adds_elements_and_conserves_volume() {
        let m = bar();
        let r = refine_near_electrodes(&m, 2.0, 2.0).unwrap();
        assert!(r.n_elements() > m.n_elements());
        let rel = (r.total_volume() - m.total_volume()).abs() / m.total_volume();
        assert!(rel < 1e-9);
        for id in [1, 2] {
            let a = m.electrode_area(id).unwrap();
            let b = r.electrode_area(id).unwrap();
            assert!((a - b).abs() < 1e-12 * a);
        }
        // far-away elements untouched
        let far = (0..r.n_elements())
            .filter(|&k| (r.element_centroid(k)[0] - 5.0).abs() < 0.5)
            .count();
        let far0 = (0..m.n_elements())
            .filter(|&k| (m.element_centroid(k)[0] - 5.0).abs() < 0.5)
            .count();
        assert_eq!(far, far0);
    }

    #[test]
    fn refined_region_reaches_target_size() {
        let m = bar();
        let r = refine_near_electrodes(&m, 1.0, 2.0).unwrap();
        let h0 = m.element_diameter(0);
        let c = r.electrode_centroid(1).unwrap();
        for k in 0..r.n_elements() {
            if r.element(k).iter().all(|&n| geometry::distance(&r.nodes()[n], &c) < 0.5) {
                assert!(r.element_diameter(k) <= h0 / 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = bar();
        assert!(refine_near_electrodes(&m, 0.0, 2.0).is_err());
        assert!(refine_near_electrodes(&m, 1.0, 0.5).is_err());
    }

    #[test]
    fn refines_triangles() {
        let m = generate_box_mesh(&[4.0, 4.0], 1.0).unwrap();
        let m = end_face_electrodes(&m, 0, 0.0).unwrap();
        let r = refine_near_electrodes(&m, 1.0, 4.0).unwrap();
        assert!(r.n_elements() > m.n_elements());
        assert!((r.total_volume() - 16.0).abs() < 1e-12);
    }
}
