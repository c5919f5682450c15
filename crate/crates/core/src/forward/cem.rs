use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::{ConductivityField, InjectionTone};
use crate::error::{Error, Result};
use crate::linalg::{EnvelopeCholesky, SymmetricCsr};
use crate::mesh::{geometry, Mesh};

/// Millimetre to metre.
const MM: f64 = 1e-3;

/// How the potential's additive constant is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grounding {
    /// Electrode voltages sum to zero.
    #[default]
    ElectrodeSum,
    /// Potential at one mesh node is zero.
    Node(usize),
}

/// Assembled complete-electrode-model system over node potentials plus one
/// voltage unknown per electrode, with its Cholesky factorization.
///
/// Nodes lying on an ideal (zero contact impedance) electrode are merged
/// into that electrode's voltage unknown.
#[derive(Debug, Clone)]
pub struct CemSystem {
    dim: usize,
    n_nodes: usize,
    /// mesh node -> unknown
    node_dof: Vec<usize>,
    /// electrode (mesh order) -> unknown
    electrode_dof: Vec<usize>,
    electrode_ids: Vec<usize>,
    matrix: SymmetricCsr,
    /// per element: geometric stiffness `vol * grad_i . grad_j` in SI units,
    /// row-major `npe x npe`
    local: Vec<f64>,
    /// per element: matrix slots matching `local`
    slots: Vec<usize>,
    sigma: ConductivityField,
    grounding: Grounding,
    grounded_dof: usize,
    factor: Arc<EnvelopeCholesky>,
    /// maps full unknowns to reduced (grounded) unknowns
    reduced_index: Vec<Option<usize>>,
}

/// Node potentials and electrode voltages for one injection, in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub node_potentials: Vec<f64>,
    /// Ordered like `Mesh::electrodes()`.
    pub electrode_voltages: Vec<f64>,
    electrode_ids: Vec<usize>,
}

impl FieldSolution {
    pub fn voltage(&self, electrode_id: usize) -> Option<f64> {
        self.electrode_ids
            .iter()
            .position(|&id| id == electrode_id)
            .map(|i| self.electrode_voltages[i])
    }

    /// Potential gradient in element `k`, V/m.
    pub fn gradient(&self, mesh: &Mesh, k: usize) -> [f64; 3] {
        let grads = geometry::basis_gradients(&mesh.element_points(k));
        let mut g = [0.0; 3];
        for (&n, gi) in mesh.element(k).iter().zip(&grads) {
            for d in 0..3 {
                g[d] += self.node_potentials[n] * gi[d] / MM;
            }
        }
        g
    }
}

impl CemSystem {
    pub fn assemble(mesh: &Mesh, sigma: &ConductivityField, grounding: Grounding) -> Result<Self> {
        sigma.check_against(mesh)?;
        let electrodes = mesh.electrodes();
        if electrodes.len() < 2 {
            return Err(Error::invalid("the electrode model needs at least two electrodes"));
        }
        let dim = mesh.dimension();
        let npe = dim + 1;

        // Merge nodes of ideal electrodes.
        let mut ideal_owner: HashMap<usize, usize> = HashMap::new();
        for (l, e) in electrodes.iter().enumerate() {
            if e.contact_impedance == 0.0 {
                for f in &e.facets {
                    for &n in f {
                        if let Some(&other) = ideal_owner.get(&n) {
                            if other != l {
                                return Err(Error::invalid(format!(
                                    "ideal electrodes {} and {} share node {}",
                                    electrodes[other].id,
                                    e.id,
                                    n + 1
                                )));
                            }
                        }
                        ideal_owner.insert(n, l);
                    }
                }
            }
        }
        let mut node_dof = vec![usize::MAX; mesh.n_nodes()];
        let mut next = 0;
        for (n, dof) in node_dof.iter_mut().enumerate() {
            if !ideal_owner.contains_key(&n) {
                *dof = next;
                next += 1;
            }
        }
        let electrode_dof: Vec<usize> = (next..next + electrodes.len()).collect();
        for (&n, &l) in &ideal_owner {
            node_dof[n] = electrode_dof[l];
        }
        let n_dof = next + electrodes.len();

        // Sparsity pattern.
        let mut adjacency = vec![BTreeSet::new(); n_dof];
        for k in 0..mesh.n_elements() {
            let el = mesh.element(k);
            for &a in el {
                for &b in el {
                    if node_dof[a] != node_dof[b] {
                        adjacency[node_dof[a]].insert(node_dof[b]);
                    }
                }
            }
        }
        for (l, e) in electrodes.iter().enumerate() {
            if e.contact_impedance > 0.0 {
                for f in &e.facets {
                    for &a in f {
                        adjacency[electrode_dof[l]].insert(node_dof[a]);
                        for &b in f {
                            if node_dof[a] != node_dof[b] {
                                adjacency[node_dof[a]].insert(node_dof[b]);
                            }
                        }
                    }
                }
            }
        }
        for (i, adj) in adjacency.iter_mut().enumerate() {
            adj.remove(&i);
        }
        let mut matrix = SymmetricCsr::with_pattern(n_dof, &adjacency);

        // Stiffness.
        let vol_scale = MM.powi(dim as i32);
        let grad_scale = 1.0 / MM;
        let mut local = Vec::with_capacity(mesh.n_elements() * npe * npe);
        let mut slots = Vec::with_capacity(mesh.n_elements() * npe * npe);
        for k in 0..mesh.n_elements() {
            let pts = mesh.element_points(k);
            let vol = geometry::signed_measure(&pts) * vol_scale;
            let grads = geometry::basis_gradients(&pts);
            let el = mesh.element(k);
            let s = sigma.values()[k];
            for i in 0..npe {
                for j in 0..npe {
                    let g = vol * geometry::dot(&grads[i], &grads[j]) * grad_scale * grad_scale;
                    let slot = matrix.slot(node_dof[el[i]], node_dof[el[j]]).unwrap();
                    local.push(g);
                    slots.push(slot);
                    matrix.values_mut()[slot] += s * g;
                }
            }
        }

        // Electrode coupling through the contact impedance.
        let area_scale = MM.powi(dim as i32 - 1);
        for (l, e) in electrodes.iter().enumerate() {
            let z = e.contact_impedance;
            if z == 0.0 {
                continue;
            }
            let vl = electrode_dof[l];
            for f in &e.facets {
                let area = mesh.facet_measure(f) * area_scale;
                let nf = f.len() as f64;
                // P1 facet mass matrix: area/(nf(nf+1)) * (1 + delta_ab)
                for (ia, &a) in f.iter().enumerate() {
                    for (ib, &b) in f.iter().enumerate() {
                        let m = area / (nf * (nf + 1.0)) * if ia == ib { 2.0 } else { 1.0 };
                        let slot = matrix.slot(node_dof[a], node_dof[b]).unwrap();
                        matrix.values_mut()[slot] += m / z;
                    }
                    let coupling = -area / nf / z;
                    let s1 = matrix.slot(node_dof[a], vl).unwrap();
                    matrix.values_mut()[s1] += coupling;
                    let s2 = matrix.slot(vl, node_dof[a]).unwrap();
                    matrix.values_mut()[s2] += coupling;
                }
                let d = matrix.slot(vl, vl).unwrap();
                matrix.values_mut()[d] += area / z;
            }
        }

        let grounded_dof = match grounding {
            Grounding::ElectrodeSum => *electrode_dof.last().unwrap(),
            Grounding::Node(n) => {
                if n >= mesh.n_nodes() {
                    return Err(Error::invalid(format!("ground node {n} does not exist")));
                }
                node_dof[n]
            }
        };
        let (reduced, reduced_index) = matrix.without(&[grounded_dof]);
        let factor = EnvelopeCholesky::factor(&reduced).map_err(|e| {
            Error::numerical(format!(
                "{e}; grounding {grounding:?} leaves the system singular (check mesh connectivity and electrode contact)"
            ))
        })?;

        Ok(CemSystem {
            dim,
            n_nodes: mesh.n_nodes(),
            node_dof,
            electrode_dof,
            electrode_ids: electrodes.iter().map(|e| e.id).collect(),
            matrix,
            local,
            slots,
            sigma: sigma.clone(),
            grounding,
            grounded_dof,
            factor: Arc::new(factor),
            reduced_index,
        })
    }

    /// System for a new conductivity, updating only entries of elements
    /// whose conductivity changed.
    pub fn with_conductivity(&self, sigma: &ConductivityField) -> Result<Self> {
        if sigma.len() != self.sigma.len() {
            return Err(Error::invalid("conductivity field does not match the mesh"));
        }
        sigma.check_positive()?;
        let npe = self.dim + 1;
        let mut next = self.clone();
        for (k, (&old, &new)) in self.sigma.values().iter().zip(sigma.values()).enumerate() {
            if old == new {
                continue;
            }
            let r = k * npe * npe..(k + 1) * npe * npe;
            for (&slot, &g) in self.slots[r.clone()].iter().zip(&self.local[r]) {
                next.matrix.values_mut()[slot] += (new - old) * g;
            }
        }
        next.sigma = sigma.clone();
        let (reduced, _) = next.matrix.without(&[next.grounded_dof]);
        next.factor = Arc::new(EnvelopeCholesky::factor(&reduced)?);
        Ok(next)
    }

    pub fn matrix(&self) -> &SymmetricCsr {
        &self.matrix
    }

    /// The grounded (reduced) matrix that is actually factorized.
    pub fn reduced_matrix(&self) -> SymmetricCsr {
        self.matrix.without(&[self.grounded_dof]).0
    }

    pub fn grounding(&self) -> Grounding {
        self.grounding
    }

    pub fn conductivity(&self) -> &ConductivityField {
        &self.sigma
    }

    pub fn n_unknowns(&self) -> usize {
        self.matrix.dim()
    }

    fn electrode_index(&self, id: usize) -> Result<usize> {
        self.electrode_ids
            .iter()
            .position(|&e| e == id)
            .ok_or_else(|| Error::invalid(format!("electrode {id} does not exist")))
    }

    fn rhs(&self, tone: &InjectionTone) -> Result<Vec<f64>> {
        let src = self.electrode_index(tone.source)?;
        let snk = self.electrode_index(tone.sink)?;
        let mut b = vec![0.0; self.matrix.dim()];
        b[self.electrode_dof[src]] += tone.amplitude;
        b[self.electrode_dof[snk]] -= tone.amplitude;
        Ok(b)
    }

    /// Solves for the fields of one current injection.
    pub fn solve_injection(&self, tone: &InjectionTone) -> Result<FieldSolution> {
        if tone.source == tone.sink {
            return Err(Error::invalid("injection source equals sink"));
        }
        let b = self.rhs(tone)?;
        let reduced_b: Vec<f64> = (0..b.len())
            .filter(|&i| self.reduced_index[i].is_some())
            .map(|i| b[i])
            .collect();
        let y = self.factor.solve(&reduced_b);
        let mut x = vec![0.0; b.len()];
        for (i, r) in self.reduced_index.iter().enumerate() {
            if let Some(r) = r {
                x[i] = y[*r];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite potentials in solution"));
        }
        if self.grounding == Grounding::ElectrodeSum {
            let mean = self.electrode_dof.iter().map(|&d| x[d]).sum::<f64>()
                / self.electrode_dof.len() as f64;
            for v in &mut x {
                *v -= mean;
            }
        }
        Ok(FieldSolution {
            node_potentials: (0..self.n_nodes).map(|n| x[self.node_dof[n]]).collect(),
            electrode_voltages: self.electrode_dof.iter().map(|&d| x[d]).collect(),
            electrode_ids: self.electrode_ids.clone(),
        })
    }

    /// Largest violation of current conservation, relative to the drive
    /// amplitude: `max |A x - b| / I` over every unknown, including the
    /// grounded one.
    pub fn kirchhoff_residual(&self, solution: &FieldSolution, tone: &InjectionTone) -> Result<f64> {
        let b = self.rhs(tone)?;
        let mut x = vec![0.0; b.len()];
        for (n, &d) in self.node_dof.iter().enumerate() {
            x[d] = solution.node_potentials[n];
        }
        for (l, &d) in self.electrode_dof.iter().enumerate() {
            x[d] = solution.electrode_voltages[l];
        }
        let ax = self.matrix.mul_vec(&x);
        let worst = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        Ok(if tone.amplitude > 0.0 {
            worst / tone.amplitude
        } else {
            worst
        })
    }

    /// Current leaving each electrode into the domain, amperes (mesh order).
    pub fn electrode_currents(&self, solution: &FieldSolution) -> Vec<f64> {
        let mut x = vec![0.0; self.matrix.dim()];
        for (n, &d) in self.node_dof.iter().enumerate() {
            x[d] = solution.node_potentials[n];
        }
        for (l, &d) in self.electrode_dof.iter().enumerate() {
            x[d] = solution.electrode_voltages[l];
        }
        let ax = self.matrix.mul_vec(&x);
        self.electrode_dof.iter().map(|&d| ax[d]).collect()
    }
}
