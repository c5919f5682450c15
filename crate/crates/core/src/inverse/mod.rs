//! Zeroth-order Tikhonov difference imaging.

mod cv;
mod export;

use nalgebra::{DMatrix, DVector, SVD};

pub use cv::{blob_perturbations, lambda_grid, select_lambda_cv, CvNoise, CvSelection};
pub use export::{write_reconstruction_csv, write_vtk, save_reconstruction_csv, save_vtk};

use crate::error::{Error, Result};
use crate::sensitivity::Jacobian;

/// Singular-value summary of the Jacobian an operator was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Largest over smallest nonzero singular value.
    pub condition_number: f64,
    /// Number of singular values above `lambda.sqrt()`.
    pub effective_rank: usize,
}

/// Thin SVD of a Jacobian, reusable across regularization weights.
#[derive(Debug, Clone)]
pub struct JacobianSvd {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v_t: DMatrix<f64>,
    jacobian: DMatrix<f64>,
}

impl JacobianSvd {
    pub fn new(j: &Jacobian) -> Result<Self> {
        Self::from_matrix(&j.matrix)
    }

    pub fn from_matrix(j: &DMatrix<f64>) -> Result<Self> {
        if j.nrows() == 0 || j.ncols() == 0 {
            return Err(Error::invalid("Jacobian is empty"));
        }
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("Jacobian has non-finite entries"));
        }
        let svd = SVD::try_new(j.clone(), true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::numerical("SVD of the Jacobian did not converge"))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u_full = svd.u.expect("requested");
        let vt_full = svd.v_t.expect("requested");
        let u = DMatrix::from_fn(u_full.nrows(), order.len(), |r, c| u_full[(r, order[c])]);
        let v_t = DMatrix::from_fn(order.len(), vt_full.ncols(), |r, c| vt_full[(order[r], c)]);
        let s = order.iter().map(|&i| svd.singular_values[i]).collect();
        Ok(JacobianSvd {
            u,
            s,
            v_t,
            jacobian: j.clone(),
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn max_singular_value(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// `(JᵀJ + λI)⁻¹Jᵀ = V diag(s/(s²+λ)) Uᵀ`.
    pub fn operator(&self, lambda: f64) -> Result<ReconstructionOperator> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive and finite, got {lambda}")));
        }
        let filt: Vec<f64> = self.s.iter().map(|&s| s / (s * s + lambda)).collect();
        let mut scaled_ut = self.u.transpose();
        for (mut row, f) in scaled_ut.row_iter_mut().zip(&filt) {
            row *= *f;
        }
        let matrix = self.v_t.transpose() * scaled_ut;

        let smax = self.max_singular_value();
        let smin = self
            .s
            .iter()
            .copied()
            .filter(|&s| s > smax * f64::EPSILON * self.s.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let conditioning = Conditioning {
            singular_values: self.s.clone(),
            condition_number: if smin.is_finite() { smax / smin } else { f64::INFINITY },
            effective_rank: self.s.iter().filter(|&&s| s * s > lambda).count(),
        };
        Ok(ReconstructionOperator {
            matrix,
            lambda,
            conditioning,
            jacobian: self.jacobian.clone(),
        })
    }
}

/// Precomputed regularized inverse, shape columns(J) × rows(J).
#[derive(Debug, Clone)]
pub struct ReconstructionOperator {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
    pub conditioning: Conditioning,
    jacobian: DMatrix<f64>,
}

impl ReconstructionOperator {
    pub fn n_measurements(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_columns(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    /// `op * dv` without residual bookkeeping.
    pub fn apply(&self, dv: &[f64]) -> Result<Vec<f64>> {
        if dv.len() != self.n_measurements() {
            return Err(Error::invalid(format!(
                "voltage change has {} entries, operator expects {}",
                dv.len(),
                self.n_measurements()
            )));
        }
        let mut out = vec![0.0; self.n_columns()];
        for (c, &d) in dv.iter().enumerate() {
            if d != 0.0 {
                for (o, m) in out.iter_mut().zip(self.matrix.column(c).iter()) {
                    *o += m * d;
                }
            }
        }
        Ok(out)
    }
}

/// Estimated conductivity change and the terms of the Tikhonov objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub delta_sigma: Vec<f64>,
    /// `‖δv − Jδσ‖`.
    pub residual: f64,
    /// `‖δσ‖`.
    pub norm: f64,
    pub lambda: f64,
}

impl ReconstructionResult {
    pub fn objective(&self) -> f64 {
        self.residual * self.residual + self.lambda * self.norm * self.norm
    }
}

pub fn build_operator(j: &Jacobian, lambda: f64) -> Result<ReconstructionOperator> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive and finite, got {lambda}")));
    }
    JacobianSvd::new(j)?.operator(lambda)
}

pub fn reconstruct(op: &ReconstructionOperator, dv: &[f64]) -> Result<ReconstructionResult> {
    let delta_sigma = op.apply(dv)?;
    let residual = residual_norm(&op.jacobian, dv, &delta_sigma);
    let norm = delta_sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
    let result = ReconstructionResult {
        delta_sigma,
        residual,
        norm,
        lambda: op.lambda,
    };
    if !(result.residual.is_finite() && result.norm.is_finite()) {
        return Err(Error::numerical("reconstruction produced non-finite values"));
    }
    Ok(result)
}

/// `‖dv − J x‖² + λ‖x‖²`.
pub fn tikhonov_objective(j: &DMatrix<f64>, dv: &[f64], x: &[f64], lambda: f64) -> f64 {
    let r = residual_norm(j, dv, x);
    r * r + lambda * x.iter().map(|v| v * v).sum::<f64>()
}

fn residual_norm(j: &DMatrix<f64>, dv: &[f64], x: &[f64]) -> f64 {
    let jx = j * DVector::from_column_slice(x);
    jx.iter()
        .zip(dv)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}
