//! Simulation-based cross-validation of the regularization weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::JacobianSvd;
use crate::error::{Error, Result};
use crate::mesh::geometry::{distance, Point};
use crate::sensitivity::Jacobian;

/// Noise added to simulated voltage changes during cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub enum CvNoise {
    /// Independent Gaussian noise with a standard deviation per measurement, V.
    Simulated { std: Vec<f64>, seed: u64 },
    /// Noise vectors observed on a static scene, resampled with replacement.
    Measured { samples: Vec<Vec<f64>>, seed: u64 },
}

impl CvNoise {
    /// Gaussian noise at a given amplitude SNR relative to `reference` voltages.
    pub fn from_snr(reference: &[f64], snr_db: f64, seed: u64) -> Self {
        let k = 10f64.powf(-snr_db / 20.0);
        CvNoise::Simulated {
            std: reference.iter().map(|v| v.abs() * k).collect(),
            seed,
        }
    }

    /// Same std on every measurement.
    pub fn uniform(n: usize, std: f64, seed: u64) -> Self {
        CvNoise::Simulated {
            std: vec![std; n],
            seed,
        }
    }

    /// Same draws, every std multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            CvNoise::Simulated { std, seed } => CvNoise::Simulated {
                std: std.iter().map(|s| s * k).collect(),
                seed: *seed,
            },
            CvNoise::Measured { samples, seed } => CvNoise::Measured {
                samples: samples
                    .iter()
                    .map(|s| s.iter().map(|v| v * k).collect())
                    .collect(),
                seed: *seed,
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CvNoise::Simulated { std, .. } => std.iter().all(|&s| s == 0.0),
            CvNoise::Measured { samples, .. } => samples.iter().flatten().all(|&v| v == 0.0),
        }
    }

    fn validate(&self, n_meas: usize) -> Result<()> {
        match self {
            CvNoise::Simulated { std, .. } => {
                if std.len() != n_meas {
                    return Err(Error::invalid(format!(
                        "noise model has {} stds for {n_meas} measurements",
                        std.len()
                    )));
                }
                if std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(Error::invalid("noise std must be finite and >= 0"));
                }
            }
            CvNoise::Measured { samples, .. } => {
                if samples.is_empty() {
                    return Err(Error::invalid("measured noise model has no samples"));
                }
                if samples.iter().any(|s| s.len() != n_meas) {
                    return Err(Error::invalid(format!(
                        "measured noise samples must have {n_meas} entries"
                    )));
                }
                if samples.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("measured noise samples must be finite"));
                }
            }
        }
        Ok(())
    }

    /// `count` noise vectors; draws do not depend on the std values.
    pub fn realizations(&self, n_meas: usize, count: usize) -> Result<Vec<Vec<f64>>> {
        self.validate(n_meas)?;
        Ok(match self {
            CvNoise::Simulated { std, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..count)
                    .map(|_| {
                        std.iter()
                            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    })
                    .collect()
            }
            CvNoise::Measured { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..count)
                    .map(|_| samples[rng.random_range(0..samples.len())].clone())
                    .collect()
            }
        })
    }
}

/// `points` log-spaced weights from `lo_rel·s²` to `hi_rel·s²`, s the largest
/// singular value.
pub fn lambda_grid(max_singular_value: f64, points: usize, lo_rel: f64, hi_rel: f64) -> Result<Vec<f64>> {
    if points < 2 || !(lo_rel > 0.0 && hi_rel > lo_rel) || !(max_singular_value > 0.0) {
        return Err(Error::invalid("lambda grid needs >= 2 points and 0 < lo < hi"));
    }
    let s2 = max_singular_value * max_singular_value;
    let (a, b) = (lo_rel.log10(), hi_rel.log10());
    Ok((0..points)
        .map(|i| s2 * 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect())
}

/// Outcome of a cross-validation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub lambda: f64,
    /// Ascending.
    pub grid: Vec<f64>,
    /// Mean reconstruction error per grid point.
    pub scores: Vec<f64>,
    /// The noise model had zero variance.
    pub noise_free: bool,
}

pub const MIN_GRID_DECADES: f64 = 4.0;
pub const MIN_TRAINING: usize = 20;
const TIE_TOLERANCE: f64 = 1e-12;

/// Picks the grid weight minimizing the mean `‖δσ̂ − δσ_true‖` over the
/// training perturbations; ties go to the larger weight.
pub fn select_lambda_cv(
    j: &Jacobian,
    noise: &CvNoise,
    grid: &[f64],
    training: &[Vec<f64>],
) -> Result<CvSelection> {
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::invalid("lambda grid values must be positive and finite"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if (grid[grid.len() - 1] / grid[0]).log10() < MIN_GRID_DECADES - 1e-9 {
        return Err(Error::invalid(format!(
            "lambda grid must span at least {MIN_GRID_DECADES} decades"
        )));
    }
    if training.len() < MIN_TRAINING {
        return Err(Error::invalid(format!(
            "cross-validation needs at least {MIN_TRAINING} training perturbations, got {}",
            training.len()
        )));
    }
    if let Some(bad) = training.iter().find(|t| t.len() != j.cols()) {
        return Err(Error::invalid(format!(
            "training perturbation has {} entries, Jacobian has {} columns",
            bad.len(),
            j.cols()
        )));
    }

    let noise_draws = noise.realizations(j.rows(), training.len())?;
    let data: Vec<Vec<f64>> = training
        .iter()
        .zip(&noise_draws)
        .map(|(t, n)| j.apply(t).iter().zip(n).map(|(a, b)| a + b).collect())
        .collect();

    let svd = JacobianSvd::new(j)?;
    let scores = grid
        .par_iter()
        .map(|&lambda| {
            let op = svd.operator(lambda)?;
            let mut total = 0.0;
            for (t, dv) in training.iter().zip(&data) {
                let est = op.apply(dv)?;
                total += est
                    .iter()
                    .zip(t)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
            }
            Ok(total / training.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::numerical("cross-validation scores are not finite"));
    }
    let idx = (0..grid.len())
        .rev()
        .find(|&i| scores[i] <= best * (1.0 + TIE_TOLERANCE))
        .expect("minimum exists");
    Ok(CvSelection {
        lambda: grid[idx],
        grid,
        scores,
        noise_free: noise.is_zero(),
    })
}

/// Random Gaussian blobs of conductivity change, centred on randomly chosen
/// column centres. Signs alternate at random.
pub fn blob_perturbations(
    centres: &[Point],
    count: usize,
    radius: f64,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if centres.is_empty() {
        return Err(Error::invalid("no column centres for training perturbations"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("blob radius must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let c = centres[rng.random_range(0..centres.len())];
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            centres
                .iter()
                .map(|p| {
                    let d = distance(p, &c) / radius;
                    sign * amplitude * (-0.5 * d * d).exp()
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensitivity::{ColumnBasis, Provenance};
    use nalgebra::DMatrix;

    fn jac(m: DMatrix<f64>) -> Jacobian {
        Jacobian::new(m, ColumnBasis::Elements, Provenance::default()).unwrap()
    }

    fn line_centres(n: usize) -> Vec<Point> {
        (0..n).map(|i| [i as f64, 0.0, 0.0]).collect()
    }

    fn smoothing_jacobian(rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |r, c| {
            let x = c as f64 / cols as f64 - r as f64 / rows as f64;
            (-40.0 * x * x).exp()
        })
    }

    #[test]
    fn grid_spans_relative_range() {
        let g = lambda_grid(10.0, 40, 1e-12, 1.0).unwrap();
        assert_eq!(g.len(), 40);
        assert!((g[0] - 1e-10).abs() < 1e-22);
        assert!((g[39] - 100.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(lambda_grid(1.0, 1, 1e-3, 1.0).is_err());
    }

    #[test]
    fn noise_free_square_system_picks_smallest_lambda() {
        let m = DMatrix::from_fn(8, 8, |r, c| if r == c { 2.0 } else { 0.1 / (1.0 + (r + c) as f64) });
        let j = jac(m);
        let training = blob_perturbations(&line_centres(8), 20, 1.5, 0.01, 3).unwrap();
        let grid = lambda_grid(2.0, 40, 1e-12, 1.0).unwrap();
        let sel = select_lambda_cv(&j, &CvNoise::uniform(8, 0.0, 1), &grid, &training).unwrap();
        assert!(sel.noise_free);
        assert_eq!(sel.lambda, grid[0]);
    }

    #[test]
    fn more_noise_never_selects_smaller_lambda() {
        let j = jac(smoothing_jacobian(9, 80));
        let training = blob_perturbations(&line_centres(80), 30, 6.0, 1.0, 7).unwrap();
        let svd = JacobianSvd::new(&j).unwrap();
        let grid = lambda_grid(svd.max_singular_value(), 40, 1e-12, 1.0).unwrap();
        let base = CvNoise::uniform(9, 1e-3, 11);
        let mut last = 0.0;
        for k in [1.0, 10.0, 100.0] {
            let sel = select_lambda_cv(&j, &base.scaled(k), &grid, &training).unwrap();
            assert!(!sel.noise_free);
            assert!(sel.lambda >= last, "{} < {last}", sel.lambda);
            last = sel.lambda;
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        let j = jac(smoothing_jacobian(3, 5));
        let t = blob_perturbations(&line_centres(5), 20, 1.0, 1.0, 0).unwrap();
        let n = CvNoise::uniform(3, 0.0, 0);
        assert!(select_lambda_cv(&j, &n, &[], &t).is_err());
        assert!(select_lambda_cv(&j, &n, &[1e-3, 1e-2], &t).is_err());
        assert!(select_lambda_cv(&j, &n, &[1e-5, 1.0], &t[..5]).is_err());
        assert!(select_lambda_cv(&j, &CvNoise::uniform(2, 0.0, 0), &[1e-5, 1.0], &t).is_err());
        assert!(select_lambda_cv(&j, &n, &[1e-5, 1.0], &t).is_ok());
    }

    #[test]
    fn measured_noise_resamples_rows() {
        let samples = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let noise = CvNoise::Measured { samples: samples.clone(), seed: 5 };
        let draws = noise.realizations(2, 50).unwrap();
        assert!(draws.iter().all(|d| samples.contains(d)));
        assert!(draws.contains(&samples[0]) && draws.contains(&samples[1]));
        assert!(noise.realizations(3, 1).is_err());
    }

    #[test]
    fn snr_noise_scales_with_reference() {
        let CvNoise::Simulated { std, .. } = CvNoise::from_snr(&[1.0, -2.0], 40.0, 0) else {
            unreachable!()
        };
        assert!((std[0] - 0.01).abs() < 1e-15);
        assert!((std[1] - 0.02).abs() < 1e-15);
    }
}
