//! Evaluation of trained models: Gaussian Parzen-window log-likelihood of
//! held-out data, mode coverage against a known mixture, latent-space
//! interpolation paths, and the nearest-training-neighbour audit.

use rayon::prelude::*;
use thiserror::Error;

use crate::datasets::{Dataset, MixtureSpec};
use crate::models::{GeneratorNet, ModelError};
use crate::nnsearch::{IndexStructure, NearestIndex, NnError};
use crate::numerics::{sq_euclidean_slices, Vec64};

const LN_TAU: f64 = 1.837_877_066_409_345_5; // ln(2*pi)

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("bandwidth must be positive, got {0}")]
    BadSigma(f64),
    #[error("no centers supplied")]
    EmptyCenters,
    #[error("bandwidth grid is empty")]
    EmptySigmaGrid,
    #[error("coverage threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("need at least two endpoints, got {0}")]
    TooFewEndpoints(usize),
    #[error("need at least two interpolation steps, got {0}")]
    BadSteps(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parzen-window log-likelihood of a test set under Gaussian kernels at the
/// given centers.
#[derive(Debug, Clone)]
pub struct ParzenEstimate {
    pub sigma: f64,
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

/// Per-point value:
/// `log((1/M) sum_j exp(-||x - c_j||^2 / (2 sigma^2))) - (d/2) log(2 pi sigma^2)`,
/// evaluated with a max shift so huge exponents cannot overflow.
pub fn parzen_log_likelihood(
    centers: &[Vec64],
    sigma: f64,
    test: &Dataset,
) -> Result<ParzenEstimate, EvalError> {
    if centers.is_empty() {
        return Err(EvalError::EmptyCenters);
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(EvalError::BadSigma(sigma));
    }
    let dim = centers[0].dim();
    if let Some(c) = centers.iter().find(|c| c.dim() != dim) {
        return Err(EvalError::DimMismatch {
            left: dim,
            right: c.dim(),
        });
    }
    if test.dim() != dim {
        return Err(EvalError::DimMismatch {
            left: dim,
            right: test.dim(),
        });
    }
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let log_norm = -(dim as f64 / 2.0) * (LN_TAU + 2.0 * sigma.ln());
    let log_m = (centers.len() as f64).ln();
    let per_point: Vec<f64> = test
        .points()
        .par_iter()
        .map(|x| {
            let mut max = f64::NEG_INFINITY;
            let exponents: Vec<f64> = centers
                .iter()
                .map(|c| {
                    let e = -sq_euclidean_slices(x.as_slice(), c.as_slice()) * inv_two_sigma_sq;
                    if e > max {
                        max = e;
                    }
                    e
                })
                .collect();
            let sum: f64 = exponents.iter().map(|e| (e - max).exp()).sum();
            max + sum.ln() - log_m + log_norm
        })
        .collect();
    let n = per_point.len() as f64;
    let mean = per_point.iter().sum::<f64>() / n;
    let stderr = if per_point.len() > 1 {
        let var = per_point.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(ParzenEstimate {
        sigma,
        per_point,
        mean,
        stderr,
    })
}

/// Pick the grid bandwidth maximizing mean validation log-likelihood; exact
/// ties go to the smaller bandwidth.
pub fn select_bandwidth(
    centers: &[Vec64],
    validation: &Dataset,
    sigma_grid: &[f64],
) -> Result<f64, EvalError> {
    if sigma_grid.is_empty() {
        return Err(EvalError::EmptySigmaGrid);
    }
    let mut grid: Vec<f64> = sigma_grid.to_vec();
    if let Some(&bad) = grid.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(EvalError::BadSigma(bad));
    }
    grid.sort_unstable_by(f64::total_cmp);
    let mut best_sigma = grid[0];
    let mut best_mean = f64::NEG_INFINITY;
    for &sigma in &grid {
        let mean = parzen_log_likelihood(centers, sigma, validation)?.mean;
        if mean > best_mean {
            best_mean = mean;
            best_sigma = sigma;
        }
    }
    Ok(best_sigma)
}

/// Recall/precision proxy against a known mixture: a mode counts as covered
/// when at least one sample lies within `threshold_sigmas * std` of its mean;
/// the precision proxy is the fraction of samples within that radius of some
/// mean.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub modes: usize,
    pub covered: usize,
    /// Nearest-sample squared distance per mode.
    pub per_mode_nearest_sq: Vec<f64>,
    /// Radius actually used (`threshold_sigmas * std`).
    pub threshold_radius: f64,
    pub precision_proxy: f64,
}

pub fn mode_coverage(
    samples: &[Vec64],
    spec: &MixtureSpec,
    threshold_sigmas: f64,
) -> Result<CoverageReport, EvalError> {
    if !(threshold_sigmas > 0.0 && threshold_sigmas.is_finite()) {
        return Err(EvalError::BadThreshold(threshold_sigmas));
    }
    if let Some(s) = samples.iter().find(|s| s.dim() != spec.dim()) {
        return Err(EvalError::DimMismatch {
            left: spec.dim(),
            right: s.dim(),
        });
    }
    let radius = threshold_sigmas * spec.std();
    let radius_sq = radius * radius;
    let per_mode_nearest_sq: Vec<f64> = spec
        .means()
        .iter()
        .map(|mean| {
            samples
                .iter()
                .map(|s| sq_euclidean_slices(s.as_slice(), mean.as_slice()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let covered = per_mode_nearest_sq.iter().filter(|&&d| d <= radius_sq).count();
    let near_any = samples
        .iter()
        .filter(|s| {
            spec.means()
                .iter()
                .any(|mean| sq_euclidean_slices(s.as_slice(), mean.as_slice()) <= radius_sq)
        })
        .count();
    let precision_proxy = if samples.is_empty() {
        0.0
    } else {
        near_any as f64 / samples.len() as f64
    };
    Ok(CoverageReport {
        modes: spec.components(),
        covered,
        per_mode_nearest_sq,
        threshold_radius: radius,
        precision_proxy,
    })
}

/// Linear interpolation paths between latent endpoints, wrapped so the final
/// endpoint connects back to the first. Each segment holds `steps` decoded
/// samples at `t = 0, 1/(steps-1), .., 1`.
pub fn interpolate_latent(
    net: &GeneratorNet,
    endpoints: &[Vec64],
    steps: usize,
) -> Result<Vec<Vec<Vec64>>, EvalError> {
    if endpoints.len() < 2 {
        return Err(EvalError::TooFewEndpoints(endpoints.len()));
    }
    if steps < 2 {
        return Err(EvalError::BadSteps(steps));
    }
    if let Some(z) = endpoints.iter().find(|z| z.dim() != net.latent_dim()) {
        return Err(EvalError::DimMismatch {
            left: net.latent_dim(),
            right: z.dim(),
        });
    }
    let mut segments = Vec::with_capacity(endpoints.len());
    for (k, a) in endpoints.iter().enumerate() {
        let b = &endpoints[(k + 1) % endpoints.len()];
        let mut row = Vec::with_capacity(steps);
        for s in 0..steps {
            let t = s as f64 / (steps - 1) as f64;
            let z = Vec64::from_raw(
                a.iter()
                    .zip(b.iter())
                    .map(|(za, zb)| (1.0 - t) * za + t * zb)
                    .collect(),
            );
            row.push(net.forward(&z)?);
        }
        segments.push(row);
    }
    Ok(segments)
}

/// One row of the nearest-training-neighbour audit.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighbourAudit {
    pub sample_index: usize,
    pub training_index: usize,
    pub sq_dist: f64,
}

/// Exact nearest training point for every sample.
pub fn nearest_training_neighbour(
    samples: &[Vec64],
    training: &Dataset,
) -> Result<Vec<NeighbourAudit>, EvalError> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let index = NearestIndex::build(training.points().to_vec(), IndexStructure::VpTree)?;
    let results = index.query_batch(samples)?;
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(sample_index, r)| NeighbourAudit {
            sample_index,
            training_index: r.index,
            sq_dist: r.sq_dist,
        })
        .collect())
}
