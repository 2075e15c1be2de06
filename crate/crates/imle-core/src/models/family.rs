//! Analytic distribution families with exact densities, exact samplers, and a
//! closed-form maximum-likelihood solution where one exists.

use thiserror::Error;

use crate::datasets::{Dataset, MixtureSpec};
use crate::numerics::{sq_euclidean_slices, RngStream, Vec64};

const LN_TAU: f64 = 1.837_877_066_409_345_5; // ln(2*pi)

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: family dim {family} vs point dim {point}")]
    DimMismatch { family: usize, point: usize },
    #[error("scale parameter must be strictly positive, got {0}")]
    BadScale(f64),
    #[error("closed-form MLE is not available for {0}; use a grid or gradient search")]
    UnsupportedFamily(&'static str),
    #[error("invalid architecture: {0}")]
    BadArchitecture(String),
    #[error("parameter vector length mismatch: expected {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },
}

/// A distribution family with exact density and sampler.
///
/// Parameter layouts (as exposed by [`AnalyticFamily::params`]):
/// - `Gaussian1d`: `[mean, std]`
/// - `IsotropicGaussian`: `[mean_1, .., mean_d, std]` (shared isotropic std)
/// - `Mixture`: `[mean_1 coords.., mean_k coords.., std, w_1, .., w_k]`
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticFamily {
    Gaussian1d { mean: f64, std: f64 },
    IsotropicGaussian { mean: Vec64, std: f64 },
    Mixture(MixtureSpec),
}

impl AnalyticFamily {
    pub fn gaussian_1d(mean: f64, std: f64) -> Result<Self, ModelError> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(ModelError::BadScale(std));
        }
        Ok(Self::Gaussian1d { mean, std })
    }

    pub fn isotropic_gaussian(mean: Vec64, std: f64) -> Result<Self, ModelError> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(ModelError::BadScale(std));
        }
        Ok(Self::IsotropicGaussian { mean, std })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard_gaussian(dim: usize) -> Self {
        Self::IsotropicGaussian {
            mean: Vec64::zeros(dim),
            std: 1.0,
        }
    }

    pub fn mixture(spec: MixtureSpec) -> Self {
        Self::Mixture(spec)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian1d { .. } => 1,
            Self::IsotropicGaussian { mean, .. } => mean.dim(),
            Self::Mixture(spec) => spec.dim(),
        }
    }

    pub fn params(&self) -> Vec64 {
        match self {
            Self::Gaussian1d { mean, std } => Vec64::from_raw(vec![*mean, *std]),
            Self::IsotropicGaussian { mean, std } => {
                let mut v = mean.as_slice().to_vec();
                v.push(*std);
                Vec64::from_raw(v)
            }
            Self::Mixture(spec) => {
                let mut v = Vec::new();
                for m in spec.means() {
                    v.extend_from_slice(m.as_slice());
                }
                v.push(spec.std());
                v.extend_from_slice(spec.weights());
                Vec64::from_raw(v)
            }
        }
    }

    /// One draw from the family.
    pub fn sample_one(&self, rng: &mut RngStream) -> Vec64 {
        match self {
            Self::Gaussian1d { mean, std } => {
                Vec64::from_raw(vec![mean + std * rng.standard_normal()])
            }
            Self::IsotropicGaussian { mean, std } => {
                let data = mean
                    .iter()
                    .map(|&m| m + std * rng.standard_normal())
                    .collect();
                Vec64::from_raw(data)
            }
            Self::Mixture(spec) => {
                let comp = spec.pick_component(rng.uniform_01());
                let mean = &spec.means()[comp];
                let std = spec.std();
                let data = mean
                    .iter()
                    .map(|&m| m + std * rng.standard_normal())
                    .collect();
                Vec64::from_raw(data)
            }
        }
    }
}

/// Exact log density `log p(x)` of the family at a point.
pub fn log_density(fam: &AnalyticFamily, x: &Vec64) -> Result<f64, ModelError> {
    if x.dim() != fam.dim() {
        return Err(ModelError::DimMismatch {
            family: fam.dim(),
            point: x.dim(),
        });
    }
    Ok(match fam {
        AnalyticFamily::Gaussian1d { mean, std } => {
            let z = (x[0] - mean) / std;
            -std.ln() - 0.5 * LN_TAU - 0.5 * z * z
        }
        AnalyticFamily::IsotropicGaussian { mean, std } => {
            let d = mean.dim() as f64;
            let sq = sq_euclidean_slices(x.as_slice(), mean.as_slice());
            -d * std.ln() - 0.5 * d * LN_TAU - sq / (2.0 * std * std)
        }
        AnalyticFamily::Mixture(spec) => {
            let d = spec.dim() as f64;
            let std = spec.std();
            let log_norm = -d * std.ln() - 0.5 * d * LN_TAU;
            // log-sum-exp over components with max shift
            let logs: Vec<f64> = spec
                .means()
                .iter()
                .zip(spec.weights())
                .map(|(m, &w)| {
                    let sq = sq_euclidean_slices(x.as_slice(), m.as_slice());
                    let lw = if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
                    lw + log_norm - sq / (2.0 * std * std)
                })
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
            }
        }
    })
}

/// `m` i.i.d. draws from the family.
pub fn family_sample(fam: &AnalyticFamily, rng: &mut RngStream, m: usize) -> Vec<Vec64> {
    assert!(m >= 1, "m must be >= 1");
    (0..m).map(|_| fam.sample_one(rng)).collect()
}

/// Maximum-likelihood solution of a Gaussian location family (known scale,
/// unknown mean): the per-coordinate sample mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MleSolution {
    pub theta_star: Vec64,
    pub loglik: f64,
}

pub fn closed_form_mle(fam: &AnalyticFamily, data: &Dataset) -> Result<MleSolution, ModelError> {
    let dim = fam.dim();
    if data.dim() != dim {
        return Err(ModelError::DimMismatch {
            family: dim,
            point: data.dim(),
        });
    }
    let std = match fam {
        AnalyticFamily::Gaussian1d { std, .. } => *std,
        AnalyticFamily::IsotropicGaussian { std, .. } => *std,
        AnalyticFamily::Mixture(_) => return Err(ModelError::UnsupportedFamily("mixture")),
    };
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in data.points() {
        for (acc, &v) in mean.iter_mut().zip(p.iter()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= n;
    }
    let theta_star = Vec64::from_raw(mean.clone());
    let fitted = if dim == 1 {
        AnalyticFamily::Gaussian1d {
            mean: mean[0],
            std,
        }
    } else {
        AnalyticFamily::IsotropicGaussian {
            mean: theta_star.clone(),
            std,
        }
    };
    let mut loglik = 0.0;
    for p in data.points() {
        loglik += log_density(&fitted, p)?;
    }
    Ok(MleSolution { theta_star, loglik })
}
