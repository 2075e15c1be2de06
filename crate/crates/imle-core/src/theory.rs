//! Executable numerical checks of the estimator theory on analytic families:
//! the tail-integral identity, the ball-radius density derivative, the
//! monotone-transform argmin preservation, the strict decrease of the
//! constrained minimal expected distance, and the desk-scale equivalence of
//! the nearest-sample estimator with maximum likelihood.

use thiserror::Error;

use crate::datasets::Dataset;
use crate::models::{closed_form_mle, log_density, AnalyticFamily, ModelError};
use crate::numerics::{neumaier_sum, sq_euclidean_slices, RngStream, Vec64};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no values supplied")]
    Empty,
    #[error("non-finite value at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("negative value at index {index}: {value} (squared distances are nonnegative)")]
    Negative { index: usize, value: f64 },
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error(
        "density level z = {z} is infeasible: the scale search covers densities \
         [{min_density}, {max_density}]"
    )]
    PsiInfeasible {
        z: f64,
        min_density: f64,
        max_density: f64,
    },
    #[error("need at least {need} trials, got {got}")]
    TooFewTrials { got: usize, need: usize },
    #[error("transform is not strictly increasing on the sampled range near y = {0}")]
    NotIncreasing(f64),
    #[error("data must be one-dimensional for this check, got dim {0}")]
    NotScalar(usize),
}

/// Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let trials = values.len();
        assert!(trials >= 1);
        let mean = neumaier_sum(values.iter().copied()) / trials as f64;
        let stderr = if trials > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (trials - 1) as f64;
            (var / trials as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            mean,
            stderr,
            trials,
        }
    }
}

/// Empirical CDF of a scalar sample: `F(t)` = fraction of values `<= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self, TheoryError> {
        if values.is_empty() {
            return Err(TheoryError::Empty);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(TheoryError::NonFinite { index, value });
            }
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Right-continuous step evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= t);
        count as f64 / self.sorted.len() as f64
    }

    pub fn sample_mean(&self) -> f64 {
        neumaier_sum(self.sorted.iter().copied()) / self.sorted.len() as f64
    }
}

/// Exact integral of `(1 - F(t))^m` over `t >= 0` for an empirical step CDF
/// built from squared distances of single draws: closed form per step, no
/// quadrature error beyond the CDF itself. With `m = 1` this telescopes to
/// the sample mean.
pub fn tail_integral_expectation(cdf: &EmpiricalCdf, m: usize) -> Result<f64, TheoryError> {
    assert!(m >= 1, "m must be >= 1");
    if let Some(index) = cdf.sorted.iter().position(|&v| v < 0.0) {
        return Err(TheoryError::Negative {
            index,
            value: cdf.sorted[index],
        });
    }
    let n = cdf.sorted.len() as f64;
    let mut prev = 0.0;
    let terms = cdf.sorted.iter().enumerate().map(|(k, &v)| {
        let survival = 1.0 - k as f64 / n;
        let term = survival.powi(m as i32) * (v - prev);
        prev = v;
        term
    });
    Ok(neumaier_sum(terms))
}

/// Batch-means standard error companion to [`tail_integral_expectation`]:
/// the point estimate comes from the full sample, the error bar from the
/// spread of per-block estimates.
pub fn tail_integral_with_se(
    values: &[f64],
    m: usize,
    blocks: usize,
) -> Result<(f64, f64), TheoryError> {
    assert!(blocks >= 2);
    if values.len() < blocks * 2 {
        return Err(TheoryError::TooFewTrials {
            got: values.len(),
            need: blocks * 2,
        });
    }
    let full = tail_integral_expectation(&EmpiricalCdf::from_values(values.to_vec())?, m)?;
    let block_len = values.len() / blocks;
    let block_estimates: Vec<f64> = (0..blocks)
        .map(|b| {
            let chunk = &values[b * block_len..(b + 1) * block_len];
            tail_integral_expectation(&EmpiricalCdf::from_values(chunk.to_vec())?, m)
        })
        .collect::<Result<_, _>>()?;
    let est = McEstimate::from_values(&block_estimates);
    Ok((full, est.stderr))
}

/// Per-trial nearest-of-`m` squared distances to `x0`. Trial `t` draws from
/// its own child stream, so cloned parents give common random numbers across
/// different `m` (per-trial min over a superset).
pub(crate) fn min_dist_trials(
    fam: &AnalyticFamily,
    x0: &Vec64,
    m: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Vec<f64> {
    assert!(m >= 1 && trials >= 1);
    let trial_seed = rng.next_u64();
    (0..trials)
        .map(|t| {
            let mut tr = RngStream::new(trial_seed, t as u64);
            let mut best = f64::INFINITY;
            for _ in 0..m {
                let sample = fam.sample_one(&mut tr);
                let d = sq_euclidean_slices(sample.as_slice(), x0.as_slice());
                if d < best {
                    best = d;
                }
            }
            best
        })
        .collect()
}

/// Monte Carlo estimate of the expected squared distance from `x0` to the
/// nearest of `m` draws.
pub fn expected_min_dist_mc(
    fam: &AnalyticFamily,
    x0: &Vec64,
    m: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Result<McEstimate, TheoryError> {
    if trials < 100 {
        return Err(TheoryError::TooFewTrials {
            got: trials,
            need: 100,
        });
    }
    if x0.dim() != fam.dim() {
        return Err(TheoryError::Model(ModelError::DimMismatch {
            family: fam.dim(),
            point: x0.dim(),
        }));
    }
    Ok(McEstimate::from_values(&min_dist_trials(
        fam, x0, m, trials, rng,
    )))
}

/// Volume of the unit ball in `d` dimensions, computed exactly from the
/// integer / half-integer gamma values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallVolumeConstant {
    pub d: usize,
    pub kappa: f64,
}

impl BallVolumeConstant {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1);
        let kappa = if d.is_multiple_of(2) {
            // pi^k / k!
            (1..=d / 2).fold(1.0, |acc, i| acc * std::f64::consts::PI / i as f64)
        } else {
            // 2 * prod_{i=1..k} 2 pi / (2i + 1), k = (d-1)/2
            (1..=(d - 1) / 2).fold(2.0, |acc, i| {
                acc * 2.0 * std::f64::consts::PI / (2 * i + 1) as f64
            })
        };
        Self { d, kappa }
    }
}

/// Report of the ball-shrinkage density estimate at one point.
#[derive(Debug, Clone)]
pub struct DensitySlopeReport {
    pub d: usize,
    pub kappa: f64,
    /// (radius, samples inside, ratio G(h)/h) per grid entry actually used.
    pub rows: Vec<(f64, usize, f64)>,
    /// Intercept of the least-squares fit of the ratios against radius^2.
    pub slope_estimate: f64,
    pub exact_density: f64,
    pub rel_error: f64,
    /// True when underpopulated radii were dropped from the requested grid.
    pub widened: bool,
}

const MIN_RADIUS_COUNT: usize = 100;

/// Estimate the one-sided derivative at zero of the CDF of
/// `kappa * ||sample - x0||^d` and compare it with the exact density at `x0`.
///
/// `G(h)/h` equals the fraction of draws inside the ball of radius `rho`
/// divided by the ball volume `kappa rho^d`; the leading bias is O(rho^2),
/// so the estimate extrapolates the ratios linearly in `rho^2` to zero.
pub fn lemma2_density_check(
    fam: &AnalyticFamily,
    x0: &Vec64,
    n_draws: usize,
    radii: &[f64],
    rng: &mut RngStream,
) -> Result<DensitySlopeReport, TheoryError> {
    if radii.len() < 2 {
        return Err(TheoryError::BadGrid("need at least two radii".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(TheoryError::BadGrid("radii must be positive".into()));
    }
    let d = fam.dim();
    let kappa = BallVolumeConstant::new(d).kappa;
    let mut radii: Vec<f64> = radii.to_vec();
    radii.sort_unstable_by(f64::total_cmp);

    let mut counts = vec![0usize; radii.len()];
    for _ in 0..n_draws {
        let sample = fam.sample_one(rng);
        let dist = sq_euclidean_slices(sample.as_slice(), x0.as_slice()).sqrt();
        for (count, &radius) in counts.iter_mut().zip(&radii) {
            if dist <= radius {
                *count += 1;
            }
        }
    }

    // Drop underpopulated small radii rather than dividing by near-zero mass.
    let mut first_usable = 0;
    while first_usable < radii.len() && counts[first_usable] < MIN_RADIUS_COUNT {
        first_usable += 1;
    }
    let widened = first_usable > 0;
    if radii.len() - first_usable < 2 {
        return Err(TheoryError::BadGrid(format!(
            "fewer than two radii kept at least {MIN_RADIUS_COUNT} draws \
             (counts {counts:?}); enlarge the grid or draw more samples"
        )));
    }
    let radii = &radii[first_usable..];
    let counts = &counts[first_usable..];

    let rows: Vec<(f64, usize, f64)> = radii
        .iter()
        .zip(counts)
        .map(|(&radius, &count)| {
            let volume = kappa * radius.powi(d as i32);
            let ratio = (count as f64 / n_draws as f64) / volume;
            (radius, count, ratio)
        })
        .collect();

    // least squares y = a + b x with x = radius^2; the intercept a is the
    // h -> 0 extrapolation
    let xs: Vec<f64> = rows.iter().map(|r| r.0 * r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope_fit = sxy / sxx;
    let slope_estimate = mean_y - slope_fit * mean_x;

    let exact_density = log_density(fam, x0)?.exp();
    let rel_error = (slope_estimate - exact_density).abs() / exact_density;
    Ok(DensitySlopeReport {
        d,
        kappa,
        rows,
        slope_estimate,
        exact_density,
        rel_error,
        widened,
    })
}

/// Scale-search window for the constrained-minimum curve of the Gaussian
/// family: the location is pinned at zero (optimal for a centered symmetric
/// family) and the density constraint is solved numerically over the scale.
#[derive(Debug, Clone, Copy)]
pub struct PsiScaleSearch {
    pub s_min: f64,
    pub s_max: f64,
}

impl Default for PsiScaleSearch {
    fn default() -> Self {
        Self {
            s_min: 0.05,
            s_max: 50.0,
        }
    }
}

impl PsiScaleSearch {
    fn density_at_origin(s: f64) -> f64 {
        1.0 / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Bisection for the scale whose density at the origin equals `z`.
    fn solve_scale(&self, z: f64) -> Result<f64, TheoryError> {
        let max_density = Self::density_at_origin(self.s_min);
        let min_density = Self::density_at_origin(self.s_max);
        if !(z >= min_density && z <= max_density) {
            return Err(TheoryError::PsiInfeasible {
                z,
                min_density,
                max_density,
            });
        }
        let (mut lo, mut hi) = (self.s_min, self.s_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::density_at_origin(mid) >= z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Estimated constrained-minimum curve: for each density level `z`, the
/// Monte Carlo expected nearest-of-`m` squared distance to the origin under
/// the scale solving `p(0) = z`.
#[derive(Debug, Clone)]
pub struct PsiCurve {
    pub z_grid: Vec<f64>,
    pub psi: Vec<f64>,
    pub stderr: Vec<f64>,
    pub m: usize,
    pub family: String,
}

impl PsiCurve {
    /// Central differences of the estimated curve at interior grid points,
    /// as `(z, psi_prime)` pairs. Informational only; two stacked Monte
    /// Carlo layers make hard tolerances on these dishonest.
    pub fn psi_prime_central(&self) -> Vec<(f64, f64)> {
        (1..self.z_grid.len().saturating_sub(1))
            .map(|k| {
                let dz = self.z_grid[k + 1] - self.z_grid[k - 1];
                (self.z_grid[k], (self.psi[k + 1] - self.psi[k - 1]) / dz)
            })
            .collect()
    }

    /// Strict decrease beyond non-overlapping 2-stderr bands between
    /// consecutive grid points.
    pub fn strictly_decreasing_beyond_bands(&self) -> bool {
        self.psi
            .windows(2)
            .zip(self.stderr.windows(2))
            .all(|(p, s)| p[0] - 2.0 * s[0] > p[1] + 2.0 * s[1])
    }
}

pub fn psi_estimate(
    search: &PsiScaleSearch,
    z_grid: &[f64],
    m: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Result<PsiCurve, TheoryError> {
    if z_grid.is_empty() {
        return Err(TheoryError::BadGrid("empty z grid".into()));
    }
    if z_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TheoryError::BadGrid("z grid must be strictly increasing".into()));
    }
    let origin = Vec64::zeros(1);
    let mut psi = Vec::with_capacity(z_grid.len());
    let mut stderr = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let scale = search.solve_scale(z)?;
        let fam = AnalyticFamily::gaussian_1d(0.0, scale)?;
        let est = expected_min_dist_mc(&fam, &origin, m, trials, rng)?;
        psi.push(est.mean);
        stderr.push(est.stderr);
    }
    Ok(PsiCurve {
        z_grid: z_grid.to_vec(),
        psi,
        stderr,
        m,
        family: "gaussian-1d location 0, scale solved for p(0) = z".into(),
    })
}

/// Coarse scan plus golden-section refinement of a deterministic scalar
/// function; returns (argmin, min).
pub fn minimize_scalar<F>(mut f: F, lo: f64, hi: f64, coarse: usize, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    assert!(hi > lo && coarse >= 2 && tol > 0.0);
    let step = (hi - lo) / coarse as f64;
    let mut best_k = 0;
    let mut best_v = f64::INFINITY;
    for k in 0..=coarse {
        let v = f(lo + k as f64 * step);
        if v < best_v {
            best_v = v;
            best_k = k;
        }
    }
    let mut a = lo + best_k.saturating_sub(1) as f64 * step;
    let mut b = (lo + (best_k + 1) as f64 * step).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

/// Explicit instance of the monotone-transform lemma: scalar objectives
/// `f_i` on a parameter interval, a strictly increasing differentiable
/// transform, and its derivative for the reweighting.
pub struct TransformCheckSpec {
    pub objectives: Vec<Box<dyn Fn(f64) -> f64>>,
    pub transform: Box<dyn Fn(f64) -> f64>,
    pub transform_deriv: Box<dyn Fn(f64) -> f64>,
    pub domain: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
pub struct TransformCheckReport {
    pub argmin_plain: f64,
    pub argmin_weighted: f64,
    pub gap: f64,
}

/// Grid-minimize both the plain sum and the reweighted transformed sum and
/// report the argmin gap. Weights are `1 / transform_deriv(f_i(argmin))`.
pub fn lemma1_transform_check(
    spec: &TransformCheckSpec,
) -> Result<TransformCheckReport, TheoryError> {
    let (lo, hi) = spec.domain;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(TheoryError::BadGrid("empty domain".into()));
    }
    // monotonicity spot-check of the transform over the objectives' range
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for k in 0..=200 {
        let theta = lo + (hi - lo) * k as f64 / 200.0;
        for f in &spec.objectives {
            let y = f(theta);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    for k in 0..=200 {
        let y = y_min + (y_max - y_min) * k as f64 / 200.0;
        if (spec.transform_deriv)(y) <= 0.0 {
            return Err(TheoryError::NotIncreasing(y));
        }
    }

    let plain_sum = |theta: f64| spec.objectives.iter().map(|f| f(theta)).sum::<f64>();
    let (argmin_plain, _) = minimize_scalar(plain_sum, lo, hi, 400, 1e-7);
    let weights: Vec<f64> = spec
        .objectives
        .iter()
        .map(|f| 1.0 / (spec.transform_deriv)(f(argmin_plain)))
        .collect();
    let weighted_sum = |theta: f64| {
        spec.objectives
            .iter()
            .zip(&weights)
            .map(|(f, w)| w * (spec.transform)(f(theta)))
            .sum::<f64>()
    };
    let (argmin_weighted, _) = minimize_scalar(weighted_sum, lo, hi, 400, 1e-7);
    Ok(TransformCheckReport {
        argmin_plain,
        argmin_weighted,
        gap: (argmin_weighted - argmin_plain).abs(),
    })
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub theta_mle: f64,
    pub theta_imle: f64,
    pub gap: f64,
    pub m: usize,
    pub trials: usize,
}

/// Desk-scale check that the nearest-sample estimator agrees with maximum
/// likelihood on a Gaussian location family over 1-D data.
///
/// The estimator side minimizes the summed Monte Carlo expected
/// nearest-of-`m` distance over a location grid refined by golden section to
/// `grid_tol`; every location is evaluated under common random numbers so
/// the objective is a deterministic function of the location.
pub fn theorem1_equivalence_check(
    data: &Dataset,
    std: f64,
    m: usize,
    trials: usize,
    grid_tol: f64,
    rng: &mut RngStream,
) -> Result<EquivalenceReport, TheoryError> {
    if data.dim() != 1 {
        return Err(TheoryError::NotScalar(data.dim()));
    }
    let mle = closed_form_mle(&AnalyticFamily::gaussian_1d(0.0, std)?, data)?;
    let theta_mle = mle.theta_star[0];

    let xs: Vec<f64> = data.points().iter().map(|p| p[0]).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * std;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * std;

    let base = rng.split();
    let objective = |theta: f64| {
        let mut stream = base.clone();
        let fam = AnalyticFamily::gaussian_1d(theta, std).expect("std validated");
        data.points()
            .iter()
            .map(|x| {
                expected_min_dist_mc(&fam, x, m, trials, &mut stream)
                    .expect("trials validated")
                    .mean
            })
            .sum::<f64>()
    };
    let (theta_imle, _) = minimize_scalar(objective, lo, hi, 60, grid_tol);
    Ok(EquivalenceReport {
        theta_mle,
        theta_imle,
        gap: (theta_imle - theta_mle).abs(),
        m,
        trials,
    })
}

/// Qualitative weighted variant: reweights each data term by
/// `1 / (-psi'(p*) p*)` using central differences of an estimated curve and
/// reports the argmin gap against maximum likelihood. No tolerance is
/// attached; the curve's own Monte Carlo error compounds here.
#[derive(Debug, Clone)]
pub struct WeightedEquivalenceReport {
    pub theta_mle: f64,
    pub theta_weighted: f64,
    pub gap: f64,
    pub weights: Vec<f64>,
}

pub fn theorem1_weighted_report(
    data: &Dataset,
    std: f64,
    m: usize,
    trials: usize,
    curve: &PsiCurve,
    rng: &mut RngStream,
) -> Result<WeightedEquivalenceReport, TheoryError> {
    if data.dim() != 1 {
        return Err(TheoryError::NotScalar(data.dim()));
    }
    let primes = curve.psi_prime_central();
    if primes.is_empty() {
        return Err(TheoryError::BadGrid(
            "psi curve too short for central differences".into(),
        ));
    }
    let psi_prime_at = |z: f64| {
        // nearest interior grid point; the report is qualitative
        primes
            .iter()
            .min_by(|a, b| (a.0 - z).abs().total_cmp(&(b.0 - z).abs()))
            .map(|&(_, p)| p)
            .unwrap()
    };
    let mle = closed_form_mle(&AnalyticFamily::gaussian_1d(0.0, std)?, data)?;
    let theta_mle = mle.theta_star[0];
    let fam_star = AnalyticFamily::gaussian_1d(theta_mle, std)?;
    let weights: Vec<f64> = data
        .points()
        .iter()
        .map(|x| {
            let p_star = log_density(&fam_star, x)?.exp();
            Ok(1.0 / (-psi_prime_at(p_star) * p_star))
        })
        .collect::<Result<_, TheoryError>>()?;

    let xs: Vec<f64> = data.points().iter().map(|p| p[0]).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * std;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * std;
    let base = rng.split();
    let objective = |theta: f64| {
        let mut stream = base.clone();
        let fam = AnalyticFamily::gaussian_1d(theta, std).expect("std validated");
        data.points()
            .iter()
            .zip(&weights)
            .map(|(x, w)| {
                w * expected_min_dist_mc(&fam, x, m, trials, &mut stream)
                    .expect("trials validated")
                    .mean
            })
            .sum::<f64>()
    };
    let (theta_weighted, _) = minimize_scalar(objective, lo, hi, 60, 1e-3);
    Ok(WeightedEquivalenceReport {
        theta_mle,
        theta_weighted,
        gap: (theta_weighted - theta_mle).abs(),
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v(values: &[f64]) -> Vec64 {
        Vec64::from_slice(values).unwrap()
    }

    fn dataset_1d(values: &[f64]) -> Dataset {
        Dataset::new(values.iter().map(|&x| v(&[x])).collect(), "test").unwrap()
    }

    #[test]
    fn kappa_low_dimensions_exact() {
        assert!((BallVolumeConstant::new(1).kappa - 2.0).abs() <= 1e-12);
        assert!((BallVolumeConstant::new(2).kappa - PI).abs() <= 1e-12);
        assert!((BallVolumeConstant::new(3).kappa - 4.0 * PI / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn kappa_recurrence() {
        for d in 3..=30 {
            let k = BallVolumeConstant::new(d).kappa;
            let prev = BallVolumeConstant::new(d - 2).kappa;
            assert!(
                (k - prev * 2.0 * PI / d as f64).abs() <= 1e-12,
                "d = {d}: {k} vs {}",
                prev * 2.0 * PI / d as f64
            );
        }
    }

    #[test]
    fn ecdf_eval_steps() {
        let cdf = EmpiricalCdf::from_values(vec![2.0, 1.0, 3.0, 1.0]).unwrap();
        assert_eq!(cdf.eval(0.5), 0.0);
        assert_eq!(cdf.eval(1.0), 0.5);
        assert_eq!(cdf.eval(2.5), 0.75);
        assert_eq!(cdf.eval(10.0), 1.0);
    }

    #[test]
    fn tail_integral_m1_is_the_sample_mean() {
        let mut rng = RngStream::new(21, 0);
        let fam = AnalyticFamily::gaussian_1d(0.3, 1.4).unwrap();
        let x0 = v(&[0.0]);
        let values: Vec<f64> = (0..100_000)
            .map(|_| {
                let s = fam.sample_one(&mut rng);
                sq_euclidean_slices(s.as_slice(), x0.as_slice())
            })
            .collect();
        let cdf = EmpiricalCdf::from_values(values).unwrap();
        let integral = tail_integral_expectation(&cdf, 1).unwrap();
        assert!(
            (integral - cdf.sample_mean()).abs() <= 1e-10,
            "{integral} vs {}",
            cdf.sample_mean()
        );
    }

    #[test]
    fn tail_integral_point_mass_returns_the_point() {
        let cdf = EmpiricalCdf::from_values(vec![2.5; 400]).unwrap();
        for m in [1, 2, 8, 64] {
            assert_eq!(tail_integral_expectation(&cdf, m).unwrap(), 2.5);
        }
    }

    #[test]
    fn tail_integral_matches_direct_mc_at_m8() {
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let x0 = v(&[0.0]);
        let mut rng = RngStream::new(22, 0);
        let values: Vec<f64> = (0..100_000)
            .map(|_| {
                let s = fam.sample_one(&mut rng);
                sq_euclidean_slices(s.as_slice(), x0.as_slice())
            })
            .collect();
        let (tail, tail_se) = tail_integral_with_se(&values, 8, 10).unwrap();
        let direct = expected_min_dist_mc(&fam, &x0, 8, 100_000, &mut rng).unwrap();
        let combined = (tail_se * tail_se + direct.stderr * direct.stderr).sqrt();
        assert!(
            (tail - direct.mean).abs() <= 3.0 * combined,
            "tail {tail} +- {tail_se}, direct {direct:?}"
        );
    }

    #[test]
    fn expected_min_dist_second_moment_oracles() {
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(23, 0);
        let at0 = expected_min_dist_mc(&fam, &v(&[0.0]), 1, 50_000, &mut rng).unwrap();
        assert!((at0.mean - 1.0).abs() <= 3.0 * at0.stderr, "{at0:?}");
        let at2 = expected_min_dist_mc(&fam, &v(&[2.0]), 1, 50_000, &mut rng).unwrap();
        assert!((at2.mean - 5.0).abs() <= 3.0 * at2.stderr, "{at2:?}");
    }

    #[test]
    fn expected_min_dist_monotone_in_m_per_trial() {
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let x0 = v(&[0.5]);
        let trials = 400;
        let values_for = |m: usize| {
            let mut rng = RngStream::new(24, 7);
            min_dist_trials(&fam, &x0, m, trials, &mut rng)
        };
        let m1 = values_for(1);
        let m1024 = values_for(1024);
        for (a, b) in m1.iter().zip(&m1024) {
            assert!(b <= a);
        }
        let e1: f64 = m1.iter().sum();
        let e1024: f64 = m1024.iter().sum();
        assert!(e1024 < e1);
    }

    #[test]
    fn trials_floor_enforced() {
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(25, 0);
        assert!(matches!(
            expected_min_dist_mc(&fam, &v(&[0.0]), 1, 10, &mut rng),
            Err(TheoryError::TooFewTrials { .. })
        ));
    }

    #[test]
    fn lemma2_gaussian_1d_slope() {
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(26, 0);
        let report = lemma2_density_check(
            &fam,
            &v(&[0.0]),
            1_000_000,
            &[0.05, 0.1, 0.15, 0.2],
            &mut rng,
        )
        .unwrap();
        // phi(0) = 0.39894
        assert!(report.rel_error <= 0.05, "{report:?}");
        assert!(!report.widened);
    }

    #[test]
    fn lemma2_isotropic_2d_slope() {
        let fam = AnalyticFamily::standard_gaussian(2);
        let mut rng = RngStream::new(27, 0);
        let report = lemma2_density_check(
            &fam,
            &Vec64::zeros(2),
            1_000_000,
            &[0.1, 0.2, 0.3, 0.4],
            &mut rng,
        )
        .unwrap();
        // 1/(2 pi) = 0.15915
        assert!(report.rel_error <= 0.05, "{report:?}");
        assert!((report.exact_density - 1.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn lemma2_widens_on_underpopulated_radii() {
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(28, 0);
        let report = lemma2_density_check(
            &fam,
            &v(&[0.0]),
            20_000,
            &[1e-4, 0.1, 0.2, 0.3],
            &mut rng,
        )
        .unwrap();
        assert!(report.widened);
        assert_eq!(report.rows.len(), 3);
    }

    #[test]
    fn psi_pinned_point_matches_standard_normal() {
        // z = 1/sqrt(2 pi) forces scale 1 at location 0
        let z = 1.0 / (2.0 * PI).sqrt();
        let search = PsiScaleSearch::default();
        let m = 4;
        let mut rng = RngStream::new(29, 0);
        let curve = psi_estimate(&search, &[z], m, 20_000, &mut rng).unwrap();
        let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).unwrap();
        let direct = expected_min_dist_mc(&fam, &v(&[0.0]), m, 20_000, &mut rng).unwrap();
        let combined = (curve.stderr[0].powi(2) + direct.stderr.powi(2)).sqrt();
        assert!(
            (curve.psi[0] - direct.mean).abs() <= 3.0 * combined,
            "{} vs {direct:?}",
            curve.psi[0]
        );
    }

    #[test]
    fn psi_infeasible_z_names_the_bound() {
        let search = PsiScaleSearch {
            s_min: 0.5,
            s_max: 10.0,
        };
        let too_dense = 1.0; // max achievable is 1/(0.5 sqrt(2 pi)) ~ 0.7979
        let mut rng = RngStream::new(30, 0);
        match psi_estimate(&search, &[too_dense], 2, 1000, &mut rng) {
            Err(TheoryError::PsiInfeasible { z, max_density, .. }) => {
                assert_eq!(z, too_dense);
                assert!((max_density - 0.797_884_560_802_865_4).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn psi_curve_strictly_decreases() {
        let search = PsiScaleSearch::default();
        let z_grid: Vec<f64> = (0..8).map(|k| 0.1 * 1.35f64.powi(k)).collect();
        let mut rng = RngStream::new(31, 0);
        let curve = psi_estimate(&search, &z_grid, 8, 10_000, &mut rng).unwrap();
        assert!(curve.strictly_decreasing_beyond_bands(), "{curve:?}");
        assert!(curve.psi.iter().all(|&p| p >= 0.0));
        // psi' central differences exist and are negative
        for (_, p) in curve.psi_prime_central() {
            assert!(p < 0.0);
        }
    }

    #[test]
    fn minimize_scalar_on_quartic() {
        let (x, _) = minimize_scalar(|t: f64| (t - 1.25).powi(4) + 2.0, -4.0, 4.0, 100, 1e-6);
        assert!((x - 1.25).abs() < 1e-3);
    }

    #[test]
    fn lemma1_quadratic_exponential_instance() {
        let xs = [0.0, 2.0, 4.0];
        let spec = TransformCheckSpec {
            objectives: xs
                .iter()
                .map(|&x| {
                    Box::new(move |theta: f64| (theta - x) * (theta - x)) as Box<dyn Fn(f64) -> f64>
                })
                .collect(),
            transform: Box::new(f64::exp),
            transform_deriv: Box::new(f64::exp),
            domain: (-1.0, 5.0),
        };
        let report = lemma1_transform_check(&spec).unwrap();
        assert!((report.argmin_plain - 2.0).abs() <= 1e-3, "{report:?}");
        assert!(report.gap <= 1e-3, "{report:?}");
    }

    #[test]
    fn lemma1_identity_transform_coincides() {
        let spec = TransformCheckSpec {
            objectives: vec![
                Box::new(|t: f64| (t - 1.0) * (t - 1.0)),
                Box::new(|t: f64| (t + 2.0) * (t + 2.0)),
            ],
            transform: Box::new(|y| y),
            transform_deriv: Box::new(|_| 1.0),
            domain: (-4.0, 4.0),
        };
        let report = lemma1_transform_check(&spec).unwrap();
        assert!(report.gap <= 1e-4, "{report:?}");
        assert!((report.argmin_plain - (-0.5)).abs() <= 1e-3);
    }

    #[test]
    fn lemma1_single_objective_any_transform() {
        let spec = TransformCheckSpec {
            objectives: vec![Box::new(|t: f64| (t - 0.75) * (t - 0.75) + 1.0)],
            transform: Box::new(|y: f64| y * y * y), // strictly increasing on y >= 1
            transform_deriv: Box::new(|y: f64| 3.0 * y * y),
            domain: (-2.0, 3.0),
        };
        let report = lemma1_transform_check(&spec).unwrap();
        assert!(report.gap <= 1e-4, "{report:?}");
    }

    #[test]
    fn lemma1_rejects_non_increasing_transform() {
        let spec = TransformCheckSpec {
            objectives: vec![Box::new(|t: f64| t * t)],
            transform: Box::new(|y: f64| -y),
            transform_deriv: Box::new(|_| -1.0),
            domain: (-1.0, 1.0),
        };
        assert!(matches!(
            lemma1_transform_check(&spec),
            Err(TheoryError::NotIncreasing(_))
        ));
    }

    #[test]
    fn theorem1_symmetric_pair_small() {
        let data = dataset_1d(&[-1.0, 1.0]);
        let mut rng = RngStream::new(32, 0);
        let report = theorem1_equivalence_check(&data, 1.0, 4, 4000, 1e-3, &mut rng).unwrap();
        assert_eq!(report.theta_mle, 0.0);
        assert!(report.gap <= 0.05, "{report:?}");
    }

    #[test]
    fn theorem1_closed_form_m1_cases() {
        // sum E[R_i] = n + sum (theta - x_i)^2 for m = 1: minimized at the mean
        let mut rng = RngStream::new(33, 0);
        let report =
            theorem1_equivalence_check(&dataset_1d(&[0.0, 2.0, 4.0]), 1.0, 1, 8000, 1e-3, &mut rng)
                .unwrap();
        assert_eq!(report.theta_mle, 2.0);
        assert!((report.theta_imle - 2.0).abs() <= 0.05, "{report:?}");

        let wide =
            theorem1_equivalence_check(&dataset_1d(&[0.0, 10.0]), 1.0, 1, 8000, 1e-3, &mut rng)
                .unwrap();
        assert_eq!(wide.theta_mle, 5.0);
        assert!((wide.theta_imle - 5.0).abs() <= 0.05, "{wide:?}");
    }

    #[test]
    fn weighted_report_near_zero_on_symmetric_data() {
        let search = PsiScaleSearch::default();
        let z_grid: Vec<f64> = (0..8).map(|k| 0.05 * 1.45f64.powi(k)).collect();
        let mut rng = RngStream::new(34, 0);
        let curve = psi_estimate(&search, &z_grid, 1, 4000, &mut rng).unwrap();
        let report = theorem1_weighted_report(
            &dataset_1d(&[-1.0, 1.0]),
            1.0,
            1,
            4000,
            &curve,
            &mut rng,
        )
        .unwrap();
        // equal densities at the optimum make the weights equal
        assert!((report.weights[0] - report.weights[1]).abs() < 1e-9);
        assert!(report.gap <= 0.1, "{report:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ecdf_is_a_valid_cdf(values in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let cdf = EmpiricalCdf::from_values(values).unwrap();
            prop_assert_eq!(cdf.eval(f64::NEG_INFINITY), 0.0);
            prop_assert_eq!(cdf.eval(f64::INFINITY), 1.0);
            let lo = cdf.values()[0];
            let hi = cdf.values()[cdf.len() - 1];
            let mut prev = 0.0;
            for k in 0..=50 {
                let t = lo + (hi - lo) * k as f64 / 50.0;
                let y = cdf.eval(t);
                prop_assert!(y >= prev);
                prev = y;
            }
            prop_assert_eq!(cdf.eval(hi), 1.0);
        }

        #[test]
        fn tail_integral_m1_identity_holds_generally(
            values in prop::collection::vec(0.0f64..1e3, 2..500)
        ) {
            let cdf = EmpiricalCdf::from_values(values).unwrap();
            let integral = tail_integral_expectation(&cdf, 1).unwrap();
            prop_assert!((integral - cdf.sample_mean()).abs() <= 1e-10 * cdf.sample_mean().max(1.0));
        }

        #[test]
        fn tail_integral_decreases_with_m(
            values in prop::collection::vec(0.0f64..100.0, 10..300)
        ) {
            let cdf = EmpiricalCdf::from_values(values).unwrap();
            let e1 = tail_integral_expectation(&cdf, 1).unwrap();
            let e4 = tail_integral_expectation(&cdf, 4).unwrap();
            let e16 = tail_integral_expectation(&cdf, 16).unwrap();
            prop_assert!(e16 <= e4 + 1e-12 && e4 <= e1 + 1e-12);
        }
    }
}
