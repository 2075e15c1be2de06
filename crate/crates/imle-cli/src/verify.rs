//! Verification suites behind `imle verify`: each returns rows with pinned
//! expectations and tolerances. The acceptance tests run these same
//! functions, so the command line and the test suite cannot drift apart.

use imle_core::theory::{
    tail_integral_with_se, theorem1_weighted_report, PsiScaleSearch, TransformCheckSpec,
};
use imle_core::{
    expected_min_dist_mc, lemma1_transform_check, lemma2_density_check, psi_estimate,
    sq_euclidean, tail_integral_expectation, theorem1_equivalence_check, AnalyticFamily,
    BallVolumeConstant, Dataset, EmpiricalCdf, RngStream, Vec64,
};

use crate::config::streams;
use crate::report::VerifyRow;
use crate::CliError;

fn dataset_1d(values: &[f64]) -> Dataset {
    let points = values
        .iter()
        .map(|&x| Vec64::from_slice(&[x]).expect("finite"))
        .collect();
    Dataset::new(points, "verify").expect("nonempty")
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("verification suite failed to run: {e}"))
}

/// Estimator-vs-MLE equivalence on Gaussian location data: symmetric pair at
/// several sample counts, and the three-point closed-form case.
pub fn suite_theorem1(seed: u64) -> Result<Vec<VerifyRow>, CliError> {
    const TRIALS: usize = 20_000;
    const GRID_TOL: f64 = 1e-3;
    const GAP_TOL: f64 = 0.05;
    let mut rng = RngStream::new(seed, streams::VERIFY);
    let mut rows = Vec::new();

    let symmetric = dataset_1d(&[-1.0, 1.0]);
    for m in [1usize, 4, 16] {
        let report = theorem1_equivalence_check(&symmetric, 1.0, m, TRIALS, GRID_TOL, &mut rng)
            .map_err(runtime)?;
        rows.push(VerifyRow::two_sided(
            format!("theorem1-sym-m{m}"),
            report.theta_imle,
            report.theta_mle,
            GAP_TOL,
        ));
    }

    let three = dataset_1d(&[0.0, 2.0, 4.0]);
    let report =
        theorem1_equivalence_check(&three, 1.0, 1, TRIALS, GRID_TOL, &mut rng).map_err(runtime)?;
    rows.push(VerifyRow::two_sided(
        "theorem1-three-point-m1",
        report.theta_imle,
        2.0,
        GAP_TOL,
    ));

    // weighted variant is qualitative only: two stacked Monte Carlo layers
    let search = PsiScaleSearch::default();
    let z_grid: Vec<f64> = (0..8).map(|k| 0.05 * 1.45f64.powi(k)).collect();
    let curve = psi_estimate(&search, &z_grid, 1, 4000, &mut rng).map_err(runtime)?;
    let weighted =
        theorem1_weighted_report(&three, 1.0, 1, 4000, &curve, &mut rng).map_err(runtime)?;
    rows.push(VerifyRow::info("theorem1-weighted-gap", weighted.gap));
    Ok(rows)
}

/// Ball-shrinkage density derivative for standard Gaussians in d = 1, 2, 3,
/// plus the exact unit-ball volumes the transform consumes.
pub fn suite_lemma2(seed: u64) -> Result<Vec<VerifyRow>, CliError> {
    const DRAWS: usize = 1_000_000;
    let mut rng = RngStream::new(seed, streams::VERIFY);
    let mut rows = Vec::new();
    for (kappa_expected, d) in [(2.0, 1usize), (std::f64::consts::PI, 2), (4.0 * std::f64::consts::PI / 3.0, 3)] {
        rows.push(VerifyRow::two_sided(
            format!("kappa-d{d}"),
            BallVolumeConstant::new(d).kappa,
            kappa_expected,
            1e-12,
        ));
    }
    let radii: [&[f64]; 3] = [
        &[0.05, 0.1, 0.15, 0.2],
        &[0.1, 0.2, 0.3, 0.4],
        &[0.2, 0.3, 0.4, 0.5],
    ];
    for (d, radii) in (1..=3).zip(radii) {
        let fam = AnalyticFamily::standard_gaussian(d);
        let report = lemma2_density_check(&fam, &Vec64::zeros(d), DRAWS, radii, &mut rng)
            .map_err(runtime)?;
        rows.push(VerifyRow::two_sided(
            format!("lemma2-slope-d{d}"),
            report.slope_estimate,
            report.exact_density,
            0.05 * report.exact_density,
        ));
    }
    Ok(rows)
}

/// Strict decrease of the estimated constrained-minimum curve over an
/// 8-point density grid, beyond non-overlapping 2-stderr bands.
pub fn suite_lemma3_psi(seed: u64) -> Result<Vec<VerifyRow>, CliError> {
    const TRIALS: usize = 10_000;
    const M: usize = 8;
    let mut rng = RngStream::new(seed, streams::VERIFY);
    let search = PsiScaleSearch::default();
    let z_grid: Vec<f64> = (0..8).map(|k| 0.1 * 1.35f64.powi(k)).collect();
    let curve = psi_estimate(&search, &z_grid, M, TRIALS, &mut rng).map_err(runtime)?;
    let mut rows = Vec::new();
    for k in 0..curve.z_grid.len() {
        rows.push(VerifyRow::info(
            format!("psi-value-z{:.4}", curve.z_grid[k]),
            curve.psi[k],
        ));
    }
    for k in 0..curve.z_grid.len() - 1 {
        // upper band of the next point must sit strictly below the lower band
        // of this one
        let overlap = (curve.psi[k + 1] + 2.0 * curve.stderr[k + 1])
            - (curve.psi[k] - 2.0 * curve.stderr[k]);
        rows.push(VerifyRow::at_most(
            format!("psi-strict-decrease-{k}"),
            overlap,
            0.0,
        ));
    }
    for (z, p) in curve.psi_prime_central() {
        rows.push(VerifyRow::info(format!("psi-prime-z{z:.4}"), p));
    }
    Ok(rows)
}

/// Tail-integral identity on the empirical step CDF: exact agreement with
/// the sample mean at m = 1, and agreement with the direct Monte Carlo
/// estimator at m = 8.
pub fn suite_tail_integral(seed: u64) -> Result<Vec<VerifyRow>, CliError> {
    const DRAWS: usize = 100_000;
    let mut rng = RngStream::new(seed, streams::VERIFY);
    let fam = AnalyticFamily::gaussian_1d(0.0, 1.0).map_err(runtime)?;
    let x0 = Vec64::zeros(1);
    let values: Vec<f64> = (0..DRAWS)
        .map(|_| {
            let s = fam.sample_one(&mut rng);
            sq_euclidean(&s, &x0).expect("dims agree")
        })
        .collect();
    let cdf = EmpiricalCdf::from_values(values.clone()).map_err(runtime)?;
    let tail_m1 = tail_integral_expectation(&cdf, 1).map_err(runtime)?;
    let mut rows = vec![VerifyRow::two_sided(
        "tail-m1-equals-mean",
        tail_m1,
        cdf.sample_mean(),
        1e-10,
    )];
    let (tail_m8, tail_se) = tail_integral_with_se(&values, 8, 10).map_err(runtime)?;
    let direct = expected_min_dist_mc(&fam, &x0, 8, DRAWS, &mut rng).map_err(runtime)?;
    let combined = (tail_se * tail_se + direct.stderr * direct.stderr).sqrt();
    rows.push(VerifyRow::two_sided(
        "tail-m8-vs-direct-mc",
        tail_m8,
        direct.mean,
        3.0 * combined,
    ));
    Ok(rows)
}

/// Monotone-transform argmin preservation on explicit instances.
pub fn suite_lemma1() -> Result<Vec<VerifyRow>, CliError> {
    let mut rows = Vec::new();

    let quad_exp = TransformCheckSpec {
        objectives: [0.0, 2.0, 4.0]
            .iter()
            .map(|&x| Box::new(move |theta: f64| (theta - x) * (theta - x)) as Box<dyn Fn(f64) -> f64>)
            .collect(),
        transform: Box::new(f64::exp),
        transform_deriv: Box::new(f64::exp),
        domain: (-1.0, 5.0),
    };
    let report = lemma1_transform_check(&quad_exp).map_err(runtime)?;
    rows.push(VerifyRow::two_sided(
        "lemma1-quad-exp-argmin",
        report.argmin_plain,
        2.0,
        1e-3,
    ));
    rows.push(VerifyRow::two_sided(
        "lemma1-quad-exp-gap",
        report.gap,
        0.0,
        1e-3,
    ));

    let identity = TransformCheckSpec {
        objectives: vec![
            Box::new(|t: f64| (t - 1.0) * (t - 1.0)),
            Box::new(|t: f64| (t + 2.0) * (t + 2.0)),
        ],
        transform: Box::new(|y| y),
        transform_deriv: Box::new(|_| 1.0),
        domain: (-4.0, 4.0),
    };
    let report = lemma1_transform_check(&identity).map_err(runtime)?;
    rows.push(VerifyRow::two_sided(
        "lemma1-identity-gap",
        report.gap,
        0.0,
        1e-3,
    ));

    let single = TransformCheckSpec {
        objectives: vec![Box::new(|t: f64| (t - 0.75) * (t - 0.75) + 1.0)],
        transform: Box::new(|y: f64| y * y * y),
        transform_deriv: Box::new(|y: f64| 3.0 * y * y),
        domain: (-2.0, 3.0),
    };
    let report = lemma1_transform_check(&single).map_err(runtime)?;
    rows.push(VerifyRow::two_sided(
        "lemma1-single-objective-gap",
        report.gap,
        0.0,
        1e-3,
    ));
    Ok(rows)
}
