//! `imle eval`: Parzen-window log-likelihood of held-out data under samples
//! drawn from a checkpoint. The bandwidth is selected on a validation split
//! disjoint from the reported split.

use std::fs;
use std::path::Path;

use imle_core::{
    draw_model_samples, load_csv, load_idx, parzen_log_likelihood, select_bandwidth, Dataset,
    RngStream, Vec64,
};

use crate::checkpoint::load_checkpoint;
use crate::config::streams;
use crate::report::eval_csv;
use crate::CliError;

pub fn load_data_auto(path: &Path, format: Option<&str>) -> Result<Dataset, CliError> {
    let kind = match format {
        Some(f) => f.to_string(),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("idx" | "idx3" | "idx1" | "ubyte") => "idx".to_string(),
            _ => "csv".to_string(),
        },
    };
    match kind.as_str() {
        "idx" => load_idx(path).map_err(|e| CliError::Config(e.to_string())),
        "csv" => load_csv(path, false).map_err(|e| CliError::Config(e.to_string())),
        other => Err(CliError::Config(format!(
            "unknown data format {other:?} (idx or csv)"
        ))),
    }
}

/// Log-spaced bandwidth grid over [lo, hi].
pub fn sigma_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps == 0 {
        return Err(CliError::Config("sigma grid is empty (steps = 0)".into()));
    }
    if !(lo > 0.0 && hi >= lo) {
        return Err(CliError::Config(format!(
            "bad sigma range [{lo}, {hi}]: need 0 < min <= max"
        )));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).ln() / (steps - 1) as f64;
    Ok((0..steps).map(|k| lo * (ratio * k as f64).exp()).collect())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    checkpoint: &Path,
    data_path: &Path,
    data_format: Option<&str>,
    centers: usize,
    sigma_min: f64,
    sigma_max: f64,
    sigma_steps: usize,
    validation_fraction: f64,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    if centers == 0 {
        return Err(CliError::Config("need at least one center".into()));
    }
    let grid = sigma_grid(sigma_min, sigma_max, sigma_steps)?;
    if !(0.0 < validation_fraction && validation_fraction < 1.0) {
        return Err(CliError::Config(format!(
            "validation fraction {validation_fraction} must be in (0, 1)"
        )));
    }
    let (net, _) = load_checkpoint(checkpoint)?;
    let data = load_data_auto(data_path, data_format)?;
    if data.dim() != net.output_dim() {
        return Err(CliError::Config(format!(
            "data dim {} does not match model output dim {}",
            data.dim(),
            net.output_dim()
        )));
    }
    if data.len() < 2 {
        return Err(CliError::Config(
            "need at least two test points to split validation from report".into(),
        ));
    }

    let mut rng = RngStream::new(seed, streams::EVAL);
    let (_, sampled_centers) = draw_model_samples(&net, &mut rng, centers);

    // seeded shuffle so the split is deterministic and disjoint
    let order = rng.sample_without_replacement(data.len(), data.len());
    let n_validation = ((data.len() as f64 * validation_fraction).round() as usize)
        .clamp(1, data.len() - 1);
    let pick = |idxs: &[usize]| -> Dataset {
        let points: Vec<Vec64> = idxs.iter().map(|&i| data.point(i).clone()).collect();
        Dataset::new(points, data.source_tag()).expect("nonempty split")
    };
    let validation = pick(&order[..n_validation]);
    let report = pick(&order[n_validation..]);

    let sigma = select_bandwidth(&sampled_centers, &validation, &grid)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let estimate = parzen_log_likelihood(&sampled_centers, sigma, &report)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out, eval_csv(&estimate, n_validation, centers))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "parzen log-likelihood {:.4} +- {:.4} (sigma {:.4}) over {} test points -> {}",
        estimate.mean,
        estimate.stderr,
        sigma,
        estimate.per_point.len(),
        out.display()
    );
    Ok(())
}
