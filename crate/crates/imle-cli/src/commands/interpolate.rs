//! `imle interpolate`: wrapped linear interpolation between seeded latent
//! endpoints, rasterized one segment per row.

use std::path::Path;

use imle_core::{gaussian_sample, interpolate_latent, RngStream, Vec64};

use crate::checkpoint::load_checkpoint;
use crate::config::streams;
use crate::ppm::raster_segments;
use crate::CliError;

pub fn cmd_interpolate(
    checkpoint: &Path,
    endpoints: usize,
    steps: usize,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    if endpoints < 2 {
        return Err(CliError::Config(format!(
            "need at least two endpoints, got {endpoints}"
        )));
    }
    if steps < 2 {
        return Err(CliError::Config(format!(
            "need at least two steps per segment, got {steps}"
        )));
    }
    let (net, meta) = load_checkpoint(checkpoint)?;
    let shape = meta.image_shape.ok_or_else(|| {
        CliError::Config(format!(
            "checkpoint {} carries no image_shape; interpolation grids need one",
            checkpoint.display()
        ))
    })?;
    let mut rng = RngStream::new(seed, streams::INTERPOLATE);
    let latents: Vec<Vec64> = (0..endpoints)
        .map(|_| gaussian_sample(&mut rng, net.latent_dim()))
        .collect();
    let segments =
        interpolate_latent(&net, &latents, steps).map_err(|e| CliError::Runtime(e.to_string()))?;
    raster_segments(&segments, shape)?.write(out)?;
    println!(
        "wrote {} segments x {} steps to {}",
        segments.len(),
        steps,
        out.display()
    );
    Ok(())
}
