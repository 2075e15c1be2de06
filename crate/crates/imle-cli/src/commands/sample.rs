//! `imle sample`: draw samples from a checkpoint. Samples are a pure
//! function of the seed, so there is no room for cherry-picking.

use std::fs;
use std::path::Path;

use imle_core::{draw_model_samples, RngStream};

use crate::checkpoint::load_checkpoint;
use crate::config::streams;
use crate::ppm::raster_grid;
use crate::report::samples_csv;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Csv,
    PpmGrid,
}

impl std::str::FromStr for SampleFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "ppm-grid" => Ok(Self::PpmGrid),
            other => Err(format!("unknown format {other:?} (csv or ppm-grid)")),
        }
    }
}

pub fn cmd_sample(
    checkpoint: &Path,
    count: usize,
    out: &Path,
    format: SampleFormat,
    grid_cols: usize,
    seed: u64,
) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Config("count must be at least 1".into()));
    }
    let (net, meta) = load_checkpoint(checkpoint)?;
    let mut rng = RngStream::new(seed, streams::SAMPLE);
    let (_, samples) = draw_model_samples(&net, &mut rng, count);
    match format {
        SampleFormat::Csv => fs::write(out, samples_csv(&samples))
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?,
        SampleFormat::PpmGrid => {
            let shape = meta.image_shape.ok_or_else(|| {
                CliError::Config(format!(
                    "checkpoint {} carries no image_shape; samples of dim {} are not \
                     rasterizable",
                    checkpoint.display(),
                    net.output_dim()
                ))
            })?;
            raster_grid(&samples, shape, grid_cols)?.write(out)?;
        }
    }
    println!("wrote {count} samples to {}", out.display());
    Ok(())
}
