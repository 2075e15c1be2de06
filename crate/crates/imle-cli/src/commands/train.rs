//! `imle train`: run the full training procedure from a JSON config, writing
//! the trace CSV and checkpoints into the output directory.

use std::fs;
use std::path::Path;

use imle_core::{
    gen_ring_mixture, imle_train_with, load_csv, load_idx, Dataset, GeneratorNet, RngStream,
};

use crate::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::config::{load_run_config, streams, DataSection, RunConfig};
use crate::report::write_trace_csv;
use crate::CliError;

fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    match &config.data {
        DataSection::Ring { k, radius, std, n } => {
            let mut rng = RngStream::new(config.seed, streams::DATA);
            gen_ring_mixture(&mut rng, *k, *radius, *std, *n)
                .map_err(|e| CliError::Config(format!("ring dataset: {e}")))
        }
        DataSection::Idx { path } => {
            load_idx(Path::new(path)).map_err(|e| CliError::Config(e.to_string()))
        }
        DataSection::Csv { path, has_header } => {
            load_csv(Path::new(path), *has_header).map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

pub fn cmd_train(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let mut config = load_run_config(config_path)?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let data = load_dataset(&config)?;
    let model = config.model.resolve(data.dim())?;
    let train_cfg = config.train.resolve(data.len(), config.seed)?;
    for warning in train_cfg
        .validate(data.len())
        .map_err(|e| CliError::Config(e.to_string()))?
    {
        eprintln!("warning: {warning}");
    }
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut init_rng = RngStream::new(config.seed, streams::NET_INIT);
    let mut net = GeneratorNet::init(&model.layer_sizes, model.output_activation, &mut init_rng)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let meta_for = |net: &GeneratorNet, outer: usize| {
        let mut meta = CheckpointMeta::for_net(net, config.seed, outer);
        meta.image_shape = model.image_shape;
        meta.config_echo = Some(config.clone());
        meta
    };

    let cadence = config.checkpoint_every;
    let mut checkpoint_failure: Option<CliError> = None;
    let mut train_rng = RngStream::new(config.seed, streams::TRAIN);
    let result = imle_train_with(&mut net, &data, &train_cfg, &mut train_rng, |record, net| {
        if cadence == 0 || record.outer_iter % cadence != 0 || checkpoint_failure.is_some() {
            return None;
        }
        let path = out_dir.join(format!("checkpoint_{:06}.imle", record.outer_iter));
        match save_checkpoint(&path, net, &meta_for(net, record.outer_iter)) {
            Ok(()) => Some(path.display().to_string()),
            Err(e) => {
                checkpoint_failure = Some(e);
                None
            }
        }
    });

    let trace_path = out_dir.join("trace.csv");
    match result {
        Ok(trace) => {
            if let Some(e) = checkpoint_failure {
                return Err(e);
            }
            write_trace_csv(&trace_path, &trace)?;
            let final_path = out_dir.join("final.imle");
            save_checkpoint(&final_path, &net, &meta_for(&net, train_cfg.outer_iters))?;
            println!(
                "trained {} outer iterations; trace at {}, final checkpoint at {}",
                trace.records.len(),
                trace_path.display(),
                final_path.display()
            );
            Ok(())
        }
        Err(abort) => {
            // flush whatever completed before the abort
            write_trace_csv(&trace_path, &abort.trace)?;
            Err(CliError::Runtime(abort.to_string()))
        }
    }
}
