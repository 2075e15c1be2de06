use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use imle_cli::commands::{
    cmd_eval, cmd_interpolate, cmd_sample, cmd_train, cmd_verify, SampleFormat, Suite,
};

#[derive(Parser)]
#[command(
    name = "imle",
    about = "Train implicit generative models by nearest-sample matching and \
             verify the estimator theory numerically",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training job described by a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the trace CSV and checkpoints.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw samples from a checkpoint (pure function of the seed).
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// csv or ppm-grid.
        #[arg(long, default_value = "csv")]
        format: SampleFormat,
        #[arg(long, default_value_t = 8)]
        grid_cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parzen-window log-likelihood of held-out data under model samples.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// idx or csv; inferred from the extension when omitted.
        #[arg(long)]
        data_format: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        centers: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma_min: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_max: f64,
        #[arg(long, default_value_t = 20)]
        sigma_steps: usize,
        /// Fraction of the data held out to select the bandwidth.
        #[arg(long, default_value_t = 0.1)]
        validation_fraction: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Wrapped latent-space interpolation grid as a PPM image.
    Interpolate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        endpoints: usize,
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the numerical verification suites.
    Verify {
        /// lemma1, lemma2, lemma3-psi, theorem1, tail-integral, or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the per-suite report CSVs.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out, seed } => cmd_train(&config, &out, seed),
        Command::Sample {
            checkpoint,
            count,
            out,
            format,
            grid_cols,
            seed,
        } => cmd_sample(&checkpoint, count, &out, format, grid_cols, seed),
        Command::Eval {
            checkpoint,
            data,
            data_format,
            centers,
            sigma_min,
            sigma_max,
            sigma_steps,
            validation_fraction,
            out,
            seed,
        } => cmd_eval(
            &checkpoint,
            &data,
            data_format.as_deref(),
            centers,
            sigma_min,
            sigma_max,
            sigma_steps,
            validation_fraction,
            &out,
            seed,
        ),
        Command::Interpolate {
            checkpoint,
            endpoints,
            steps,
            out,
            seed,
        } => cmd_interpolate(&checkpoint, endpoints, steps, &out, seed),
        Command::Verify { suite, seed, out } => match suite.parse::<Suite>() {
            Ok(suite) => cmd_verify(suite, seed, &out),
            Err(msg) => Err(imle_cli::CliError::Config(msg)),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
