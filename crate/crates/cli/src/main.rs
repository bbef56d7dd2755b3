//! `trackcount`: count fission tracks in photomicrographs and compute the
//! statistics built on those counts.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineArgs;

#[derive(Debug, Parser)]
#[command(name = "trackcount", version, about = "Fission-track counting and statistics")]
struct Cli {
    /// key=value config file; defaults to $TRACKCOUNT_CONFIG
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count tracks in one image and print a counts row
    Count(CountArgs),
    /// Count every PNG/TIFF image in a directory
    Batch(BatchArgs),
    /// GQR efficiency factor from external-detector and internal-surface counts
    Gqr(GqrArgs),
    /// Kolmogorov-Smirnov test of per-image counts against a Poisson law
    Kstest(KsArgs),
    /// Standardless fission-track age
    Age(AgeArgs),
    /// Write a synthetic image and its ground truth
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct CountArgs {
    image: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Also write an annotated PNG
    #[arg(long)]
    overlay: bool,
    /// Print the full report as JSON instead of a counts row
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BatchArgs {
    dir: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Also write an annotated PNG per image
    #[arg(long)]
    overlay: bool,
}

#[derive(Debug, Args)]
struct GqrArgs {
    /// Counts table for the external detector (mica)
    #[arg(long, value_name = "CSV")]
    ed: PathBuf,
    /// Counts table for the internal surface (apatite)
    #[arg(long = "is", value_name = "CSV")]
    internal: PathBuf,
    /// Area of one image, cm^2
    #[arg(long, value_name = "CM2")]
    area: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KsArgs {
    counts: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AgeArgs {
    /// Total decay constant of 238U, 1/a
    #[arg(long)]
    lambda: f64,
    /// Isotopic abundance of 238U
    #[arg(long)]
    c238: f64,
    #[arg(long)]
    gqr: f64,
    /// Spontaneous track density, tracks/cm^2
    #[arg(long)]
    rho_s: f64,
    /// Induced track density, tracks/cm^2
    #[arg(long)]
    rho_i: f64,
    /// Spontaneous fission decay constant, 1/a
    #[arg(long, default_value_t = trackcount::ftstats::LAMBDA_F_DEFAULT)]
    lambda_f: f64,
    /// Induced fissions per uranium atom
    #[arg(long, default_value_t = trackcount::ftstats::R_U_DEFAULT)]
    r_u: f64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    n_tracks: usize,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    /// Chance that a track is drawn crossing another
    #[arg(long, default_value_t = 0.0)]
    overlap: f64,
    /// Crossing pairs drawn regardless of --overlap
    #[arg(long, default_value_t = 0)]
    crossings: usize,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = config::config_path(cli.config.as_deref());
    let result = match cli.command {
        Command::Count(a) => commands::count(config.as_deref(), a),
        Command::Batch(a) => commands::batch(config.as_deref(), a),
        Command::Gqr(a) => commands::gqr(config.as_deref(), a),
        Command::Kstest(a) => commands::kstest(a),
        Command::Age(a) => commands::age(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<commands::UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
