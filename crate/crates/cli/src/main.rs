use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynshape_cli::commands::init_threads;
use dynshape_cli::{run, CliResult, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dynshape", version, about = "Dynamic shape sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a phantom volume.
    Phantom(Common),
    /// Project a phantom and add noise.
    Simulate(Common),
    /// Reconstruct a sinogram with the configured method.
    Reconstruct(Common),
    /// Per-frame PSNR, SSIM and Dice against the ground truth.
    Metrics(Common),
    /// DCT compression errors of a phantom and a time-shuffled copy.
    CompressStudy(Common),
    /// Write frames as PGM or PNG images.
    Export(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Override one config key, e.g. `method-params.tau=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, replacing `output-dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(cmd: Command, args: &Common) -> CliResult<Vec<PathBuf>> {
    let cfg = ExperimentConfig::load(&args.config, &args.set, args.out.as_deref())?;
    init_threads()?;
    run(cmd, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Phantom(a) => (Command::Phantom, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Reconstruct(a) => (Command::Reconstruct, a),
        Cmd::Metrics(a) => (Command::Metrics, a),
        Cmd::CompressStudy(a) => (Command::CompressStudy, a),
        Cmd::Export(a) => (Command::Export, a),
    };
    match execute(cmd, args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dynshape: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
