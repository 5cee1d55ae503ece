use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use patmg::config::{ExperimentConfig, DESK_2D, PAPER_SHAPE_2D};
use patmg::experiment::{cmd_compare, cmd_reconstruct, cmd_simulate, Algorithm};
use patmg::Result;

#[derive(Parser)]
#[command(name = "patmg", version, about = "Photoacoustic tomography reconstruction experiments")]
struct Cli {
    /// Worker threads for the FFTs (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate phantom, media and sensor data.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct an image from a data bundle.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "fista")]
        algo: Algorithm,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge the histories of finished runs into a table and plots.
    Compare {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,
    },
    /// Print a shipped configuration with every default filled in.
    Defaults {
        #[arg(long, default_value = "2d-desk")]
        name: String,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| patmg::PatError::InvalidArgument(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Simulate { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let m = cmd_simulate(&cfg, &out)?;
            println!("wrote {} (data {})", out.display(), &m.data_hash[..16]);
        }
        Cmd::Reconstruct {
            config,
            data,
            algo,
            max_iters,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let m = cmd_reconstruct(&cfg, &data, algo, max_iters, &out)?;
            if let Some(r) = m.run {
                println!(
                    "{algo}: {} iterations, F = {:.6e}, RES = {:.4e}, RE = {}",
                    r.iterations,
                    r.final_f,
                    r.final_res,
                    r.final_re.map_or("-".into(), |v| format!("{v:.2}%"))
                );
            }
        }
        Cmd::Compare { out, runs } => print!("{}", cmd_compare(&runs, &out)?),
        Cmd::Defaults { name } => {
            let text = match name.as_str() {
                "2d-desk" => DESK_2D,
                "2d-paper-shape" => PAPER_SHAPE_2D,
                other => {
                    return Err(patmg::PatError::InvalidArgument(format!(
                        "unknown config {other:?}; shipped: 2d-desk, 2d-paper-shape"
                    )))
                }
            };
            print!("{}", ExperimentConfig::from_toml(text)?.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
