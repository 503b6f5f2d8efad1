use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use cmm_cli::{cmd_plan, cmd_roundtrip, cmd_sweep, exit_code, write_csv, Config};

/// Coded distributed matrix multiplication: plans, round trips and sweeps.
#[derive(Parser)]
#[command(name = "cmm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the layered plan a config describes.
    Plan {
        config: PathBuf,
        /// Write the plan here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode random operands, decode from simulated arrivals, check the product.
    Roundtrip {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Average finishing times over a range of layer counts.
    Sweep {
        config: PathBuf,
        /// Comma-separated layer counts; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-trial finishing times.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn create(path: &PathBuf) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Plan { config, out } => {
            let doc = cmd_plan(&Config::load(&config)?)?;
            let text = serde_json::to_string_pretty(&doc)?;
            match out {
                Some(p) => writeln!(create(&p)?, "{text}")?,
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Roundtrip { config, seed } => {
            let report = cmd_roundtrip(&Config::load(&config)?, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                log::error!("relative error {:e} above tolerance", report.relative_error);
                Ok(ExitCode::from(2))
            }
        }
        Command::Sweep {
            config,
            layers,
            out,
            trace,
        } => {
            let cfg = Config::load(&config)?;
            let layers = layers.unwrap_or_else(|| cfg.sweep.layers.clone());
            let result = cmd_sweep(&cfg, &layers)?;
            write_csv(&result.summary, create(&out)?)?;
            if let Some(t) = trace {
                write_csv(&result.trace, create(&t)?)?;
            }
            write_csv(&result.summary, io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CMM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
