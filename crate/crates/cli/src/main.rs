use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use memspin_cli::{parse_config_with, run, Mode, Overrides, RunOptions};

/// Spin dynamics with memory kernels and coloured quantum noise.
#[derive(Debug, Parser)]
#[command(name = "memspin", version)]
struct Args {
    /// Experiment description (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Override the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles and sweeps (1 runs sequentially).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the generated noise traces next to trajectory output.
    #[arg(long)]
    dump_noise: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
        .map_err(|e: memspin_cli::ConfigError| e.to_string())
}

fn configure_workers(workers: Option<usize>) -> Result<()> {
    match workers {
        Some(0) => anyhow::bail!("--workers must be at least 1"),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool"),
        #[cfg(not(feature = "parallel"))]
        Some(n) => {
            if n > 1 {
                log::warn!("built without the parallel feature; running sequentially");
            }
            Ok(())
        }
        None => Ok(()),
    }
}

fn main_inner() -> Result<bool> {
    let args = Args::parse();
    configure_workers(args.workers)?;
    let text = match &args.config {
        Some(path) => {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => String::new(),
    };
    let overrides = Overrides {
        mode: args.mode,
        seed: args.seed,
        output: args.out.clone(),
    };
    let cfg = parse_config_with(&text, &overrides)?;
    let report = run(
        &cfg,
        &RunOptions {
            workers: args.workers,
            dump_noise: args.dump_noise,
        },
    )?;
    // A closed stdout (e.g. piped into `head`) must not turn a finished run into a panic.
    let mut out = std::io::stdout().lock();
    let _ = write!(out, "{}", report.summary);
    for a in &report.artifacts {
        let _ = writeln!(out, "wrote {}", a.display());
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
