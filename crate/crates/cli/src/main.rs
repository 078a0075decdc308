mod commands;
mod config;
mod kernel_check;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::load;

#[derive(Parser, Debug)]
#[command(name = "kinetic-em", version, about = "Experiments with the mollified Euler scheme for kinetic SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true, env = "KINETIC_EM_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate sample paths and write one trajectory CSV per path.
    Simulate,
    /// Strong error against a finer or exact reference, with a fitted rate.
    StrongRate,
    /// Weak error over a set of bounded test functions, with a fitted rate.
    WeakRate,
    /// Frozen versus transport-shifted prediction of the integrated noise.
    TamingDemo,
    /// Pass/fail table for the Gaussian kernel and the path sampler.
    KernelCheck,
    /// Histogram total-variation proxy, d = 1.
    TvProxy,
}

fn config_dir(path: Option<&Path>) -> PathBuf {
    path.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: &Cli) -> Result<Outcome> {
    let path = cli.config.as_deref();
    let base = config_dir(path);
    macro_rules! with_seed {
        ($cfg:expr) => {{
            let mut c = $cfg;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c
        }};
    }
    match cli.command {
        Command::Simulate => commands::simulate(&with_seed!(load::<config::SimulateConfig>(path)?), &base, &cli.out),
        Command::StrongRate => {
            commands::strong_rate(&with_seed!(load::<config::StrongRateConfig>(path)?), &base, &cli.out)
        }
        Command::WeakRate => commands::weak_rate(&with_seed!(load::<config::WeakRateConfig>(path)?), &base, &cli.out),
        Command::TamingDemo => commands::taming(&with_seed!(load::<config::TamingDemoConfig>(path)?), &cli.out),
        Command::KernelCheck => commands::kernel_check(&with_seed!(load::<config::KernelCheckConfig>(path)?), &cli.out),
        Command::TvProxy => commands::tv(&with_seed!(load::<config::TvProxyConfig>(path)?), &base, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")
        {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            let failures = outcome.failures();
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for c in &failures {
                    eprintln!("check failed: {} (value {}, tolerance {})", c.name, c.value, c.tolerance);
                }
                eprintln!("{} of {} checks failed", failures.len(), outcome.checks.len());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
