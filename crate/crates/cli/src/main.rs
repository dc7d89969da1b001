//! `pinnlab` — train a small physics-informed network on the 1D Poisson
//! benchmark and validate its perturbation, concentration, and
//! generalization bounds.
//!
//! Every failure exits nonzero after printing a single `error: ...` line
//! to stderr, so scripts can match on the prefix.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use pinnlab_cli::commands::{self, config_path};
use pinnlab_cli::config;

#[derive(Parser)]
#[command(
    name = "pinnlab",
    version,
    about = "Stability laboratory for a small physics-informed network \
             on the 1D Poisson benchmark"
)]
struct Cli {
    /// Config file of `key = value` lines (used by train, and by
    /// generalize when no stored run exists)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (default: $PINNLAB_OUT, then ./out)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed; wins over the config file and --set
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Config override, e.g. --set lr=0.01 (repeatable, applied in order)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the network; store checkpoint, loss history, and resolved config
    Train,
    /// Write a perturbation-safety certificate for the stored network
    Certify {
        /// Loss-change tolerance the certificate is issued for
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Sweep the output-perturbation amplitude against the closed-form bound
    Perturb {
        /// Smallest amplitude of the log-spaced sweep
        #[arg(long)]
        delta_min: Option<f64>,
        /// Largest amplitude of the log-spaced sweep
        #[arg(long)]
        delta_max: Option<f64>,
        /// Number of amplitudes
        #[arg(long)]
        delta_steps: Option<usize>,
    },
    /// Resample collocation sets around the stored (frozen) network
    Concentrate {
        /// Resampling trials per collocation count
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated collocation counts, e.g. 20,50,100,200
        #[arg(long, value_name = "N1,N2,...")]
        nf_grid: Option<String>,
    },
    /// Train one network per (N_f, seed) cell and relate loss to uniform error
    Generalize {
        /// Comma-separated collocation counts in [10, 200]
        #[arg(long, value_name = "N1,N2,...")]
        nf_grid: Option<String>,
        /// Trained networks per collocation count
        #[arg(long)]
        seeds_per_nf: Option<usize>,
    },
    /// Aggregate the study CSVs in the output directory into report.md
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Collapse clap's multi-line rendering to the one-line contract.
            let msg = e.to_string();
            let first =
                msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let out_dir: PathBuf = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("PINNLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match &cli.command {
        Command::Train => {
            let settings = commands::resolve_fresh(cli.config.as_deref(), &cli.set, cli.seed)?;
            commands::cmd_train(&out_dir, &settings)
        }
        Command::Certify { epsilon } => {
            reject_config_flag("certify", &cli)?;
            let (settings, net) = commands::load_stored_run(&out_dir, &cli.set, cli.seed)?;
            commands::cmd_certify(&out_dir, &settings, &net, *epsilon)
        }
        Command::Perturb { delta_min, delta_max, delta_steps } => {
            reject_config_flag("perturb", &cli)?;
            let (mut settings, net) = commands::load_stored_run(&out_dir, &cli.set, cli.seed)?;
            if let Some(v) = delta_min {
                settings.delta_min = *v;
            }
            if let Some(v) = delta_max {
                settings.delta_max = *v;
            }
            if let Some(v) = delta_steps {
                settings.delta_steps = *v;
            }
            commands::cmd_perturb(&out_dir, &settings, &net)
        }
        Command::Concentrate { trials, nf_grid } => {
            reject_config_flag("concentrate", &cli)?;
            let (settings, net) = commands::load_stored_run(&out_dir, &cli.set, cli.seed)?;
            let grid = parse_grid(nf_grid)?;
            commands::cmd_concentrate(&out_dir, &settings, &net, *trials, grid)
        }
        Command::Generalize { nf_grid, seeds_per_nf } => {
            // Reuse the stored run's config when one exists, so the study
            // matches the trained network's hyper-parameters; otherwise
            // resolve from scratch like `train`.
            let settings = if cli.config.is_none() && config_path(&out_dir).exists() {
                commands::load_stored_settings(&out_dir, &cli.set, cli.seed)?
            } else {
                commands::resolve_fresh(cli.config.as_deref(), &cli.set, cli.seed)?
            };
            let grid = parse_grid(nf_grid)?;
            commands::cmd_generalize(&out_dir, &settings, grid, *seeds_per_nf)
        }
        Command::Report => commands::cmd_report(&out_dir),
    }
}

fn reject_config_flag(cmd: &str, cli: &Cli) -> Result<()> {
    if cli.config.is_some() {
        bail!(
            "`{cmd}` reads the config stored in the run directory; \
             use --set KEY=VALUE to override individual keys"
        );
    }
    Ok(())
}

fn parse_grid(flag: &Option<String>) -> Result<Option<Vec<usize>>> {
    flag.as_ref().map(|s| config::usize_list("nf-grid", s)).transpose()
}
