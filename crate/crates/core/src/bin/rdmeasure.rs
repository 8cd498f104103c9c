use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rdmeasure::harness::{self, ExperimentConfig, ExperimentKind};
use rdmeasure::Error;

/// Monte Carlo experiments on random discrete measures.
#[derive(Parser, Debug)]
#[command(name = "rdmeasure", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Posterior concentration around the empirical measure.
    Gc(Common),
    /// Scaled posterior distance against the Gaussian bridge limit.
    Bvm(Common),
    /// Dyadic bracketing profile and square-root mass check.
    Bracketing(Common),
    /// Covariance of the local empirical process across bandwidths.
    #[command(name = "local-ep")]
    LocalEp {
        #[command(flatten)]
        common: Common,
        /// Comma-separated bandwidths.
        #[arg(long, value_delimiter = ',')]
        bandwidths: Option<Vec<f64>>,
        /// Product `n·h`, held fixed across bandwidths.
        #[arg(long)]
        n_times_h: Option<f64>,
        #[arg(long)]
        replications: Option<usize>,
        /// Number of equally spaced grid points in the window.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Weight-norm diagnostics along the sample-size schedule.
    Conditions(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; companion tables go next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
}

fn load(kind: ExperimentKind, common: &Common) -> rdmeasure::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(kind, path)?,
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> rdmeasure::Result<()> {
    let cfg = match &cli.command {
        Command::Gc(c) => load(ExperimentKind::Gc, c)?,
        Command::Bvm(c) => load(ExperimentKind::Bvm, c)?,
        Command::Bracketing(c) => load(ExperimentKind::Bracketing, c)?,
        Command::Conditions(c) => load(ExperimentKind::Conditions, c)?,
        Command::LocalEp {
            common,
            bandwidths,
            n_times_h,
            replications,
            grid,
        } => {
            let mut cfg = load(ExperimentKind::LocalEp, common)?;
            if let Some(b) = bandwidths {
                cfg.local.bandwidths = b.clone();
            }
            if let Some(v) = n_times_h {
                cfg.local.n_times_h = *v;
            }
            if let Some(r) = replications {
                cfg.replications = *r;
            }
            if let Some(g) = grid {
                if *g == 0 {
                    return Err(Error::Config("grid needs at least one point".into()));
                }
                let (lo, hi) = cfg.local.window;
                let step = (hi - lo) / *g as f64;
                cfg.local.t_grid = (1..=*g).map(|i| lo + step * i as f64).collect();
            }
            cfg
        }
    };
    let outcome = harness::run(&cfg, None)?;
    match &cfg.output {
        Some(path) => outcome.write(path),
        None => {
            print!("{}", outcome.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::GateRefused(_)) => {
            eprintln!("refused: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
