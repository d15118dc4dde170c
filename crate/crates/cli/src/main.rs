use clap::{Parser, Subcommand};
use nqs_cli::commands;
use nqs_cli::config::{ExperimentConfig, RdmModeCfg};
use nqs_cli::{CliError, CliResult};
use std::path::PathBuf;

/// Train a bipartite spin network on spin-chain ground states and
/// diagnose its learning through OTOC invariants and the I-eta plane.
#[derive(Parser)]
#[command(name = "nqs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the hidden-node density p/n.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the spectrum evaluation mode.
    #[arg(long, value_enum)]
    rdm_mode: Option<RdmModeCfg>,
}

#[derive(Subcommand)]
enum Command {
    /// Train networks on the configured driver and log the runs.
    Train {
        #[command(flatten)]
        common: Common,
        /// Pair "k,m" (1-based) tracked in the invariant profile.
        #[arg(long, default_value = "1,1", value_parser = parse_pair)]
        pair: (usize, usize),
    },
    /// Sweep the field-to-coupling ratio and aggregate I-eta statistics.
    #[command(name = "scan-g")]
    ScanG {
        #[command(flatten)]
        common: Common,
    },
    /// I-eta scan of a checkpointed network plus bound curves.
    Ieta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// OTOC trace and invariants of one pair of a checkpointed network.
    Otoc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Pair "k,m" (1-based).
        #[arg(long, default_value = "1,1", value_parser = parse_pair)]
        pair: (usize, usize),
    },
    /// Exact central-cut entanglement entropy across the size sweep.
    Entropy {
        #[command(flatten)]
        common: Common,
        /// Also write the ground-state amplitude vectors.
        #[arg(long)]
        dump_states: bool,
    },
    /// Largest Fisher-matrix eigenvalue of converged runs across the sweep.
    Fisher {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (k, m) = s.split_once(',').ok_or("expected \"k,m\"")?;
    let k: usize = k.trim().parse().map_err(|e| format!("{e}"))?;
    let m: usize = m.trim().parse().map_err(|e| format!("{e}"))?;
    if k == 0 || m == 0 {
        return Err("pair indices are 1-based".into());
    }
    Ok((k - 1, m - 1))
}

fn load(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(alpha) = common.alpha {
        cfg.alpha = alpha;
        cfg.validate()?;
    }
    if let Some(mode) = common.rdm_mode {
        cfg.rdm_mode = mode;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<PathBuf> {
    match &cli.command {
        Command::Train { common, pair } => {
            let cfg = load(common)?;
            let x = &cfg;
            if pair.0 >= x.driver.n || pair.1 >= x.hidden_units() {
                return Err(CliError::Config(format!(
                    "profile pair ({},{}) outside the {}x{} register",
                    pair.0 + 1,
                    pair.1 + 1,
                    x.driver.n,
                    x.hidden_units()
                )));
            }
            commands::cmd_train(&cfg, *pair)
        }
        Command::ScanG { common } => commands::cmd_scan_g(&load(common)?),
        Command::Ieta { common, checkpoint } => commands::cmd_ieta(&load(common)?, checkpoint),
        Command::Otoc { common, checkpoint, pair } => {
            commands::cmd_otoc(&load(common)?, checkpoint, *pair)
        }
        Command::Entropy { common, dump_states } => {
            commands::cmd_entropy(&load(common)?, *dump_states)
        }
        Command::Fisher { common } => commands::cmd_fisher(&load(common)?),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
