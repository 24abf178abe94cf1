use std::path::PathBuf;
use std::process::ExitCode;

use analog_verify::lattice::PairMode;
use analog_verify::protocols::ProtocolKind;
use anyhow::Result;
use averify::commands::{self, Exhausted};
use averify::config::ExperimentConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "averify", version, about = "Verification protocols for analog quantum simulators")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification protocol and archive its decay curve.
    Verify {
        #[command(flatten)]
        common: Common,
        /// time_reversal, multi_basis or randomized_analog (tr, mb, rav).
        #[arg(long)]
        protocol: Option<ProtocolKind>,
        /// Replay a sequence file written by `compile`.
        #[arg(long)]
        sequence: Option<PathBuf>,
    },
    /// Ideal versus noisy model dynamics and their fidelity.
    Dynamics {
        #[command(flatten)]
        common: Common,
    },
    /// Compile an approximate inverse for one random forward sequence.
    Compile {
        #[command(flatten)]
        common: Common,
    },
    /// Count edge pairs of a rectangular lattice.
    Subsets {
        #[arg(long, default_value_t = 6)]
        rows: usize,
        #[arg(long, default_value_t = 6)]
        cols: usize,
        /// ordered_distinct, unordered_distinct or unordered_disjoint.
        #[arg(long, default_value = "ordered_distinct")]
        mode: PairMode,
        /// Write every pair to this JSON file.
        #[arg(long)]
        list: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Verify { common, protocol, sequence } => {
            let dir = commands::verify(&common.load()?, protocol, sequence.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Dynamics { common } => println!("{}", commands::dynamics(&common.load()?)?.display()),
        Command::Compile { common } => println!("{}", commands::compile(&common.load()?)?.display()),
        Command::Subsets { rows, cols, mode, list } => {
            for line in commands::subsets(rows, cols, mode, list.as_deref())? {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Exhausted>() {
                Some(_) => ExitCode::from(2),
                None => ExitCode::FAILURE,
            }
        }
    }
}
