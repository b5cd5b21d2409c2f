//! `krs`: pin curvature constants, solve, verify and probe stability of
//! cohomogeneity-one Kähler–Ricci solitons.
//!
//! Exit codes: 0 ok, 1 config error, 2 oracle failure, 3 no soliton found,
//! 4 identity failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Common;

#[derive(Parser)]
#[command(name = "krs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; later stages read earlier results from here.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl CommonArgs {
    fn common(&self) -> Common {
        Common {
            config: self.config.clone(),
            out: self.out.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pin the curvature constants against the brute-force oracle.
    PinConstants {
        #[command(flatten)]
        common: CommonArgs,
        /// Use one unextrapolated finite-difference level at this step.
        #[arg(long, value_name = "H")]
        fd_step: Option<f64>,
    },
    /// Solve for the soliton and write profiles and report.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Constants file; defaults to `<out>/constants.json`.
        #[arg(long, value_name = "PATH")]
        constants: Option<PathBuf>,
    },
    /// Recompute all identities on a solved soliton.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the second-variation functional over a profile family.
    Stability {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Randomized checks of the pointwise matrix identities.
    FuzzAlgebra {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::PinConstants { common, fd_step } => commands::pin(&common.common(), *fd_step),
        Command::Solve { common, constants } => commands::solve(&common.common(), constants.as_deref()),
        Command::Verify { common } => commands::verify(&common.common()),
        Command::Stability { common } => commands::stability(&common.common()),
        Command::FuzzAlgebra { common, trials } => commands::fuzz_algebra(&common.common(), *trials),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
