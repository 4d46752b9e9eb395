use std::path::PathBuf;
use std::process::ExitCode;

use chemobound::commands::{run, Command, Options};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chemobound", version, about = "Blow-up time lower bounds, simulation and audits for a chemotaxis system")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check admissibility of the exponents; exit 0 iff admissible
    Validate(Common),
    /// Assemble the constants and compute the lower bound
    Bound(Common),
    /// Run the PDE and write energy, snapshot and verdict files
    Simulate(Common),
    /// Simulate and audit the differential inequalities
    Verify(Common),
    /// Bound (and optionally simulate) over the configured m1 list
    Sweep {
        #[command(flatten)]
        common: Common,
        /// hold A, B, C, D at the base m1 and vary only f(eta, r(m1))
        #[arg(long)]
        frozen_constants: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// quadrature tolerance (residual tolerance for `verify`)
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    no_plots: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common, frozen) = match cli.command {
        Sub::Validate(c) => (Command::Validate, c, false),
        Sub::Bound(c) => (Command::Bound, c, false),
        Sub::Simulate(c) => (Command::Simulate, c, false),
        Sub::Verify(c) => (Command::Verify, c, false),
        Sub::Sweep { common, frozen_constants } => (Command::Sweep, common, frozen_constants),
    };
    let opts = Options { out: common.out, tol: common.tol, frozen_constants: frozen, no_plots: common.no_plots };
    match run(command, &common.config, &opts) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
