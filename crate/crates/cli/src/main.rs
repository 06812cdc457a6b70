//! `gfmsim`: run, compare, sweep and tune wind-turbine control modes from the
//! command line.
//!
//! Exit codes: 0 success, 2 configuration error (nothing written), 3 a run
//! diverged or lost stability (data still written).

mod commands;
mod error;
mod output;
mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfmsim::control::ControllerMode;

use commands::Context;

#[derive(Parser)]
#[command(name = "gfmsim", version, about = "Type-4 wind turbine grid-forming control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration (schema version 1)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, env = "GFMSIM_OUT", default_value = "gfmsim-out")]
    out: PathBuf,
    /// Solver step in seconds, overriding the configuration
    #[arg(long)]
    dt: Option<f64>,
    /// Skip SVG plots
    #[arg(long)]
    no_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario with one control mode
    Run {
        scenario: String,
        #[arg(long)]
        mode: ControllerMode,
        /// Short-circuit ratio at the point of connection
        #[arg(long, default_value_t = 10.0)]
        scr: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one scenario with several modes and compare them
    Compare {
        scenario: String,
        /// Mode to include; repeat for several (default: every supported mode)
        #[arg(long = "mode")]
        modes: Vec<ControllerMode>,
        /// Include every mode the scenario supports
        #[arg(long, conflicts_with = "modes")]
        all: bool,
        #[arg(long, default_value_t = 10.0)]
        scr: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Tune virtual-machine gains: Monte Carlo sensitivity, then box SQP
    Tune {
        mode: ControllerMode,
        /// Number of Monte Carlo samples
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        scr: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat a scenario over several short-circuit ratios
    Sweep {
        scenario: String,
        #[arg(long = "mode")]
        modes: Vec<ControllerMode>,
        /// Comma-separated short-circuit ratios
        #[arg(long, value_delimiter = ',', default_values_t = [2.5, 5.0, 10.0])]
        scr: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// List the built-in scenarios
    ListScenarios,
}

fn context(common: &Common) -> Result<Context, error::CliError> {
    Context::load(
        common.config.as_deref(),
        common.dt,
        common.out.clone(),
        !common.no_plots,
    )
}

fn dispatch(command: Command) -> Result<u8, error::CliError> {
    match command {
        Command::Run {
            scenario,
            mode,
            scr,
            common,
        } => commands::cmd_run(&context(&common)?, &scenario, scr, mode),
        Command::Compare {
            scenario,
            modes,
            all: _,
            scr,
            common,
        } => commands::cmd_compare(&context(&common)?, &scenario, scr, &modes),
        Command::Tune {
            mode,
            n,
            seed,
            scr,
            common,
        } => commands::cmd_tune(&context(&common)?, mode, scr, n, seed),
        Command::Sweep {
            scenario,
            modes,
            scr,
            common,
        } => commands::cmd_sweep(&context(&common)?, &scenario, &scr, &modes),
        Command::ListScenarios => Ok(commands::cmd_list_scenarios()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
