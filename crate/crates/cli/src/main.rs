use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use flipflop_cli::{run, RunArgs, Subcommand};

#[derive(Parser)]
#[command(name = "sim", version, about = "Circuit-QED flip-flop simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Single trajectory under the configured Set/Reset schedule.
    Flipflop(Common),
    /// Unswitched ensemble: memory-time fit and spontaneous switches.
    Memory {
        #[command(flatten)]
        common: Common,
        /// Fit a CSV with `time_us` and `n_a` columns instead of simulating.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Closed-form memory-time estimates and sweeps.
    Estimate(Common),
    /// Solver self-checks; exits with 4 if any fails.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides ensemble.base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides ensemble.n_traj.
    #[arg(long)]
    traj: Option<usize>,
}

impl Common {
    fn into_args(self, input: Option<PathBuf>) -> RunArgs {
        RunArgs {
            config: self.config,
            out: self.out,
            seed: self.seed,
            traj: self.traj,
            input,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Command::Flipflop(c) => (Subcommand::Flipflop, c.into_args(None)),
        Command::Memory { common, input } => (Subcommand::Memory, common.into_args(input)),
        Command::Estimate(c) => (Subcommand::Estimate, c.into_args(None)),
        Command::Validate(c) => (Subcommand::Validate, c.into_args(None)),
    };
    match run(command, &args) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
