use clap::{Parser, Subcommand};
use crowdflow_cli::{cmd_converge, cmd_run, cmd_validate};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crowdflow", about = "Macroscopic pedestrian-flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write snapshots, manifest and diagnostics.
    Run {
        /// Scenario config (TOML) or an emitted manifest (JSONL).
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the snapshot stride.
        #[arg(long)]
        stride: Option<usize>,
        /// Force the adaptive time-step policy.
        #[arg(long)]
        adaptive_dt: bool,
    },
    /// Check conservation, positivity, boundedness and confinement on a
    /// shortened run, plus oracle cross-checks where available.
    Validate { scenario: PathBuf },
    /// Grid-refinement study at fixed dt/h; writes convergence.csv.
    Converge {
        scenario: PathBuf,
        /// Comma-separated cells-per-side values, e.g. 16,32,64.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, out, stride, adaptive_dt } => {
            cmd_run(&scenario, &out, stride, adaptive_dt)
        }
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Converge { scenario, levels, out } => cmd_converge(&scenario, &levels, &out),
    };
    ExitCode::from(code as u8)
}
