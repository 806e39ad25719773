use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinwave::cli::{cmd_ring_predict, cmd_riemann, cmd_simulate, CommandOutput};
use kinwave::config::{parse_config_with, ScenarioConfig};
use kinwave::verify::cmd_verify;
use kinwave::Error;

#[derive(Parser)]
#[command(name = "kinwave", version, about = "Supply-demand kinematic wave traffic toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Scenario {
    /// Scenario file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV and report files
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Accept CFL numbers between 0.95 and 1
    #[arg(long)]
    override_cfl: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one junction Riemann problem
    Riemann(Scenario),
    /// Run the Godunov scheme
    Simulate(Scenario),
    /// Predict the stationary ring profile
    RingPredict(Scenario),
    /// Run the seeded property suite
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

fn load(s: &Scenario) -> kinwave::Result<ScenarioConfig> {
    let text = fs::read_to_string(&s.config).map_err(|e| Error::io(&s.config, e))?;
    parse_config_with(&text, s.override_cfl)
}

fn scenario(s: &Scenario, f: fn(&ScenarioConfig, &std::path::Path) -> kinwave::Result<CommandOutput>) -> ExitCode {
    let out = load(s).and_then(|cfg| f(&cfg, &s.out));
    match out {
        Ok(o) => {
            print!("{}", o.report);
            eprintln!("wrote {} and {}", o.csv_path.display(), o.report_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Riemann(s) => scenario(s, cmd_riemann),
        Command::Simulate(s) => scenario(s, cmd_simulate),
        Command::RingPredict(s) => scenario(s, cmd_ring_predict),
        Command::Verify { seed, trials } => {
            let summary = cmd_verify(*seed, *trials);
            println!("{summary}");
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
