use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bondint_cli::{resolve, run, Command, Overrides};

#[derive(Parser)]
#[command(name = "bondint", version, about = "Bond-market stochastic integration experiments")]
struct Cli {
    /// INI-style configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    scenarios: Option<usize>,
    /// Output root; each run writes into its own subdirectory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write only JSON files and print the manifest to stdout
    #[arg(long, global = true)]
    json_only: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Approximating integrals converging to A_t = t
    Example21,
    /// Perturbed family where the limit integral vanishes
    Example22,
    /// Finite-bond primal values against the dual bound
    Utility,
    /// Claim prices and regression hedges
    Superrep,
    /// Dirac approximation of measure-valued strategies
    Measure,
    /// Continuity profile in the maturity variable
    Continuity,
    /// Simulate a family and write it to disk
    Simulate,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Example21 => Command::Example21,
            Sub::Example22 => Command::Example22,
            Sub::Utility => Command::Utility,
            Sub::Superrep => Command::Superrep,
            Sub::Measure => Command::Measure,
            Sub::Continuity => Command::Continuity,
            Sub::Simulate => Command::Simulate,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let ov = Overrides { seed: cli.seed, scenarios: cli.scenarios, out: cli.out.clone(), json_only: cli.json_only };
    let result = resolve(cli.config.as_deref(), &ov).and_then(|cfg| run(cli.command.into(), &cfg, cli.json_only));
    match result {
        Ok(summary) => {
            if cli.json_only {
                println!("{}", serde_json::to_string_pretty(&summary.manifest).expect("json"));
            } else {
                for (name, ok) in &summary.verdicts.checks {
                    println!("{} {name}", if *ok { "PASS" } else { "FAIL" });
                }
                println!("outputs in {}", summary.dir.display());
            }
            if summary.verdicts.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
