//! Reproducible experiment runs: configuration, subcommands and run outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use config::ExperimentConfig;
use error::CliError;
use output::{manifest, ManifestInput, RunOutput, Verdicts, MANIFEST, VERDICTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Example21,
    Example22,
    Utility,
    Superrep,
    Measure,
    Continuity,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Example21 => "example21",
            Command::Example22 => "example22",
            Command::Utility => "utility",
            Command::Superrep => "superrep",
            Command::Measure => "measure",
            Command::Continuity => "continuity",
            Command::Simulate => "simulate",
        }
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scenarios: Option<usize>,
    pub out: Option<PathBuf>,
    pub json_only: bool,
}

pub struct RunSummary {
    pub dir: PathBuf,
    pub verdicts: Verdicts,
    pub manifest: serde_json::Value,
}

pub fn resolve(config: Option<&Path>, ov: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = ov.seed {
        cfg.scenarios.seed = s;
    }
    if let Some(n) = ov.scenarios {
        cfg.scenarios.count = n;
    }
    if let Some(o) = &ov.out {
        cfg.output.directory = o.display().to_string();
    }
    if ov.json_only {
        cfg.output.formats = vec!["json".into()];
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(command: Command, cfg: &ExperimentConfig, json_only: bool) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let root = PathBuf::from(&cfg.output.directory);
    let (mut out, hash) = RunOutput::create(&root, command.name(), cfg, json_only)?;
    log::info!("{}: {} scenarios, seed {}, writing to {}", command.name(), cfg.scenarios.count, cfg.scenarios.seed, out.dir().display());
    let verdicts = match command {
        Command::Example21 => commands::example21(cfg, &mut out)?,
        Command::Example22 => commands::example22(cfg, &mut out)?,
        Command::Utility => commands::utility(cfg, &mut out)?,
        Command::Superrep => commands::superrep(cfg, &mut out)?,
        Command::Measure => commands::measure(cfg, &mut out)?,
        Command::Continuity => commands::continuity(cfg, &mut out)?,
        Command::Simulate => commands::simulate(cfg, &mut out)?,
    };
    for (name, ok) in &verdicts.checks {
        log::debug!("{name}: {ok}");
    }
    out.json(VERDICTS, &verdicts.to_json(command.name()))?;
    let m = manifest(
        &ManifestInput {
            command: command.name(),
            config_hash: &hash,
            seed: cfg.scenarios.seed,
            scenarios: cfg.scenarios.count,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        out.files(),
        &verdicts,
    );
    out.json(MANIFEST, &m)?;
    log::info!("{} finished in {:.1}s", command.name(), start.elapsed().as_secs_f64());
    Ok(RunSummary { dir: out.dir().to_path_buf(), verdicts, manifest: m })
}
