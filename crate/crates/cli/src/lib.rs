//! Command-line front end: configuration files, presets and the `snr`,
//! `simulate`, `sweep` and `verify` subcommands.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{to_json, Output};
use crate::config::{parse_grid, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "su11", version, about = "Joint quadrature measurement with an SU(1,1) interferometer")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed; overrides `sim.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Built-in configuration: fig2, fig3, fig4 or fig5.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic SNRs, closed forms and enhancement ratios.
    Snr,
    /// Monte-Carlo photocurrents and their spectra.
    Simulate,
    /// Analytic SNRs over a grid of one parameter.
    Sweep {
        /// Dotted config path or alias (G1, G2, eta_internal, phi, ...).
        #[arg(long)]
        param: String,
        /// `start:stop:count` or a comma-separated list; empty for no rows.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        grid: String,
    },
    /// Invariant and acceptance checks.
    Verify {
        /// Also write verify.json to the output directory.
        #[arg(long)]
        json: bool,
    },
}

impl Cli {
    fn load_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::load_preset(name)?,
            (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
        };
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        Ok(cfg)
    }

    fn output(&self, cfg: &RunConfig) -> Output {
        Output {
            dir: self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory)),
            formats: cfg.output.formats.clone(),
        }
    }
}

/// Runs one invocation and returns its output for stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Snr => {
            let cfg = cli.load_config()?;
            let res = cfg.resolve()?;
            let text = to_json(&commands::snr(&res)?);
            if cli.out.is_some() {
                cli.output(&cfg).write("snr.json", &text)?;
            }
            Ok(text)
        }
        Command::Simulate => {
            let cfg = cli.load_config()?;
            let res = cfg.resolve()?;
            let report = commands::simulate(&res, &cli.output(&cfg))?;
            Ok(to_json(&report))
        }
        Command::Sweep { param, grid } => {
            let cfg = cli.load_config()?;
            let grid = parse_grid(grid)?;
            let (csv, meta) = commands::sweep(&cfg, param, &grid)?;
            let out = cli.output(&cfg);
            out.write("sweep.csv", &csv)?;
            out.write("sweep.meta.json", &to_json(&meta))?;
            Ok(csv)
        }
        Command::Verify { json } => {
            let results = commands::verify(cli.seed);
            let mut text = String::new();
            for r in &results {
                text.push_str(&r.line());
                text.push('\n');
            }
            if *json {
                let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("su11-out"));
                let out = Output { dir, formats: Vec::new() };
                out.write("verify.json", &to_json(&results))?;
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                print!("{text}");
                return Err(CliError::Verification(format!("{failed} of {} checks failed", results.len())));
            }
            Ok(text)
        }
    }
}
