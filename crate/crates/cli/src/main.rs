use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use emv::presets::Preset;
use emv_cli::commands::{self, CommandError};
use emv_cli::config::{load_config, Overrides};
use emv_cli::io::Manifest;

/// Ensembles of entropy-stable solutions of conservation laws and their
/// Young-measure statistics.
///
/// Values are resolved as built-in defaults, then the config file, then
/// flags. A flag given twice keeps its last value.
#[derive(Parser)]
#[command(name = "emv", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset name; overrides `problem.preset`.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Cells per unit length.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Final output time; earlier configured times are kept.
    #[arg(long, global = true)]
    end_time: Option<f64>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one sample.
    Run {
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Solve every sample and write snapshots plus a manifest.
    Ensemble {
        #[command(flatten)]
        common: Common,
    },
    /// Mean, variance and PDF tables of an ensemble directory.
    Stats {
        /// Ensemble directory; defaults to the configured output directory.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Cauchy rates between ensembles, coarse to fine. Without directories
    /// the configured resolution ladder is run first.
    Compare {
        dirs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact solutions of the Burgers presets.
    Oracle {
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(c: &Common) -> Result<Overrides> {
    let preset = match &c.preset {
        Some(p) => Some(
            p.parse::<Preset>()
                .map_err(|e| CommandError::Invalid(format!("--preset: {e}")))?,
        ),
        None => None,
    };
    Ok(Overrides {
        preset,
        samples: c.samples,
        resolution: c.resolution,
        seed: c.seed,
        eps: c.eps,
        end_time: c.end_time,
        output: c.output.clone(),
        threads: c.threads,
    })
}

fn config(c: &Common) -> Result<emv_cli::config::RunConfig> {
    load_config(c.config.as_deref(), &overrides(c)?)
        .map_err(|e| CommandError::Invalid(e.to_string()).into())
}

/// Config for commands that read an ensemble; without a config file or
/// `--preset` the preset recorded in the manifest is used.
fn config_from_dir(c: &Common, dir: &Path) -> Result<emv_cli::config::RunConfig> {
    let mut o = overrides(c)?;
    if c.config.is_none() && o.preset.is_none() {
        let text = std::fs::read_to_string(dir.join("manifest.txt"))
            .map_err(|e| CommandError::Invalid(format!("{}: {e}", dir.display())))?;
        let m = Manifest::parse(&text).map_err(|e| CommandError::Invalid(e.to_string()))?;
        o.preset = Some(
            m.preset
                .parse()
                .map_err(|e| CommandError::Invalid(format!("manifest preset: {e}")))?,
        );
    }
    load_config(c.config.as_deref(), &o).map_err(|e| CommandError::Invalid(e.to_string()).into())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { sample, common } => commands::run(&config(&common)?, sample),
        Command::Ensemble { common } => commands::ensemble(&config(&common)?).map(|_| ()),
        Command::Stats {
            input: Some(input),
            common,
        } => {
            let cfg = config_from_dir(&common, &input)?;
            commands::stats(&cfg, &input, &input.join("stats"))
        }
        Command::Stats {
            input: None,
            common,
        } => {
            let cfg = config(&common)?;
            let input = cfg.output.clone();
            commands::stats(&cfg, &input, &input.join("stats"))
        }
        Command::Compare { dirs, common } => {
            if let Some(first) = dirs.first() {
                let cfg = config_from_dir(&common, first)?;
                commands::compare_dirs(&cfg, &dirs, &cfg.output).map(|_| ())
            } else {
                let cfg = config(&common)?;
                commands::compare_ladder(&cfg, &cfg.output).map(|_| ())
            }
        }
        Command::Oracle { time, common } => {
            let cfg = config(&common)?;
            let t = if time > 0.0 {
                time
            } else {
                *cfg.times.last().unwrap()
            };
            commands::oracle(cfg.preset, cfg.resolution, t, cfg.seed, &cfg.output)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let typed = e.downcast_ref::<CommandError>();
            let code = typed.map_or(1, CommandError::exit_code);
            let line = serde_json::json!({
                "error": format!("{e:#}"),
                "kind": typed.map_or("validation", CommandError::kind),
                "sample": typed.and_then(CommandError::sample),
                "exit_code": code,
            });
            eprintln!("{line}");
            ExitCode::from(code as u8)
        }
    }
}
