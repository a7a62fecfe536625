use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use fedfw_core::harness::{self, presets, RunConfig};

#[derive(Parser)]
#[command(name = "fedfw", version, about = "Federated Frank-Wolfe experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write metrics.csv, final_model.bin and the resolved config.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory (default: runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check invariants after every round and abort on the first violation.
        #[arg(long)]
        verify: bool,
    },
    /// Run every cell of the config's [sweep] grid and write summary.csv.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite against a configuration and print a report.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's configuration.
    Show {
        name: String,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Path to a TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a built-in preset.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct Overrides {
    /// Overrides the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

impl Source {
    fn load(&self) -> Result<(RunConfig, String)> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                let cfg = RunConfig::from_file(path)
                    .with_context(|| format!("loading {}", path.display()))?;
                let name = path
                    .file_stem()
                    .map_or("run".into(), |s| s.to_string_lossy().into_owned());
                Ok((cfg, name))
            }
            (None, Some(name)) => Ok((presets::load(name)?, name.clone())),
            (None, None) => bail!("one of --config or --preset is required"),
        }
    }
}

fn load(source: &Source, overrides: &Overrides) -> Result<(RunConfig, String)> {
    let (mut cfg, name) = source.load()?;
    if let Some(seed) = overrides.seed {
        cfg.run.seed = seed;
    }
    if let Some(w) = overrides.workers {
        cfg.run.workers = w;
    }
    cfg.validate()?;
    Ok((cfg, name))
}

fn out_dir(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| Path::new("runs").join(name))
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            source,
            overrides,
            out,
            verify,
        } => {
            let (mut cfg, name) = load(&source, &overrides)?;
            cfg.run.verify |= verify;
            let dir = out_dir(out, &name);
            let output = harness::run_to_dir(&cfg, &dir)?;
            let last = output.last();
            println!(
                "{} rounds: F(x_bar) = {:.6e}, fw_gap = {:.3e}, consensus = {:.3e} -> {}",
                cfg.run.rounds,
                last.metrics.objective,
                last.metrics.fw_gap,
                last.metrics.consensus_distance,
                dir.display()
            );
            Ok(true)
        }
        Command::Sweep {
            source,
            overrides,
            out,
        } => {
            let (cfg, name) = load(&source, &overrides)?;
            let dir = out_dir(out, &name);
            let outcomes = harness::sweep(&cfg, Some(&dir))?;
            let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
            println!(
                "{} cells, {failed} failed -> {}",
                outcomes.len(),
                dir.join("summary.csv").display()
            );
            Ok(failed == 0)
        }
        Command::Verify { source, overrides } => {
            let (cfg, name) = load(&source, &overrides)?;
            info!("verifying {name}");
            let report = harness::verify(&cfg)?;
            print!("{report}");
            Ok(report.passed())
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for p in presets::PRESETS {
                println!("{:<16} {}", p.name, p.summary);
            }
            Ok(true)
        }
        Command::Presets {
            action: PresetAction::Show { name },
        } => {
            print!("{}", presets::find(&name)?.toml);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
