use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use calorimeter::experiment::{apply_override, emit_preset, list_presets, run_experiment, write_artifacts, ExperimentConfig};
use calorimeter::{Error, Result};

#[derive(Parser)]
#[command(name = "calorimeter", version, about = "Measure the entropy of exchange economies by calorimetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config or a bundled preset.
    Run {
        /// Path to the config file.
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Use a bundled preset instead of a file.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the grid sweep.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Where to write artifacts; defaults to `<output root>/<config name>`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Default parent directory for artifacts.
        #[arg(long, env = "CALORIMETER_OUTPUT_ROOT", default_value = "runs")]
        output_root: PathBuf,
        /// `path.to.key=value`, the value parsed as JSON when possible.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Inspect the bundled presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's config as JSON.
    Emit { name: String },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        4
    } else if e.is_config() {
        2
    } else {
        3
    }
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> Result<Value> {
    let text = match (config, preset) {
        (Some(path), _) => fs::read_to_string(path)?,
        (None, Some(name)) => emit_preset(&name)?,
        (None, None) => return Err(Error::Config(vec!["no config given".into()])),
    };
    Ok(serde_json::from_str(&text)?)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preset { action: PresetAction::List } => {
            for (name, description) in list_presets() {
                println!("{name:<26} {description}");
            }
        }
        Command::Preset { action: PresetAction::Emit { name } } => print!("{}", emit_preset(&name)?),
        Command::Run { config, preset, seed, parallelism, output_dir, output_root, overrides } => {
            let mut doc = load(config, preset)?;
            for o in &overrides {
                apply_override(&mut doc, o)?;
            }
            let mut config: ExperimentConfig = serde_json::from_value(doc)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(p) = parallelism {
                config.parallelism = p;
            }
            let dir = output_dir
                .or_else(|| config.output_dir.clone())
                .unwrap_or_else(|| output_root.join(if config.name.is_empty() { "run" } else { &config.name }));
            let outcome = run_experiment(&config)?;
            write_artifacts(&outcome, &dir)?;
            let s = &outcome.stats;
            println!("nodes            {}", s.n_nodes);
            println!("goodness_of_fit  {:.3e}", s.goodness_of_fit);
            if let Some(a) = s.goodness_of_agreement {
                println!("agreement        {a:.3e}");
            }
            println!("concave          {}", s.concavity.pass);
            println!("flagged nodes    {}", s.flagged_nodes);
            println!("wall clock       {:.1}s", outcome.manifest.wall_clock_seconds);
            println!("artifacts        {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
