use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpgd::experiments::{self, Experiment, ExperimentConfig, ExperimentKind};
use dpgd::{Error, Result};

#[derive(Parser)]
#[command(name = "dpgd", version, about = "Private one-pass gradient descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated risk trajectories against the deterministic-equivalent ODE.
    OdeVsSim(Flags),
    /// Final risk over a grid of clipping constants and step-size scales.
    Heatmap(Flags),
    /// Tuned polynomial and harmonic schedules across sample sizes.
    SchedulesCompare(Flags),
    /// Log-log slopes of the tuned final risk against the predicted exponents.
    ScalingLaw(Flags),
    /// Per-step noise levels, accounted privacy and (epsilon, delta) conversions.
    PrivacyReport(Flags),
    /// DP-GD on a CSV dataset.
    RealData(Flags),
    /// List the built-in presets.
    Presets,
}

#[derive(Args, Default)]
struct Flags {
    /// TOML config file, or a config.json written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset (see `dpgd presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run even if the compute estimate exceeds the budget.
    #[arg(long)]
    force: bool,
    /// Dimension (single value for ode-vs-sim).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV dataset (real-data).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column of the dataset (real-data).
    #[arg(long)]
    label_column: Option<String>,
    /// Train, normalization and validation fractions, e.g. `0.6,0.2,0.2` (real-data).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    split: Option<Vec<f64>>,
}

fn not_applicable(flag: &str, kind: ExperimentKind) -> Error {
    Error::Config(format!("--{flag} does not apply to {}", kind.name()))
}

fn resolve(kind: ExperimentKind, flags: &Flags) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config = match (&flags.config, &flags.preset) {
        (Some(_), Some(_)) => return Err(Error::Config("use either --config or --preset, not both".into())),
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => experiments::preset(name)?,
        (None, None) => ExperimentConfig::new(Experiment::default_for(kind)),
    };
    if config.kind() != kind {
        return Err(Error::Config(format!(
            "configuration is for {} but the subcommand is {}",
            config.kind().name(),
            kind.name()
        )));
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(d) = flags.d {
        match &mut config.experiment {
            Experiment::OdeVsSim(c) => c.dims = vec![d],
            Experiment::Heatmap(c) => c.d = d,
            Experiment::SchedulesCompare(c) => c.d = d,
            Experiment::ScalingLaw(c) => c.d = d,
            _ => return Err(not_applicable("d", kind)),
        }
    }
    if let Some(t) = flags.trials {
        match &mut config.experiment {
            Experiment::OdeVsSim(c) => c.trials = t,
            Experiment::Heatmap(c) => c.trials = t,
            Experiment::RealData(c) => c.trials = t,
            _ => return Err(not_applicable("trials", kind)),
        }
    }
    let data_flags = flags.data.is_some() || flags.label_column.is_some() || flags.split.is_some();
    match &mut config.experiment {
        Experiment::RealData(c) => {
            if let Some(p) = &flags.data {
                c.data = Some(p.clone());
            }
            if let Some(l) = &flags.label_column {
                c.label_column = l.clone();
            }
            if let Some(s) = &flags.split {
                c.split = [s[0], s[1], s[2]];
            }
        }
        _ if data_flags => return Err(not_applicable("data/--label-column/--split", kind)),
        _ => {}
    }
    let name = flags.preset.clone().unwrap_or_else(|| kind.name().to_string());
    let out = flags
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(name));
    config.out = Some(out.clone());
    Ok((config, out))
}

fn execute(kind: ExperimentKind, flags: &Flags) -> Result<()> {
    let (config, out) = resolve(kind, flags)?;
    log::info!("config hash {}", config.hash());
    let result = experiments::run(&config, &out, flags.force)?;
    print!("{}", result.summary);
    println!("wrote {} files to {}", result.files.len(), result.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::OdeVsSim(f) => (ExperimentKind::OdeVsSim, f),
        Command::Heatmap(f) => (ExperimentKind::Heatmap, f),
        Command::SchedulesCompare(f) => (ExperimentKind::SchedulesCompare, f),
        Command::ScalingLaw(f) => (ExperimentKind::ScalingLaw, f),
        Command::PrivacyReport(f) => (ExperimentKind::PrivacyReport, f),
        Command::RealData(f) => (ExperimentKind::RealData, f),
        Command::Presets => {
            for name in experiments::PRESETS {
                let kind = experiments::preset(name).map(|c| c.kind().name()).unwrap_or("?");
                println!("{name:<16} {kind}");
            }
            return ExitCode::SUCCESS;
        }
    };
    match execute(kind, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
