//! Command-line front end for the charging-demand pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input-data error,
//! 4 external-service error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chargesim_cli::config::{ScenarioChoice, ScenarioConfig};
use chargesim_cli::pipeline::Pipeline;

#[derive(Parser)]
#[command(name = "chargesim", version, about = "Scenario-driven EV charging demand and PV complementarity simulator")]
struct Cli {
    /// Scenario configuration file (TOML). Defaults encode the bundled
    /// reference scenario, so this is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Monte Carlo runs per scenario (overrides the config).
    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Charging scenario to simulate.
    #[arg(long, global = true, value_enum, default_value = "all")]
    scenario: ScenarioChoice,

    /// Worker thread cap; 0 uses every core (overrides the config).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the traffic-zone grid and aggregate geodata.
    Zones,
    /// Distance matrix and gravity trip distribution.
    Mobility,
    /// Daily charging energy per zone and location.
    Demand,
    /// Monte Carlo load profiles, charging points, peaks.
    Profiles,
    /// Photovoltaic production per kWp.
    Pv,
    /// EV-PV complementarity indicators.
    Indicators,
    /// Summary report with grid context.
    Report,
    /// All stages in order.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<chargesim_cli::config::ConfigError>().is_some() {
        return 2;
    }
    if let Some(core_err) = err.downcast_ref::<chargesim_core::Error>() {
        return match core_err {
            chargesim_core::Error::Config(_) => 2,
            chargesim_core::Error::Routing(_) => 4,
            _ => 3,
        };
    }
    3
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    if let Some(runs) = cli.runs {
        config.simulation.runs = runs;
    }
    if let Some(threads) = cli.threads {
        config.simulation.threads = threads;
    }
    config.validate()?;
    if config.simulation.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.simulation.threads)
            .build_global()
            .ok();
    }

    let mut pipeline = Pipeline::new(config, cli.out_dir, cli.scenario)?;
    match cli.command {
        Command::Zones => {
            pipeline.run_zones()?;
        }
        Command::Mobility => {
            pipeline.run_mobility()?;
        }
        Command::Demand => pipeline.run_demand()?,
        Command::Profiles => pipeline.run_profiles()?,
        Command::Pv => {
            pipeline.run_pv()?;
        }
        Command::Indicators => pipeline.run_indicators()?,
        Command::Report => pipeline.run_report()?,
        Command::Run => pipeline.run_all()?,
    }
    Ok(())
}
