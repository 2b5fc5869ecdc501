use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use varcast_cli::config::{ExperimentConfig, Overrides};
use varcast_cli::manifest::RunManifest;
use varcast_cli::stages;
use varcast_core::error::Error;

/// Volatility modelling and large-loss prediction pipeline.
#[derive(Parser)]
#[command(name = "varcast", version, about)]
struct Cli {
    /// Path to the experiment configuration (TOML).
    #[arg(long, global = true, default_value = "varcast.toml")]
    config: PathBuf,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Quantile levels override (comma-separated, e.g. `0.01,0.001`).
    #[arg(long, global = true, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
    /// Kernel exponent sign for the dynamic combination (+1 or -1).
    #[arg(long, global = true, allow_hyphen_values = true)]
    kernel_sign: Option<f64>,
    /// Validate the configuration and write the manifest without running.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load ticks, resample to bars, aggregate sectors, write summary stats.
    Ingest,
    /// Label in-sample headlines and build the scored word dictionary.
    BuildDict,
    /// Emit the POS/NEG/HIGH/NUMB/LAGVOL covariate series per sector.
    Regressors,
    /// Fit the model grid in-sample and write the coefficient table.
    Fit,
    /// The full experiment: rolling VaR, backtests, MCS, combination.
    Run,
    /// Regenerate analysis tables from panel files already on disk.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out.clone(),
        taus: cli.tau.clone(),
        kernel_sign: cli.kernel_sign,
    };
    let config = match ExperimentConfig::load(&cli.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&config.out_dir) {
        eprintln!("cannot create output directory: {e}");
        return ExitCode::from(1);
    }
    let mut manifest = RunManifest::new(config.config_hash(), config.seed);

    let result = if cli.dry_run {
        Ok(())
    } else {
        execute(&cli.command, &config, &mut manifest)
    };
    match result {
        Ok(()) => match manifest.write(&config.out_dir) {
            Ok(path) => {
                println!("manifest written to {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("manifest write failed: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            // record partial outputs before aborting
            let _ = manifest.write(&config.out_dir);
            eprintln!("error: {e}");
            match e {
                Error::Parse { .. } | Error::InvalidInput(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn execute(
    command: &Command,
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> varcast_core::error::Result<()> {
    match command {
        Command::Ingest => {
            stages::run_ingest(config, manifest)?;
            Ok(())
        }
        Command::BuildDict => {
            let ingest = stages::run_ingest(config, manifest)?;
            stages::run_build_dict(config, &ingest.sectors, manifest)?;
            Ok(())
        }
        Command::Regressors => {
            let ingest = stages::run_ingest(config, manifest)?;
            let dictionary = stages::run_build_dict(config, &ingest.sectors, manifest)?;
            stages::run_regressors(config, &ingest.sectors, &dictionary, manifest)?;
            Ok(())
        }
        Command::Fit => {
            let ingest = stages::run_ingest(config, manifest)?;
            let grid = config.model_grid()?;
            let needs_news = grid
                .iter()
                .any(|s| s.regressors != varcast_core::model::RegressorKind::None);
            let regressors = if needs_news {
                let dictionary = stages::run_build_dict(config, &ingest.sectors, manifest)?;
                stages::run_regressors(config, &ingest.sectors, &dictionary, manifest)?
            } else {
                Default::default()
            };
            stages::run_fit(config, &ingest.sectors, &regressors, manifest)?;
            Ok(())
        }
        Command::Run => stages::run_full(config, manifest),
        Command::Report => stages::run_report(config, manifest),
    }
}
