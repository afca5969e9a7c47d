use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use toneprobe::Parallelism;
use toneprobe_cli::{exit, fixture, Overrides, Pipeline, RunConfig, RunOptions, StageError};

#[derive(Parser, Debug)]
#[command(name = "toneprobe", version, about = "Layer-wise tone and consonant probing of speech encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Never download models, whatever their locators allow.
    #[arg(long, global = true)]
    offline: bool,

    /// Print the planned cells and extraction passes, then exit.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Probe workers; 0 uses every available processor.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Deterministic utterance subsample in (0, 1].
    #[arg(long, global = true, value_name = "F")]
    subsample: Option<f64>,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Parse corpora into syllable tables and persist the splits.
    Ingest,
    /// Cache encoder activations for every checkpoint in use.
    Extract,
    /// Train the probes of every experiment.
    Probe,
    /// Merge probe results into the report, deltas, plots and checks.
    Report,
    /// All stages in order.
    Run,
    /// Write the bundled mini corpus and a config for it into --out.
    Fixture,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    ExitCode::from(run(&cli) as u8)
}

fn run(cli: &Cli) -> i32 {
    if cli.command == Command::Fixture {
        let Some(dir) = &cli.out else {
            error!("fixture needs --out DIR");
            return exit::INVALID_CONFIG;
        };
        return match fixture::write_fixture(dir, cli.seed.unwrap_or(2024)) {
            Ok(path) => {
                println!("{}", path.display());
                exit::SUCCESS
            }
            Err(e) => {
                error!("{e}");
                exit::RUNTIME_FAILURE
            }
        };
    }

    let Some(path) = &cli.config else {
        error!("--config PATH is required");
        return exit::INVALID_CONFIG;
    };
    let overrides = Overrides {
        seed: cli.seed,
        subsample_fraction: cli.subsample,
        output_dir: cli.out.clone(),
        probe_workers: cli.workers,
    };
    let config = match RunConfig::load(path, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return exit::INVALID_CONFIG;
        }
    };
    let opts = RunOptions {
        offline: cli.offline,
        probe_par: Parallelism::with_workers(config.probe_workers),
    };
    let pipeline = Pipeline::new(config, opts);

    if cli.dry_run {
        return match pipeline.plans() {
            Ok(plans) => {
                println!("config hash {}", pipeline.hash);
                for p in &plans {
                    println!(
                        "{}: {} cells ({} model, {} baseline), {} extraction passes",
                        p.experiment,
                        p.probes(),
                        p.model_probes,
                        p.baseline_probes,
                        p.extraction_passes
                    );
                }
                println!(
                    "total: {} cells, {} extraction passes",
                    toneprobe::experiments::cell_count(&plans),
                    plans.iter().map(|p| p.extraction_passes).sum::<usize>()
                );
                exit::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                exit::INVALID_CONFIG
            }
        };
    }

    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let outcome: Result<bool, StageError> = match cli.command {
        Command::Ingest => pipeline.ingest().map(|_| true),
        Command::Extract => pipeline.extract().map(|f| f.is_empty()),
        Command::Probe => pipeline.probe().map(|_| true),
        Command::Report => pipeline.report(started).map(|r| r.metadata.absent_cells.is_empty()),
        Command::Run => pipeline.run().map(|r| r.metadata.absent_cells.is_empty()),
        Command::Fixture => unreachable!(),
    };
    match outcome {
        Ok(true) => exit::SUCCESS,
        Ok(false) => {
            error!("finished with missing results; see the log and run_metadata.json");
            exit::RUNTIME_FAILURE
        }
        Err(e) => {
            error!("{e}");
            exit::RUNTIME_FAILURE
        }
    }
}
