//! `edgemarket` binary: train, evaluate, sweep, and audit the mechanisms.
//!
//! Errors leave through one funnel: a single-line JSON object on stderr
//! (`{"error": <code>, "message": <text>}`) and a nonzero exit status, so
//! scripts can branch on failures without scraping prose.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edgemarket_cli::{parse_config, run_sweep, CliError, ExperimentConfig};
use edgemarket_cli::{MetricsRecord, METRICS_CSV_HEADER};
use edgemarket_core::mappo::{
    evaluate, load_checkpoint, train, BidderKind, PolicySource, TRAIN_LOG_HEADER,
};
use edgemarket_core::market::properties::{run_property_suite, PropertyConfig};
use edgemarket_core::market::MechanismKind;

#[derive(Debug, Parser)]
#[command(name = "edgemarket", version, about = "Vehicular edge service market: auctions plus learned bidding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config, TOML or JSON. Omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Mechanism override: mcafee, second-price, or random.
    #[arg(long, global = true)]
    mechanism: Option<MechanismKind>,
    /// Bidder override: learned, truthful, or random.
    #[arg(long, global = true)]
    bidder: Option<BidderKind>,
    /// IoV counts for `sweep`, comma separated (e.g. 20,40,60,80).
    #[arg(long, global = true, value_delimiter = ',')]
    iovs: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train bidding policies; writes training_log.csv and checkpoints.
    Train,
    /// Roll out a bidder on fresh episodes and report summary statistics.
    Evaluate {
        /// Checkpoint to load when the bidder is `learned`
        /// (default: <out>/checkpoint.json).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Episode count override.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Train/evaluate every IoV count x mechanism x bidder cell; writes
    /// metrics.csv and one SVG chart per metric.
    Sweep,
    /// Re-check auction properties on freshly sampled random markets.
    MechanismProps {
        /// Random market count override.
        #[arg(long)]
        instances: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(mechanism) = cli.mechanism {
        config.mechanism = mechanism;
        config.sweep_mechanisms = vec![mechanism];
    }
    if let Some(bidder) = cli.bidder {
        config.bidder = bidder;
        config.sweep_bidders = vec![bidder];
    }
    if let Some(iovs) = &cli.iovs {
        config.iov_counts = iovs.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_train(config: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
    let result = train(
        &config.world,
        &config.train,
        config.mechanism,
        config.seed,
        Some(&config.out_dir),
    )?;
    println!("{TRAIN_LOG_HEADER}");
    if let Some(last) = result.rows.last() {
        println!("{}", last.csv());
    }
    println!(
        "trained {} epochs on {} vehicles ({})",
        config.train.epochs, config.world.vehicle_count, config.mechanism
    );
    println!("training log: {}", config.out_dir.join("training_log.csv").display());
    println!("checkpoint:   {}", config.out_dir.join("checkpoint.json").display());
    Ok(())
}

fn cmd_evaluate(
    config: &ExperimentConfig,
    checkpoint: Option<&PathBuf>,
    episodes: Option<usize>,
) -> Result<(), CliError> {
    let episodes = episodes.unwrap_or(config.episodes_per_eval);
    let record = match config.bidder {
        BidderKind::Learned => {
            let path = checkpoint
                .cloned()
                .unwrap_or_else(|| config.out_dir.join("checkpoint.json"));
            let ck = load_checkpoint(&path)?;
            let report = evaluate(
                PolicySource::Learned(&ck.policies),
                &ck.world_config,
                &ck.train_config,
                ck.mechanism,
                episodes,
                config.seed,
            )?;
            MetricsRecord::from_report(
                &config.experiment,
                ck.world_config.vehicle_count,
                ck.mechanism,
                BidderKind::Learned,
                &report,
            )
        }
        baseline => {
            let report = evaluate(
                PolicySource::Baseline(baseline),
                &config.world,
                &config.train,
                config.mechanism,
                episodes,
                config.seed,
            )?;
            MetricsRecord::from_report(
                &config.experiment,
                config.world.vehicle_count,
                config.mechanism,
                baseline,
                &report,
            )
        }
    };
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
    let path = config.out_dir.join("evaluation.csv");
    edgemarket_cli::write_metrics_csv(&path, std::slice::from_ref(&record))?;
    println!("{METRICS_CSV_HEADER}");
    println!("{}", record.csv_row());
    println!("evaluation: {}", path.display());
    Ok(())
}

fn cmd_sweep(config: &ExperimentConfig) -> Result<(), CliError> {
    let records = run_sweep(config)?;
    println!(
        "swept {} cells into {}",
        records.len(),
        config.out_dir.join("metrics.csv").display()
    );
    for metric in edgemarket_cli::PLOT_METRICS {
        println!("plot: {}", config.out_dir.join(format!("{metric}.svg")).display());
    }
    Ok(())
}

fn cmd_mechanism_props(config: &ExperimentConfig, instances: Option<usize>) -> Result<(), CliError> {
    let mut prop_cfg = PropertyConfig {
        seed: config.seed,
        ..PropertyConfig::default()
    };
    if let Some(n) = instances {
        prop_cfg.market_instances = n;
        prop_cfg.truthfulness_instances = n;
    }
    let report = run_property_suite(&prop_cfg);
    for line in report.summary_lines() {
        println!("{line}");
    }
    if report.all_hold() {
        Ok(())
    } else {
        Err(CliError::PropertyViolation {
            summary: report.summary_lines().join("; "),
        })
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Train => cmd_train(&config),
        Command::Evaluate {
            checkpoint,
            episodes,
        } => cmd_evaluate(&config, checkpoint.as_ref(), *episodes),
        Command::Sweep => cmd_sweep(&config),
        Command::MechanismProps { instances } => cmd_mechanism_props(&config, *instances),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({
                "error": err.code(),
                "message": err.to_string(),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
