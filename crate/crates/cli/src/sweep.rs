//! The sweep driver: for each IoV count, train (when the bidder is learned)
//! and evaluate every mechanism/bidder combination, stream rows into
//! `metrics.csv`, then chart each metric.
//!
//! All combinations at a given IoV count share one seed, so every mechanism
//! and bidder faces the same sequence of worlds and the same draws. That
//! makes cross-mechanism comparisons paired rather than merely averaged.

use std::fs::File;
use std::io::Write as _;

use edgemarket_core::mappo::{evaluate, train, BidderKind, PolicySource};
use edgemarket_core::market::MechanismKind;
use edgemarket_core::rng::child_seed;
use edgemarket_core::simenv::WorldConfig;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::metrics::{MetricsRecord, METRICS_CSV_HEADER};
use crate::plot::{emit_plot, PLOT_METRICS};

fn run_cell(
    config: &ExperimentConfig,
    iov_count: usize,
    mechanism: MechanismKind,
    bidder: BidderKind,
    cell_seed: u64,
) -> Result<MetricsRecord, CliError> {
    let world = WorldConfig {
        vehicle_count: iov_count,
        ..config.world.clone()
    };
    let eval_seed = child_seed(cell_seed, 1);
    let report = match bidder {
        BidderKind::Learned => {
            let train_dir = config
                .out_dir
                .join(format!("train-iov{iov_count}-{mechanism}"));
            std::fs::create_dir_all(&train_dir).map_err(|e| CliError::io(&train_dir, e))?;
            let result = train(
                &world,
                &config.train,
                mechanism,
                child_seed(cell_seed, 0),
                Some(&train_dir),
            )?;
            evaluate(
                PolicySource::Learned(&result.policies),
                &world,
                &config.train,
                mechanism,
                config.episodes_per_eval,
                eval_seed,
            )?
        }
        baseline => evaluate(
            PolicySource::Baseline(baseline),
            &world,
            &config.train,
            mechanism,
            config.episodes_per_eval,
            eval_seed,
        )?,
    };
    Ok(MetricsRecord::from_report(
        &config.experiment,
        iov_count,
        mechanism,
        bidder,
        &report,
    ))
}

/// Run the whole grid. Rows are flushed as they finish, so a partial
/// `metrics.csv` survives an interrupted run; plots are written at the end.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<MetricsRecord>, CliError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
    let csv_path = config.out_dir.join("metrics.csv");
    let mut csv = File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    writeln!(csv, "{METRICS_CSV_HEADER}").map_err(|e| CliError::io(&csv_path, e))?;
    csv.flush().map_err(|e| CliError::io(&csv_path, e))?;

    let mut records = Vec::new();
    for &iov_count in &config.iov_counts {
        // Keyed only by the IoV count: every mechanism and bidder in this
        // cell block sees identical worlds and identical random draws.
        let cell_seed = child_seed(config.seed, iov_count as u64);
        for mechanism in config.mechanisms() {
            for bidder in config.bidders() {
                let record = run_cell(config, iov_count, mechanism, bidder, cell_seed)?;
                writeln!(csv, "{}", record.csv_row()).map_err(|e| CliError::io(&csv_path, e))?;
                csv.flush().map_err(|e| CliError::io(&csv_path, e))?;
                records.push(record);
            }
        }
    }

    for metric in PLOT_METRICS {
        let path = config.out_dir.join(format!("{metric}.svg"));
        emit_plot(&path, &records, metric)?;
    }
    Ok(records)
}
