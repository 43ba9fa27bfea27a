//! Library half of the experiment runner: configuration, sweep
//! orchestration, metrics persistence, and SVG plots. The `edgemarket`
//! binary is a thin shell over these pieces.

pub mod config;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod sweep;

pub use config::{parse_config, ExperimentConfig};
pub use error::CliError;
pub use metrics::{write_metrics_csv, MetricsRecord, METRICS_CSV_HEADER};
pub use plot::{emit_plot, render_plot, PLOT_METRICS};
pub use sweep::run_sweep;
